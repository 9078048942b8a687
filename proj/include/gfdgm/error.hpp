#ifndef GFDGM_ERROR_HPP
#define GFDGM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace gfdgm {

/// Error categories raised by the library.
enum class ErrorKind {
  NotPositiveSemidefinite,
  SingularKkt,
  NonConvergence,
  Infeasible,
  UnsupportedProx,
  UnsupportedInner,
  RefusedUncertifiedMetric,
  InvalidArgument,
  Parse,
  Validation,
};

inline const char* to_string(ErrorKind k)
{
  switch (k) {
    case ErrorKind::NotPositiveSemidefinite: return "NotPositiveSemidefinite";
    case ErrorKind::SingularKkt: return "SingularKkt";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::UnsupportedProx: return "UnsupportedProx";
    case ErrorKind::UnsupportedInner: return "UnsupportedInner";
    case ErrorKind::RefusedUncertifiedMetric: return "RefusedUncertifiedMetric";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Validation: return "Validation";
  }
  return "Unknown";
}

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
  {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what)
{
  if (!cond) fail(ErrorKind::InvalidArgument, what);
}

}  // namespace gfdgm

#endif  // GFDGM_ERROR_HPP
