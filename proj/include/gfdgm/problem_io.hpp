#ifndef GFDGM_PROBLEM_IO_HPP
#define GFDGM_PROBLEM_IO_HPP

/**
 * @file
 * @brief JSON problem files.
 *
 * Layout (all matrices dense row-major, infinities written as "inf"/"-inf"):
 *
 *     { "n": 2, "m": 1, "p": 1,
 *       "H": [..n*n..], "zeta": [..n..],
 *       "A": [..m*n..], "b": [..m..],
 *       "B": [..p*n..], "d_lo": [..p..], "d_hi": [..p..], "g_kind": "box",
 *       "h_kind": "zero" | "box" | "equality" | "soft_box",
 *       "y_min": [..n..], "y_max": [..n..],
 *       "soft": [ {"var": 0, "slack_lo": 1, "slack_hi": 2, "lb": -1, "ub": 1} ] }
 *
 * With h_kind "equality" the (A, b) pair belongs to h; otherwise it is
 * dualized. Doubles are written with 17 significant digits so that a
 * save/load round trip is bit-exact.
 */

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gfdgm/problem.hpp"

namespace gfdgm {

namespace io {

using json = nlohmann::json;

inline json encode(double v)
{
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

inline double decode(const json& j, const std::string& path)
{
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  fail(ErrorKind::Parse, path + ": expected a number or \"inf\"/\"-inf\"");
}

inline json encode(const Vec& v)
{
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(encode(v(i)));
  return a;
}

/// Row-major flattening.
inline json encode(const Mat& m)
{
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(encode(m(i, j)));
  return a;
}

inline const json& field(const json& obj, const std::string& key, const std::string& path)
{
  if (!obj.contains(key)) fail(ErrorKind::Parse, path + "." + key + ": missing field");
  return obj.at(key);
}

inline long long get_index(const json& obj, const std::string& key, const std::string& path)
{
  const auto& v = field(obj, key, path);
  if (!v.is_number_integer()) fail(ErrorKind::Parse, path + "." + key + ": expected an integer");
  return v.get<long long>();
}

inline Vec decode_vec(const json& obj, const std::string& key, Eigen::Index len, const std::string& path)
{
  const auto& a = field(obj, key, path);
  const auto where = path + "." + key;
  if (!a.is_array()) fail(ErrorKind::Parse, where + ": expected an array");
  if (static_cast<Eigen::Index>(a.size()) != len) {
    std::ostringstream os;
    os << where << ": expected " << len << " entries, found " << a.size();
    fail(ErrorKind::Validation, os.str());
  }
  Vec v(len);
  for (Eigen::Index i = 0; i < len; ++i) v(i) = decode(a[static_cast<std::size_t>(i)], where + "[" + std::to_string(i) + "]");
  return v;
}

inline Mat decode_mat(const json& obj, const std::string& key, Eigen::Index rows, Eigen::Index cols,
                      const std::string& path)
{
  const Vec flat = decode_vec(obj, key, rows * cols, path);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = flat(i * cols + j);
  return m;
}

}  // namespace io

inline nlohmann::json problem_to_json(const ComposedProblem& p)
{
  using io::encode;
  nlohmann::json j;
  const AffineEq* heq = p.h_equality();
  const AffineEq* eq  = heq ? heq : (p.eq ? &*p.eq : nullptr);
  require(!(heq && p.eq), "problem file format cannot hold both a dualized and an h equality");
  j["n"]    = p.n();
  j["m"]    = eq ? eq->A.rows() : 0;
  j["p"]    = p.p();
  j["H"]    = encode(p.cost.H.mat());
  j["zeta"] = encode(p.cost.zeta);
  j["A"]    = eq ? encode(eq->A) : nlohmann::json::array();
  j["b"]    = eq ? encode(eq->b) : nlohmann::json::array();
  j["B"]    = encode(p.g.B);
  j["g_kind"] = p.g.kind == GKind::Box ? "box" : "zero";
  if (p.g.kind == GKind::Box) {
    j["d_lo"] = encode(p.g.d_lo);
    j["d_hi"] = encode(p.g.d_hi);
  }
  j["h_kind"] = h_kind_name(p.h);
  if (const auto* b = std::get_if<hterm::Box>(&p.h)) {
    j["y_min"] = encode(b->lo);
    j["y_max"] = encode(b->hi);
  }
  if (const auto* s = std::get_if<hterm::SoftBoxCoupled>(&p.h)) {
    j["y_min"] = encode(s->lo);
    j["y_max"] = encode(s->hi);
    auto arr   = nlohmann::json::array();
    for (const auto& e : s->soft)
      arr.push_back({{"var", e.var}, {"slack_lo", e.slack_lo}, {"slack_hi", e.slack_hi}, {"lb", encode(e.lb)},
                     {"ub", encode(e.ub)}});
    j["soft"] = arr;
  }
  return j;
}

/**
 * @brief Builds a problem from its JSON form.
 *
 * Schema violations raise ErrorKind::Parse naming the field path; length
 * mismatches and inconsistent bounds raise ErrorKind::Validation.
 */
inline ComposedProblem problem_from_json(const nlohmann::json& j)
{
  using namespace io;
  const std::string root = "$";
  if (!j.is_object()) fail(ErrorKind::Parse, "$: expected an object");
  const auto n = get_index(j, "n", root);
  const auto m = get_index(j, "m", root);
  const auto p = get_index(j, "p", root);
  if (n <= 0 || m < 0 || p < 0) fail(ErrorKind::Validation, "$: dimensions must satisfy n > 0, m >= 0, p >= 0");

  ComposedProblem prob;
  prob.cost.H    = SymMatrix(decode_mat(j, "H", n, n, root));
  prob.cost.zeta = decode_vec(j, "zeta", n, root);
  AffineEq eq{decode_mat(j, "A", m, n, root), decode_vec(j, "b", m, root)};
  prob.g.B = decode_mat(j, "B", p, n, root);

  const auto g_kind = field(j, "g_kind", root);
  if (g_kind == "box") {
    prob.g.kind = GKind::Box;
    prob.g.d_lo = decode_vec(j, "d_lo", p, root);
    prob.g.d_hi = decode_vec(j, "d_hi", p, root);
  } else if (g_kind != "zero") {
    fail(ErrorKind::Parse, "$.g_kind: expected \"zero\" or \"box\"");
  }

  const auto& hk = field(j, "h_kind", root);
  if (!hk.is_string()) fail(ErrorKind::Parse, "$.h_kind: expected a string");
  const auto h_kind = hk.get<std::string>();
  if (h_kind == "equality") {
    prob.h = hterm::Equality{eq};
  } else {
    if (m > 0) prob.eq = eq;
    if (h_kind == "zero") {
      prob.h = hterm::Zero{};
    } else if (h_kind == "box") {
      prob.h = hterm::Box{decode_vec(j, "y_min", n, root), decode_vec(j, "y_max", n, root)};
    } else if (h_kind == "soft_box") {
      hterm::SoftBoxCoupled s{decode_vec(j, "y_min", n, root), decode_vec(j, "y_max", n, root), {}};
      const auto& arr = field(j, "soft", root);
      if (!arr.is_array()) fail(ErrorKind::Parse, "$.soft: expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto path = "$.soft[" + std::to_string(i) + "]";
        s.soft.push_back({get_index(arr[i], "var", path), get_index(arr[i], "slack_lo", path),
                          get_index(arr[i], "slack_hi", path), decode(field(arr[i], "lb", path), path + ".lb"),
                          decode(field(arr[i], "ub", path), path + ".ub")});
      }
      prob.h = std::move(s);
    } else {
      fail(ErrorKind::Parse, "$.h_kind: unknown kind \"" + h_kind + "\"");
    }
  }

  // bound ordering is a file-level error, reported with the offending index
  auto report = validate(prob);
  for (const auto& issue : report.issues)
    if (issue.find(" > ") != std::string::npos || issue.find("dimension") != std::string::npos)
      fail(ErrorKind::Validation, issue);
  return prob;
}

inline std::string problem_to_string(const ComposedProblem& p) { return problem_to_json(p).dump(1); }

inline ComposedProblem problem_from_string(const std::string& text)
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("malformed JSON: ") + e.what());
  }
  try {
    return problem_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, e.what());
  }
}

inline void save_problem(const ComposedProblem& p, const std::string& path)
{
  std::ofstream out(path);
  if (!out) fail(ErrorKind::InvalidArgument, "cannot open " + path + " for writing");
  out << problem_to_string(p) << "\n";
}

inline ComposedProblem load_problem(const std::string& path)
{
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Parse, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return problem_from_string(ss.str());
}

}  // namespace gfdgm

#endif  // GFDGM_PROBLEM_IO_HPP
