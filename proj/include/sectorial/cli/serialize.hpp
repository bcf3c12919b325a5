#pragma once

#include <cmath>
#include <memory>
#include <string>

#include <json.hpp>

#include "sectorial/calculi.hpp"
#include "sectorial/error.hpp"
#include "sectorial/functions.hpp"
#include "sectorial/verify.hpp"

namespace sectorial::io {

using json = nlohmann::json;

namespace detail {

inline void need(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::BadSpec, what);
}

/// Infinite bounds are written as null.
inline json real(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
inline double real_of(const json& j) {
  if (j.is_null()) return kInf;
  need(j.is_number(), "expected a number");
  return j.get<double>();
}

inline json complex(cplx z) { return json::array({z.real(), z.imag()}); }
inline cplx complex_of(const json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  need(j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number(), "expected [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline const json& field(const json& j, const char* key) {
  need(j.is_object() && j.contains(key), std::string("missing field '") + key + "'");
  return j.at(key);
}

inline std::vector<double> doubles(const json& j) {
  need(j.is_array(), "expected an array of numbers");
  std::vector<double> v;
  for (const auto& x : j) v.push_back(real_of(x));
  return v;
}

inline json doubles(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(real(x));
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------- matrices

/// {"rows": r, "cols": c, "data": [[re, im], ...]} in row-major order.
inline json to_json(const cmat& A) {
  json data = json::array();
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) data.push_back(detail::complex(A(i, j)));
  return {{"rows", A.rows()}, {"cols", A.cols()}, {"data", data}};
}

inline cmat matrix_from_json(const json& j) {
  const json& r = detail::field(j, "rows");
  const json& c = detail::field(j, "cols");
  detail::need(r.is_number_unsigned() && c.is_number_unsigned(), "rows and cols must be nonnegative integers");
  const auto rows = r.get<Eigen::Index>(), cols = c.get<Eigen::Index>();
  const json& data = detail::field(j, "data");
  detail::need(data.is_array() && Eigen::Index(data.size()) == rows * cols, "data must hold rows*cols entries");
  cmat A(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) A(i, k) = detail::complex_of(data[std::size_t(i * cols + k)]);
  return A;
}

// ---------------------------------------------------------------- measures

inline json to_json(const Density& d) {
  json j{{"kind", to_string(d.kind)},
         {"params", detail::doubles(d.params)},
         {"scale", detail::complex(d.scale)},
         {"lo", detail::real(d.lo)},
         {"hi", detail::real(d.hi)}};
  if (!d.nodes.empty() || !d.values.empty()) {
    j["nodes"] = detail::doubles(d.nodes);
    j["values"] = detail::doubles(d.values);
  }
  if (d.envelope) {
    const auto& e = *d.envelope;
    j["envelope"] = {{"kind", e.kind == Envelope::Kind::power ? "power" : "exp"},
                     {"coeff", detail::real(e.coeff)},
                     {"rate", detail::real(e.rate)},
                     {"threshold", detail::real(e.threshold)}};
  }
  if (d.inner) j["inner"] = to_json(*d.inner);
  return j;
}

inline DensityKind density_kind_from_string(const std::string& s) {
  for (DensityKind k : {DensityKind::power_law, DensityKind::indicator_poly, DensityKind::exp_decay,
                        DensityKind::tabulated, DensityKind::beta, DensityKind::exp_conv, DensityKind::embedded})
    if (s == to_string(k)) return k;
  throw Error(ErrorCode::BadSpec, "unknown density kind '" + s + "'");
}

inline Density density_from_json(const json& j) {
  Density d;
  d.kind = density_kind_from_string(detail::field(j, "kind").get<std::string>());
  d.params = detail::doubles(detail::field(j, "params"));
  d.scale = j.contains("scale") ? detail::complex_of(j["scale"]) : cplx(1.0);
  d.lo = detail::real_of(detail::field(j, "lo"));
  d.hi = detail::real_of(detail::field(j, "hi"));
  if (j.contains("nodes")) d.nodes = detail::doubles(j["nodes"]);
  if (j.contains("values")) d.values = detail::doubles(j["values"]);
  if (j.contains("envelope")) {
    const json& e = j["envelope"];
    const std::string k = detail::field(e, "kind").get<std::string>();
    detail::need(k == "power" || k == "exp", "envelope kind must be power or exp");
    d.envelope = Envelope{k == "power" ? Envelope::Kind::power : Envelope::Kind::exp,
                          detail::real_of(detail::field(e, "coeff")), detail::real_of(detail::field(e, "rate")),
                          detail::real_of(detail::field(e, "threshold"))};
  }
  if (j.contains("inner")) d.inner = std::make_shared<const Density>(density_from_json(j["inner"]));
  return d;
}

/// {"atoms": [[site, re, im], ...], "densities": [...]}
inline json to_json(const RadonMeasure& m) {
  json atoms = json::array(), dens = json::array();
  for (const auto& a : m.atoms) atoms.push_back({a.site, a.weight.real(), a.weight.imag()});
  for (const auto& d : m.densities) dens.push_back(to_json(d));
  return {{"atoms", atoms}, {"densities", dens}};
}

inline RadonMeasure measure_from_json(const json& j) {
  RadonMeasure m;
  if (j.contains("atoms")) {
    detail::need(j["atoms"].is_array(), "atoms must be an array");
    for (const auto& a : j["atoms"]) {
      detail::need(a.is_array() && (a.size() == 2 || a.size() == 3), "atom must be [site, re(, im)]");
      m.atoms.push_back({a[0].get<double>(), {a[1].get<double>(), a.size() == 3 ? a[2].get<double>() : 0.0}});
    }
  }
  if (j.contains("densities")) {
    detail::need(j["densities"].is_array(), "densities must be an array");
    for (const auto& d : j["densities"]) m.densities.push_back(density_from_json(d));
  }
  return m;
}

// ---------------------------------------------------------------- function specs

inline Builtin builtin_from_string(const std::string& s) {
  for (Builtin b : {Builtin::power, Builtin::log1p, Builtin::one_minus_exp, Builtin::rational, Builtin::constant,
                    Builtin::identity, Builtin::tilde})
    if (s == to_string(b)) return b;
  throw Error(ErrorCode::UnknownBuiltin, s);
}

inline json to_json(const FunctionSpec& f) {
  json j{{"kind", f.kind()}};
  if (!f.label.empty()) j["label"] = f.label;
  std::visit(
      [&](const auto& r) {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, StieltjesRep>) {
          j["order"] = r.order;
          j["nu"] = to_json(r.nu);
        } else if constexpr (std::is_same_v<R, TclassRep>) {
          j["order"] = r.order;
          j["a"] = detail::complex(r.a);
          j["mu"] = to_json(r.mu);
        } else if constexpr (std::is_same_v<R, BernsteinTriple>) {
          j["a"] = r.a;
          j["b"] = r.b;
          j["mu"] = to_json(r.mu);
        } else if constexpr (std::is_same_v<R, LaplaceRep>) {
          j["mu"] = to_json(r.mu);
        } else {
          j["builtin"] = to_string(r.id);
          j["params"] = detail::doubles(r.params);
          if (r.inner) j["inner"] = to_json(*r.inner);
        }
      },
      f.rep);
  return j;
}

/// Accepts the structural form written by to_json, a catalog string "name:p,q", or
/// {"catalog": name, "params": [...]}.
inline FunctionSpec function_from_json(const json& j) {
  if (j.is_string()) return parse_function(j.get<std::string>());
  detail::need(j.is_object(), "function spec must be an object or a catalog string");
  if (j.contains("catalog"))
    return catalog(j["catalog"].get<std::string>(), j.contains("params") ? detail::doubles(j["params"]) : std::vector<double>{});
  const std::string kind = detail::field(j, "kind").get<std::string>();
  const std::string label = j.value("label", "");
  auto order = [&] {
    const json& o = detail::field(j, "order");
    detail::need(o.is_number_integer() && o.get<int>() >= 1, "order must be a positive integer");
    return o.get<int>();
  };
  if (kind == "stieltjes") return make_spec(StieltjesRep{order(), measure_from_json(detail::field(j, "nu"))}, label);
  if (kind == "tclass")
    return make_spec(TclassRep{order(), j.contains("a") ? detail::complex_of(j["a"]) : cplx(0.0),
                               measure_from_json(detail::field(j, "mu"))},
                     label);
  if (kind == "bernstein")
    return make_spec(BernsteinTriple{j.value("a", 0.0), j.value("b", 0.0), measure_from_json(detail::field(j, "mu"))},
                     label);
  if (kind == "laplace") return make_spec(LaplaceRep{measure_from_json(detail::field(j, "mu"))}, label);
  if (kind == "closed") {
    ClosedForm c;
    c.id = builtin_from_string(detail::field(j, "builtin").get<std::string>());
    if (j.contains("params")) c.params = detail::doubles(j["params"]);
    if (j.contains("inner")) c.inner = std::make_shared<const FunctionSpec>(function_from_json(j["inner"]));
    detail::need(c.id != Builtin::tilde || c.inner, "tilde needs an inner function");
    return make_spec(std::move(c), label);
  }
  throw Error(ErrorCode::BadSpec, "unknown function kind '" + kind + "'");
}

// ---------------------------------------------------------------- results and reports

inline json to_json(const CalcResult& r) {
  json j{{"method", to_string(r.method)},
         {"value", to_json(r.value)},
         {"err_estimate", detail::real(r.err_estimate)},
         {"nodes_used", r.nodes_used}};
  if (r.contour_angle) j["contour_angle"] = *r.contour_angle;
  if (r.cross_check) j["cross_check"] = detail::real(*r.cross_check);
  return j;
}

inline json to_json(const CheckReport& r) {
  json diags = json::object();
  for (const auto& [k, v] : r.diagnostics) diags[k] = v;
  return {{"check_id", r.check_id},
          {"inputs", r.inputs},
          {"passed", r.passed},
          {"status", r.status},
          {"informational", r.informational},
          {"residual_abs", detail::real(r.residual_abs)},
          {"residual_rel", detail::real(r.residual_rel)},
          {"tolerance", detail::real(r.tolerance)},
          {"diagnostics", diags}};
}

inline CheckReport report_from_json(const json& j) {
  CheckReport r;
  r.check_id = detail::field(j, "check_id").get<std::string>();
  r.inputs = j.value("inputs", "");
  r.passed = detail::field(j, "passed").get<bool>();
  r.status = j.value("status", r.passed ? "passed" : "failed");
  r.informational = j.value("informational", false);
  r.residual_abs = detail::real_of(j.value("residual_abs", json(nullptr)));
  r.residual_rel = detail::real_of(detail::field(j, "residual_rel"));
  r.tolerance = detail::real_of(detail::field(j, "tolerance"));
  if (j.contains("diagnostics"))
    for (const auto& [k, v] : j["diagnostics"].items()) r.diagnostics.emplace_back(k, v.get<std::string>());
  return r;
}

/// {"suite", "all_passed", "checks", "fixture_hashes"}; keys sorted, no timestamps.
inline json to_json(const SuiteResult& s) {
  json checks = json::array();
  for (const auto& r : s.reports) checks.push_back(to_json(r));
  json hashes = json::object();
  for (const auto& [k, v] : s.fixture_hashes) hashes[k] = v;
  return {{"suite", s.name}, {"all_passed", s.all_passed()}, {"checks", checks}, {"fixture_hashes", hashes}};
}

inline SuiteResult suite_from_json(const json& j) {
  SuiteResult s;
  s.name = detail::field(j, "suite").get<std::string>();
  for (const auto& c : detail::field(j, "checks")) s.reports.push_back(report_from_json(c));
  if (j.contains("fixture_hashes"))
    for (const auto& [k, v] : j["fixture_hashes"].items()) s.fixture_hashes[k] = v.get<std::string>();
  return s;
}

inline json error_json(const std::string& code, const std::string& message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

}  // namespace sectorial::io
