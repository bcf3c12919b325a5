#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sectorial/error.hpp"
#include "sectorial/functions.hpp"
#include "sectorial/linops.hpp"
#include "sectorial/measures.hpp"
#include "sectorial/quadrature.hpp"

namespace sectorial {

enum class Method { hol, stieltjes, stieltjes_ext, hirsch, hp, hp_ext, eigen_oracle };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::hol: return "hol";
    case Method::stieltjes: return "stieltjes";
    case Method::stieltjes_ext: return "stieltjes_ext";
    case Method::hirsch: return "hirsch";
    case Method::hp: return "hp";
    case Method::hp_ext: return "hp_ext";
    case Method::eigen_oracle: return "eigen_oracle";
  }
  return "?";
}

inline Method method_from_string(std::string_view s) {
  for (Method m : {Method::hol, Method::stieltjes, Method::stieltjes_ext, Method::hirsch, Method::hp, Method::hp_ext,
                   Method::eigen_oracle})
    if (s == to_string(m)) return m;
  throw Error(ErrorCode::BadSpec, "unknown calculus '" + std::string(s) + "'");
}

struct CalcResult {
  cmat value;
  Method method = Method::eigen_oracle;
  double err_estimate = 0.0;
  std::size_t nodes_used = 0;
  std::optional<double> contour_angle;
  std::optional<double> cross_check;  // hp_ext: deviation from the regularized path
};

/// Contour half-angle (default (omega + pi)/2), truncation tolerance and node budget.
struct ContourConfig {
  std::optional<double> omega0;
  double tol = 1e-10;
  std::size_t budget = quad::default_node_budget();
};

namespace detail {

inline constexpr double kPi = 3.14159265358979323846;

inline double op_norm(const cmat& X) {
  if (X.size() == 0) return 0.0;
  return Eigen::JacobiSVD<cmat>(X).singularValues()(0);
}

inline cmat identity_like(const SectorialMatrix& op) { return cmat::Identity(op.dim(), op.dim()); }

inline cmat matpow(const cmat& X, int k) {
  cmat r = cmat::Identity(X.rows(), X.cols());
  for (int i = 0; i < k; ++i) r = r * X;
  return r;
}

/// Matrix kernels at a site s: stieltjes (1+sA)^-1, tclass A(1+sA)^-1. Powers at sites
/// used by several atoms or two-site densities are cached.
struct SiteKernels {
  enum class Form { stieltjes, tclass };
  const SectorialMatrix& op;
  Form form;
  std::map<double, std::vector<cmat>> cache;
  std::size_t stored = 0;

  SiteKernels(const SectorialMatrix& o, Form f) : op(o), form(f) {}

  cmat base(double s) const {
    const Eigen::Index d = op.dim();
    const cmat I = cmat::Identity(d, d);
    if (s == 0.0) return form == Form::stieltjes ? I : op.A;
    cmat R = Eigen::PartialPivLU<cmat>(I + s * op.A).solve(I);
    return form == Form::stieltjes ? R : cmat(op.A * R);
  }

  cmat fresh(double s, int k) const { return matpow(base(s), k); }

  const cmat& power(double s, int k) {
    const std::size_t d2 = std::size_t(op.dim() * op.dim());
    if (stored * d2 > (std::size_t(1) << 24)) {
      cache.clear();
      stored = 0;
    }
    auto& v = cache[s];
    if (v.empty()) {
      v.push_back(cmat::Identity(op.dim(), op.dim()));
      ++stored;
    }
    while (int(v.size()) <= k) {
      v.push_back(v.size() == 1 ? base(s) : cmat(v.back() * v[1]));
      ++stored;
    }
    return v[std::size_t(k)];
  }

  /// Norm bound for the k-th kernel power: M^k, or ((1+M)/s)^k for tclass.
  TailProfile bound(int k) const {
    if (form == Form::stieltjes) return {std::pow(op.M, k), 0.0, 0.0, 0.0};
    return {std::pow(1.0 + op.M, k), double(k), 0.0, 0.0};
  }
};

struct MatIntegral {
  cmat value;
  double err = 0.0;
  std::size_t nodes = 0;
};

inline MatIntegral integrate_matrix(const RadonMeasure& mu, SiteKernels& K, int n, double tol, std::size_t budget);

/// Exact matrix integrals of two-site and one-site beta densities and of embedded ones.
inline std::optional<MatIntegral> closed_matrix(const Density& d, SiteKernels& K, int n, double tol,
                                                std::size_t budget) {
  const bool tf = K.form == SiteKernels::Form::tclass;
  if (d.kind == DensityKind::beta) {
    const int p = int(d.params[0]), q = int(d.params[1]);
    if (p + q != n) return std::nullopt;
    cmat v;
    if (d.bounded())
      v = K.power(d.lo, q) * K.power(d.hi, p);
    else if (tf)
      v = K.power(d.lo, q);
    else
      return std::nullopt;
    v *= d.scale;
    const double mag = v.norm();
    return MatIntegral{std::move(v), 16.0 * kEps * (n + 1) * mag, 0};
  }
  if (d.kind == DensityKind::embedded && d.inner) {
    if ((d.params[2] == 0.0) != tf || int(d.params[1]) != n) return std::nullopt;
    MatIntegral r = integrate_matrix(RadonMeasure::of(*d.inner), K, int(d.params[0]), tol / std::max(1e-300, std::abs(d.scale)), budget);
    r.value *= d.scale;
    r.err *= std::abs(d.scale);
    return r;
  }
  return std::nullopt;
}

inline MatIntegral integrate_matrix(const RadonMeasure& mu, SiteKernels& K, int n, double tol, std::size_t budget) {
  const Eigen::Index d = K.op.dim();
  MatIntegral out{cmat::Zero(d, d), 0.0, 0};
  double mag = 0.0;
  std::map<double, cplx> atoms;
  for (const auto& a : mu.atoms) atoms[a.site] += a.weight;
  for (const auto& [s, w] : atoms) {
    if (w == 0.0) continue;
    cmat t = w * K.power(s, n);
    mag += t.norm();
    out.value += t;
  }
  out.err = 16.0 * kEps * (n + 1) * mag;
  std::vector<const Density*> quad_parts;
  for (const auto& dn : mu.densities) {
    if (auto c = closed_matrix(dn, K, n, tol, budget)) {
      out.value += c->value;
      out.err += c->err;
      out.nodes += c->nodes;
    } else {
      quad_parts.push_back(&dn);
    }
  }
  const TailProfile kb = K.bound(n);
  const cmat zero = cmat::Zero(d, d);
  for (const Density* dn : quad_parts) {
    const std::size_t left = budget > out.nodes ? budget - out.nodes : 0;
    auto kern = [&](double s) -> cmat { return K.fresh(s, n); };
    auto r = integrate_density<cmat>(*dn, kern, kb, tol / double(quad_parts.size()), left, zero);
    out.value += r.value;
    out.err += r.err;
    out.nodes += r.nodes;
  }
  return out;
}

/// Upper bound for |mu|([0, inf)) by the triangle inequality over parts.
inline double mass_upper_bound(const Density& d) {
  switch (d.kind) {
    case DensityKind::beta:
      if (d.bounded()) return std::abs(d.scale);
      break;
    case DensityKind::embedded:
      if (d.params[2] != 0.0 && d.inner) return std::abs(d.scale) * mass_upper_bound(*d.inner);
      return kInf;
    case DensityKind::exp_conv:
      if (d.inner) return std::abs(d.scale) * mass_upper_bound(*d.inner);
      break;
    default:
      break;
  }
  auto v = total_variation(RadonMeasure::of(d), 1e-8);
  return v.tv + v.err;
}

inline double mass_upper_bound(const RadonMeasure& mu) {
  double tv = atom_variation(mu.atoms);
  for (const auto& d : mu.densities) {
    tv += mass_upper_bound(d);
    if (!std::isfinite(tv)) return kInf;
  }
  return tv;
}

/// An error estimate cannot exceed |value| + cap, and a value beyond the cap is itself
/// an error of at least the excess.
inline double capped(double err, double value_norm, double cap) {
  if (!std::isfinite(cap)) return err;
  err = std::max(err, value_norm - cap);
  return std::min(err, value_norm + cap);
}

}  // namespace detail

// ---------------------------------------------------------------- Stieltjes engines

/// sum w (I + sA)^-n over atoms plus the density integral; exact for beta parts.
inline CalcResult eval_stieltjes_bounded(const StieltjesRep& f, const SectorialMatrix& op, double tol = 1e-10,
                                         std::size_t budget = quad::default_node_budget()) {
  detail::SiteKernels K(op, detail::SiteKernels::Form::stieltjes);
  auto r = detail::integrate_matrix(f.nu, K, f.order, tol, budget);
  CalcResult out{std::move(r.value), Method::stieltjes, r.err, r.nodes, std::nullopt, std::nullopt};
  if (op.dim() > 0) {
    const double cap = std::pow(op.M, f.order) * detail::mass_upper_bound(f.nu);
    out.err_estimate = detail::capped(out.err_estimate, detail::op_norm(out.value), cap);
  }
  return out;
}

/// (I+A)^n [f psi_n](A) with the regularized rep of order 2n.
inline CalcResult eval_stieltjes_extended(const TclassRep& f, const SectorialMatrix& op, double tol = 1e-10,
                                          std::size_t budget = quad::default_node_budget()) {
  const int n = f.order;
  const StieltjesRep reg = regularize_tclass(f);
  const cmat I = detail::identity_like(op);
  const cmat P = detail::matpow(I + op.A, n);
  const double pn = std::max(1.0, detail::op_norm(P));
  CalcResult s = eval_stieltjes_bounded(reg, op, tol / pn, budget);
  CalcResult out{P * s.value, Method::stieltjes_ext, pn * s.err_estimate, s.nodes_used, std::nullopt, std::nullopt};
  // representation residual at a few eigenvalues, carried through the regularizer
  std::vector<cplx> pts = op.spectrum;
  std::sort(pts.begin(), pts.end(), [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
  if (pts.size() > 3) pts = {pts.front(), pts[pts.size() / 2], pts.back()};
  double res = 0.0;
  for (cplx z : pts) {
    const cplx want = eval(f, z, 1e-13);
    const cplx got = eval(reg, z, 1e-13) * detail::ipow(1.0 + z, n);
    res = std::max(res, std::abs(got - want));
  }
  out.err_estimate += res + 64.0 * kEps * out.value.norm();
  return out;
}

/// a I + int A^n (I + sA)^-n mu(ds); the tail is cut using |A(1+sA)^-1| <= (1+M)/s.
inline CalcResult eval_hirsch(const TclassRep& f, const SectorialMatrix& op, double tol = 1e-10,
                              std::size_t budget = quad::default_node_budget()) {
  detail::SiteKernels K(op, detail::SiteKernels::Form::tclass);
  auto r = detail::integrate_matrix(f.mu, K, f.order, tol, budget);
  cmat v = f.a * detail::identity_like(op) + r.value;
  const double err = r.err + 16.0 * kEps * std::abs(f.a);
  return {std::move(v), Method::hirsch, err, r.nodes, std::nullopt, std::nullopt};
}

// ---------------------------------------------------------------- holomorphic engine

namespace detail {

struct ContourRun {
  cmat value;
  double err = 0.0;
  std::size_t nodes = 0;
};

/// (tau^m f)(A) = (1/2 pi i) int over the boundary of the sector of half-angle w0,
/// downward, in the variable u = log |z|.
inline ContourRun contour_integral(const FunctionSpec& f, int m, const SectorialMatrix& op, double w0, double tol,
                                   std::size_t budget) {
  const Eigen::Index d = op.dim();
  const cmat I = cmat::Identity(d, d);
  const cplx c = cplx(0.0, -1.0 / (2.0 * kPi));
  auto g = [&](cplx z) { return ipow(z / ((1.0 + z) * (1.0 + z)), m) * eval(f, z, 1e-14); };
  auto integrand = [&](double u) -> cmat {
    const double r = std::exp(u);
    const cplx lo = std::polar(r, -w0), up = std::polar(r, w0);
    cmat Rl = Eigen::PartialPivLU<cmat>(lo * I - op.A).solve(I);
    cmat Ru = Eigen::PartialPivLU<cmat>(up * I - op.A).solve(I);
    return c * ((g(lo) * lo) * Rl - (g(up) * up) * Ru);
  };
  // walk outwards until two consecutive unit steps are below the truncation level
  const double cut = 0.05 * tol;
  auto walk = [&](double start, double step, double& tail) {
    double u = start;
    int quiet = 0;
    for (int i = 0; i < 400 && quiet < 2; ++i) {
      u += step;
      const double v = integrand(u).norm();
      quiet = v < cut ? quiet + 1 : 0;
      tail = v;
    }
    if (quiet < 2) throw Error(ErrorCode::QuadratureStall, "contour integrand does not decay");
    return u;
  };
  double big = 1.0, small = 1.0;
  for (const cplx& l : op.spectrum) {
    if (std::abs(l) == 0.0) continue;
    big = std::max(big, std::abs(l));
    small = std::min(small, std::abs(l));
  }
  double tail_hi = 0.0, tail_lo = 0.0;
  const double u_hi = walk(std::log(big), 1.0, tail_hi);
  const double u_lo = walk(std::log(small), -1.0, tail_lo);
  auto q = quad::adaptive<cmat>(integrand, u_lo, u_hi, 0.8 * tol, budget, cmat(cmat::Zero(d, d)));
  return {std::move(q.value), q.err + tail_hi + tail_lo, q.nodes + 16};
}

}  // namespace detail

/// f(A) = [tau(A)]^-(n+1) (tau^(n+1) f)(A), tau(z) = z/(1+z)^2, with n the growth order
/// of f. The error estimate adds the largest deviation of reruns at w0 -+ 0.05.
inline CalcResult eval_holomorphic(const FunctionSpec& f, const SectorialMatrix& op, const ContourConfig& cfg = {}) {
  if (!op.injective()) throw Error(ErrorCode::NotInjective, "holomorphic calculus needs injective A");
  const double margin = 0.05;
  const double lo = op.omega + margin, hi = detail::kPi - margin;
  if (lo > hi) throw Error(ErrorCode::ContourTooClose, "no admissible contour angle for omega = " + fmt(op.omega));
  const double w0 = cfg.omega0.value_or(0.5 * (op.omega + detail::kPi));
  if (w0 < lo || w0 > hi)
    throw Error(ErrorCode::ContourTooClose, "contour angle " + fmt(w0) + " is within 0.05 of the spectrum or the cut");
  const int m = growth_order(f) + 1;
  const Eigen::Index d = op.dim();
  const cmat I = cmat::Identity(d, d);
  // [tau(A)]^-1 = A^-1 (I+A)^2
  const cmat T = Eigen::PartialPivLU<cmat>(op.A).solve(cmat((I + op.A) * (I + op.A)));
  const double tn = std::max(1.0, std::pow(detail::op_norm(T), m));
  auto lift = [&](cmat X) {
    for (int i = 0; i < m; ++i) X = T * X;
    return X;
  };
  std::vector<double> angles{w0};
  const double up = std::min(margin, hi - w0), down = std::min(margin, w0 - lo);
  if (up > 0.0) angles.push_back(w0 + up);
  if (down > 0.0) angles.push_back(w0 - down);
  const std::size_t share = cfg.budget / angles.size();
  CalcResult out{cmat(), Method::hol, 0.0, 0, w0, std::nullopt};
  double spread = 0.0;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    auto r = detail::contour_integral(f, m, op, angles[i], cfg.tol / tn, share);
    out.nodes_used += r.nodes;
    cmat v = lift(r.value);
    if (i == 0) {
      out.value = std::move(v);
      out.err_estimate = tn * r.err;
    } else {
      spread = std::max(spread, (v - out.value).norm());
    }
  }
  out.err_estimate += spread + 64.0 * kEps * tn * out.value.norm();
  return out;
}

// ---------------------------------------------------------------- Hille-Phillips engines

namespace detail {

/// max |e^-tA| over t in {0} and a quarter-decade grid up to horizon; throws when the
/// norm still grows tenfold over the last two decades.
inline double semigroup_sup(const SectorialMatrix& op, double horizon) {
  double sup = 1.0;
  std::vector<double> ts, norms;
  for (double e = -3.0;; e += 0.25) {
    const double t = std::pow(10.0, e);
    ts.push_back(t);
    norms.push_back(op_norm(semigroup(op, t)));
    sup = std::max(sup, norms.back());
    if (t >= horizon && e >= 2.0) break;
  }
  const std::size_t n = norms.size();
  const double before = norms[n - 9];
  if (!std::isfinite(norms.back()) || norms.back() > 10.0 * std::max(before, 1.0))
    throw Error(ErrorCode::SemigroupUnbounded,
                "|e^-tA| grows from " + fmt(before) + " to " + fmt(norms.back()) + " at t = " + fmt(ts.back()));
  return sup;
}

}  // namespace detail

/// sum w e^-tA over atoms plus the density integral, truncated where envelope x sup|T|
/// falls below tol/10.
inline CalcResult eval_hp(const LaplaceRep& g, const SectorialMatrix& op, double tol = 1e-10,
                          std::size_t budget = quad::default_node_budget()) {
  const Eigen::Index d = op.dim();
  for (const auto& dn : g.mu.densities)
    if (!dn.bounded() && !dn.envelope)
      throw Error(ErrorCode::TailNotDominated, "unbounded density without envelope");
  double horizon = 1e6;
  for (const auto& a : g.mu.atoms) horizon = std::max(horizon, a.site);
  double sup = detail::semigroup_sup(op, horizon);
  for (const auto& dn : g.mu.densities)
    if (!dn.bounded()) {
      TailProfile p = TailProfile::of(*dn.envelope).times({sup, 0.0, 0.0, 0.0});
      const double top = p.truncation(std::max(dn.lo, 1.0), 0.1 * tol);
      if (std::isfinite(top) && top > horizon) horizon = top;
    } else {
      horizon = std::max(horizon, dn.hi);
    }
  if (horizon > 1e6) sup = detail::semigroup_sup(op, horizon);
  CalcResult out{cmat::Zero(d, d), Method::hp, 0.0, 0, std::nullopt, std::nullopt};
  double mag = 0.0;
  for (const auto& a : g.mu.atoms) {
    cmat t = a.weight * semigroup(op, a.site);
    mag += t.norm();
    out.value += t;
  }
  out.err_estimate = 64.0 * kEps * mag;
  const std::size_t nd = g.mu.densities.size();
  const TailProfile kb{sup, 0.0, 0.0, 0.0};
  for (const auto& dn : g.mu.densities) {
    const std::size_t left = budget > out.nodes_used ? budget - out.nodes_used : 0;
    auto kern = [&](double t) -> cmat { return semigroup(op, t); };
    auto r = integrate_density<cmat>(dn, kern, kb, tol / double(nd), left, cmat(cmat::Zero(d, d)));
    out.value += r.value;
    out.err_estimate += r.err + 64.0 * kEps * r.value.norm();
    out.nodes_used += r.nodes;
  }
  if (d > 0) out.err_estimate = detail::capped(out.err_estimate, detail::op_norm(out.value), sup * detail::mass_upper_bound(g.mu));
  return out;
}

/// g1(A) + A g2(A) with (g1, g2) the Bernstein split, cross-checked against
/// (I+A) [f/(1+z)](A) when that Laplace rep can be evaluated.
inline CalcResult eval_hp_extended(const BernsteinTriple& f, const SectorialMatrix& op, double tol = 1e-10,
                                   std::size_t budget = quad::default_node_budget()) {
  auto [g1, g2] = bernstein_split(f);
  const double an = std::max(1.0, op.norm);
  CalcResult r1 = eval_hp(g1, op, 0.5 * tol, budget / 2);
  CalcResult r2 = eval_hp(g2, op, 0.5 * tol / an, budget / 2);
  CalcResult out{r1.value + op.A * r2.value, Method::hp_ext, r1.err_estimate + an * r2.err_estimate,
                 r1.nodes_used + r2.nodes_used, std::nullopt, std::nullopt};
  try {
    const cmat I = detail::identity_like(op);
    CalcResult reg = eval_hp(resolvent_regularized(f), op, tol / (1.0 + an), budget);
    const cmat alt = (I + op.A) * reg.value;
    out.cross_check = (alt - out.value).norm();
  } catch (const Error&) {
    out.cross_check.reset();
  }
  return out;
}

// ---------------------------------------------------------------- eigen oracle

/// V diag(f(lambda)) V^-1; refuses eigenbases with condition number above cond_limit.
inline CalcResult eval_eigen_oracle(const std::function<cplx(cplx)>& f, const SectorialMatrix& op,
                                    double cond_limit = 1e6) {
  const Eigen::Index d = op.dim();
  CalcResult out{cmat::Zero(d, d), Method::eigen_oracle, 0.0, 0, std::nullopt, std::nullopt};
  if (d == 0) return out;
  Eigen::ComplexEigenSolver<cmat> es(op.A);
  const cmat V = es.eigenvectors();
  Eigen::JacobiSVD<cmat> svd(V);
  const double smin = svd.singularValues()(d - 1);
  const double cond = smin > 0.0 ? svd.singularValues()(0) / smin : kInf;
  if (!(cond <= cond_limit))
    throw Error(ErrorCode::IllConditionedEigenbasis, "eigenvector condition number " + fmt(cond) + " exceeds " + fmt(cond_limit));
  Eigen::VectorXcd fl(d);
  double fmax = 1.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    fl(i) = f(es.eigenvalues()(i));
    fmax = std::max(fmax, std::abs(fl(i)));
  }
  out.value = V * fl.asDiagonal() * Eigen::PartialPivLU<cmat>(V).inverse();
  out.err_estimate = cond * (1e-12 + 64.0 * kEps) * fmax;
  out.nodes_used = std::size_t(d);
  return out;
}

inline CalcResult eval_eigen_oracle(const FunctionSpec& f, const SectorialMatrix& op, double cond_limit = 1e6) {
  return eval_eigen_oracle([&](cplx z) { return eval(f, z, 1e-14); }, op, cond_limit);
}

// ---------------------------------------------------------------- dispatch

struct EvalOptions {
  double tol = 1e-10;
  std::size_t budget = quad::default_node_budget();
  std::optional<double> omega0;
  double cond_limit = 1e6;
};

/// Runs one engine on f, converting f to the representation it needs.
inline CalcResult evaluate(const FunctionSpec& f, const SectorialMatrix& op, Method m, const EvalOptions& o = {}) {
  auto unsupported = [&](const char* need) {
    return Error(ErrorCode::BadParams, std::string(to_string(m)) + " needs " + need + "; got " + f.kind() +
                                           (f.label.empty() ? "" : " " + f.label));
  };
  switch (m) {
    case Method::stieltjes: {
      auto rep = product_operand(f);
      if (auto* s = std::get_if<StieltjesRep>(&rep)) return eval_stieltjes_bounded(*s, op, o.tol, o.budget);
      throw unsupported("a bounded Stieltjes representation");
    }
    case Method::stieltjes_ext: return eval_stieltjes_extended(as_tclass(f), op, o.tol, o.budget);
    case Method::hirsch: return eval_hirsch(as_tclass(f), op, o.tol, o.budget);
    case Method::hol: return eval_holomorphic(f, op, ContourConfig{o.omega0, o.tol, o.budget});
    case Method::hp:
      if (!f.is<LaplaceRep>()) throw unsupported("a Laplace representation");
      return eval_hp(f.as<LaplaceRep>(), op, o.tol, o.budget);
    case Method::hp_ext: {
      auto t = catalog_bernstein(f);
      if (!t) throw unsupported("a Bernstein triple");
      return eval_hp_extended(*t, op, o.tol, o.budget);
    }
    case Method::eigen_oracle: return eval_eigen_oracle(f, op, o.cond_limit);
  }
  throw unsupported("a known engine");
}

}  // namespace sectorial
