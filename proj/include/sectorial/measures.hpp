#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sectorial/error.hpp"
#include "sectorial/quadrature.hpp"

namespace sectorial {

struct Atom {
  double site;
  cplx weight;
};

/// Certified bound |density(s)| <= coeff * s^-rate (power) or coeff * e^-rate*s (exp)
/// for s >= threshold.
struct Envelope {
  enum class Kind { power, exp };
  Kind kind = Kind::power;
  double coeff = 1.0;
  double rate = 0.0;
  double threshold = 1.0;

  double operator()(double s) const {
    return kind == Kind::power ? coeff * std::pow(s, -rate) : coeff * std::exp(-rate * s);
  }
};

/// Bound coeff * s^-power * e^-exp_rate*s valid for s >= from.
struct TailProfile {
  double coeff = 1.0;
  double power = 0.0;
  double exp_rate = 0.0;
  double from = 0.0;

  static TailProfile of(const Envelope& e) {
    if (e.kind == Envelope::Kind::power) return {e.coeff, e.rate, 0.0, e.threshold};
    return {e.coeff, 0.0, e.rate, e.threshold};
  }

  TailProfile times(const TailProfile& o) const {
    return {coeff * o.coeff, power + o.power, exp_rate + o.exp_rate, std::max(from, o.from)};
  }

  /// Upper bound for the integral over [S, inf); +inf when not certifiable at S.
  double tail(double S) const {
    S = std::max(S, from);
    if (coeff == 0.0) return 0.0;
    if (exp_rate < 0.0) return kInf;
    if (exp_rate == 0.0) {
      if (power <= 1.0) return kInf;
      return coeff * std::pow(S, 1.0 - power) / (power - 1.0);
    }
    if (power >= 0.0) return coeff * std::pow(S, -power) * std::exp(-exp_rate * S) / exp_rate;
    const double m = -power;
    if (S < 2.0 * m / exp_rate) return kInf;
    return 2.0 * coeff * std::pow(S, m) * std::exp(-exp_rate * S) / exp_rate;
  }

  /// Smallest point of the form from*4^k (k >= 0, at least start) with tail below target.
  double truncation(double start, double target) const {
    double S = std::max({start, from, 1.0});
    for (int i = 0; i < 600 && S < 1e300; ++i, S *= 4.0) {
      if (tail(S) < target) return S;
    }
    return kInf;
  }
};

enum class DensityKind { power_law, indicator_poly, exp_decay, tabulated, beta, exp_conv, embedded };

inline const char* to_string(DensityKind k) {
  switch (k) {
    case DensityKind::power_law: return "power_law";
    case DensityKind::indicator_poly: return "indicator_poly";
    case DensityKind::exp_decay: return "exp_decay";
    case DensityKind::tabulated: return "tabulated";
    case DensityKind::beta: return "beta";
    case DensityKind::exp_conv: return "exp_conv";
    case DensityKind::embedded: return "embedded";
  }
  return "?";
}

/// Catalog density on [lo, hi]. Shapes:
///   power_law {p, q}:    s^(p-1) (1+s)^-q
///   indicator_poly {c}:  sum c_j (s-lo)^j
///   exp_decay {c}:       e^-cs
///   tabulated:           piecewise linear through (nodes, values)
///   beta {p, q}:         normalized (s-lo)^(p-1) (hi-s)^(q-1) for finite hi,
///                        (s-lo)^(p-1) / B(p,q) for hi = inf
///   exp_conv:            (e^-t * inner)(s)
///   embedded {n, N, f}:  measure of order n (inner) re-expressed at order N; T-form
///                        (f = 0) int inner(u) (s-u)^(N-n-1) du / B(N-n, n), S-form
///                        (f = 1) int_s inner(u) beta(n, N-n; 0, u)(s) du
struct Density {
  DensityKind kind = DensityKind::indicator_poly;
  std::vector<double> params;
  std::vector<double> nodes, values;
  cplx scale{1.0, 0.0};
  double lo = 0.0;
  double hi = kInf;
  std::optional<Envelope> envelope;
  std::shared_ptr<const Density> inner;

  bool bounded() const { return std::isfinite(hi); }
  bool contains(double s) const { return s >= lo && s <= hi; }

  /// Unit-scale profile; complex only for exp_conv.
  cplx shape(double s) const;
  cplx operator()(double s) const { return scale * shape(s); }

  /// Interior points where the profile has kinks.
  std::vector<double> breakpoints() const {
    std::vector<double> b;
    if (kind == DensityKind::tabulated) {
      for (double x : nodes)
        if (x > lo && x < hi) b.push_back(x);
    } else if ((kind == DensityKind::exp_conv || kind == DensityKind::embedded) && inner) {
      if (inner->bounded() && inner->hi > lo && inner->hi < hi) b.push_back(inner->hi);
      if (inner->lo > lo) b.push_back(inner->lo);
    }
    return b;
  }
};

namespace density {

inline double beta_fn(double p, double q) { return std::exp(std::lgamma(p) + std::lgamma(q) - std::lgamma(p + q)); }

inline Density power_law(double p, double q, cplx scale = 1.0, double lo = 0.0, double hi = kInf) {
  Density d;
  d.kind = DensityKind::power_law;
  d.params = {p, q};
  d.scale = scale;
  d.lo = lo;
  d.hi = hi;
  if (!std::isfinite(hi)) d.envelope = Envelope{Envelope::Kind::power, std::abs(scale), 1.0 + q - p, std::max(1.0, lo)};
  return d;
}

inline Density indicator_poly(std::vector<double> coeffs, double lo, double hi, cplx scale = 1.0) {
  Density d;
  d.kind = DensityKind::indicator_poly;
  d.params = std::move(coeffs);
  d.scale = scale;
  d.lo = lo;
  d.hi = hi;
  return d;
}

inline Density lebesgue(double lo, double hi, cplx scale = 1.0) { return indicator_poly({1.0}, lo, hi, scale); }

inline Density exp_decay(double c, cplx scale = 1.0, double lo = 0.0, double hi = kInf) {
  Density d;
  d.kind = DensityKind::exp_decay;
  d.params = {c};
  d.scale = scale;
  d.lo = lo;
  d.hi = hi;
  if (!std::isfinite(hi)) d.envelope = Envelope{Envelope::Kind::exp, std::abs(scale), c, lo};
  return d;
}

inline Density tabulated(std::vector<double> nodes, std::vector<double> values, cplx scale = 1.0) {
  Density d;
  d.kind = DensityKind::tabulated;
  d.scale = scale;
  if (!nodes.empty()) {
    d.lo = nodes.front();
    d.hi = nodes.back();
  }
  d.nodes = std::move(nodes);
  d.values = std::move(values);
  return d;
}

inline Density beta(int p, int q, double lo, double hi, cplx scale = 1.0) {
  Density d;
  d.kind = DensityKind::beta;
  d.params = {double(p), double(q)};
  d.scale = scale;
  d.lo = lo;
  d.hi = hi;
  if (!std::isfinite(hi))
    d.envelope = Envelope{Envelope::Kind::power, std::abs(scale) / beta_fn(p, q), 1.0 - p, std::max(1.0, lo)};
  return d;
}

}  // namespace density

inline cplx Density::shape(double s) const {
  if (!(s >= lo && s <= hi)) return 0.0;
  switch (kind) {
    case DensityKind::power_law:
      return std::pow(s, params[0] - 1.0) * std::pow(1.0 + s, -params[1]);
    case DensityKind::indicator_poly: {
      double x = s - lo, acc = 0.0;
      for (std::size_t j = params.size(); j-- > 0;) acc = acc * x + params[j];
      return acc;
    }
    case DensityKind::exp_decay:
      return std::exp(-params[0] * s);
    case DensityKind::tabulated: {
      if (nodes.size() < 2) return 0.0;
      auto it = std::upper_bound(nodes.begin(), nodes.end(), s);
      std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - nodes.begin(), 1), nodes.size() - 1);
      double t = (s - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
      return values[i - 1] + t * (values[i] - values[i - 1]);
    }
    case DensityKind::beta: {
      const double p = params[0], q = params[1];
      if (!std::isfinite(hi)) return std::pow(s - lo, p - 1.0) / density::beta_fn(p, q);
      const double L = hi - lo, x = (s - lo) / L;
      return std::pow(x, p - 1.0) * std::pow(1.0 - x, q - 1.0) / (L * density::beta_fn(p, q));
    }
    case DensityKind::exp_conv: {
      const Density& in = *inner;
      const double top = std::min(s, in.hi);
      if (!(top > in.lo)) return 0.0;
      auto g = [&](double sig) -> cplx { return std::exp(-(s - sig)) * in(sig); };
      return quad::halfline<cplx>(g, in.lo, top, 1e-14, 200000, cplx{0.0}).value;
    }
    case DensityKind::embedded: {
      const Density& in = *inner;
      const double top = std::min(s, in.hi);
      if (params[2] == 0.0 && !(top > in.lo)) return 0.0;
      const int n = int(params[0]), N = int(params[1]);
      if (params[2] != 0.0) {
        // (1+zu)^-n = int_0^u beta(n, N-n; 0, u)(x) (1+zx)^-N dx
        const double from = std::max(s, in.lo);
        if (!(in.hi > from)) return 0.0;
        auto g = [&](double u) -> cplx {
          return std::pow(s / u, n - 1) * std::pow(1.0 - s / u, N - n - 1) / u * in(u);
        };
        return quad::halfline<cplx>(g, from, in.hi, 1e-14, 200000, cplx{0.0}).value / density::beta_fn(n, N - n);
      }
      auto g = [&](double u) -> cplx { return std::pow(s - u, N - n - 1) * in(u); };
      return quad::halfline<cplx>(g, in.lo, top, 1e-14, 200000, cplx{0.0}).value / density::beta_fn(N - n, n);
    }
  }
  return 0.0;
}

struct RadonMeasure {
  std::vector<Atom> atoms;
  std::vector<Density> densities;

  static RadonMeasure dirac(double site, cplx weight = 1.0) { return RadonMeasure{{{site, weight}}, {}}; }
  static RadonMeasure of(Density d) { return RadonMeasure{{}, {std::move(d)}}; }

  bool atomic() const { return densities.empty(); }
  bool empty() const { return atoms.empty() && densities.empty(); }

  RadonMeasure& operator+=(const RadonMeasure& o) {
    atoms.insert(atoms.end(), o.atoms.begin(), o.atoms.end());
    densities.insert(densities.end(), o.densities.begin(), o.densities.end());
    return *this;
  }
};

inline RadonMeasure operator+(RadonMeasure a, const RadonMeasure& b) { return a += b; }

inline Density scaled(Density d, cplx c) {
  d.scale *= c;
  if (d.envelope) d.envelope->coeff *= std::abs(c);
  return d;
}

inline RadonMeasure operator*(cplx c, RadonMeasure m) {
  for (auto& a : m.atoms) a.weight *= c;
  for (auto& d : m.densities) d = scaled(d, c);
  return m;
}

/// Restriction to [a, inf) or to [0, a) of one density (kind and shape preserved).
inline Density restricted(Density d, double a, double b) {
  d.lo = std::max(d.lo, a);
  d.hi = std::min(d.hi, b);
  if (d.bounded()) d.envelope.reset();
  return d;
}

namespace density {

/// e^-t * inner. The envelope follows from splitting the convolution at s/2.
inline Density exp_conv(const Density& in, double inner_tv) {
  Density d;
  d.kind = DensityKind::exp_conv;
  d.lo = in.lo;
  d.hi = kInf;
  d.inner = std::make_shared<const Density>(in);
  if (in.bounded()) {
    d.envelope = Envelope{Envelope::Kind::exp, std::exp(in.hi) * inner_tv, 1.0, in.hi};
  } else if (in.envelope && in.envelope->kind == Envelope::Kind::exp) {
    const Envelope& e = *in.envelope;
    d.envelope = Envelope{Envelope::Kind::exp, inner_tv + e.coeff, 0.5 * std::min(1.0, e.rate), 2.0 * e.threshold};
  } else if (in.envelope) {
    const Envelope& e = *in.envelope;
    const double c = 2.0 * e.coeff * std::pow(2.0, e.rate);
    double S = std::max(2.0 * e.threshold, 1.0);
    while (inner_tv * std::exp(-0.5 * S) > 0.5 * c * std::pow(S, -e.rate)) S *= 2.0;
    d.envelope = Envelope{Envelope::Kind::power, c, e.rate, S};
  }
  return d;
}

}  // namespace density

/// Structural checks plus sampled envelope dominance.
inline void validate(const Density& d) {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidMeasure, m); };
  if (!(d.lo >= 0.0) || !(d.hi > d.lo)) bad("density support must satisfy 0 <= lo < hi");
  switch (d.kind) {
    case DensityKind::power_law:
      if (d.params.size() != 2) bad("power_law needs {p, q}");
      break;
    case DensityKind::indicator_poly:
      if (!d.bounded() || d.params.empty()) bad("indicator_poly needs bounded support and coefficients");
      break;
    case DensityKind::exp_decay:
      if (d.params.size() != 1) bad("exp_decay needs {c}");
      break;
    case DensityKind::tabulated:
      if (d.nodes.size() < 2 || d.nodes.size() != d.values.size()) bad("tabulated needs matching nodes/values");
      if (!std::is_sorted(d.nodes.begin(), d.nodes.end())) bad("tabulated nodes must increase");
      break;
    case DensityKind::beta:
      if (d.params.size() != 2 || d.params[0] < 1 || d.params[1] < 1 || d.params[0] != std::floor(d.params[0]) ||
          d.params[1] != std::floor(d.params[1]))
        bad("beta needs integer p, q >= 1");
      break;
    case DensityKind::exp_conv:
      if (!d.inner) bad("exp_conv needs an inner density");
      validate(*d.inner);
      break;
    case DensityKind::embedded:
      if (!d.inner || d.params.size() != 3 || !(d.params[0] >= 1) || !(d.params[1] > d.params[0]))
        bad("embedded needs an inner density and orders 1 <= n < N");
      validate(*d.inner);
      break;
  }
  if (!d.bounded() && d.envelope) {
    const Envelope& e = *d.envelope;
    const double s0 = std::max(e.threshold, d.lo);
    const bool costly = d.kind == DensityKind::exp_conv || d.kind == DensityKind::embedded;
    const int samples = costly ? 24 : 97;
    for (int k = 0; k < samples; ++k) {
      const double s = s0 * std::pow(10.0, k / 6.0);
      if (std::abs(d(s)) > e(s) * (1.0 + 1e-9) + 1e-300)
        throw Error(ErrorCode::TailNotDominated, "envelope fails to dominate the density at s=" + fmt(s));
    }
  }
}

inline void validate(const RadonMeasure& m) {
  for (const auto& a : m.atoms)
    if (!(a.site >= 0.0) || !std::isfinite(a.site) || !std::isfinite(std::abs(a.weight)))
      throw Error(ErrorCode::InvalidMeasure, "atom sites must be finite and nonnegative");
  for (const auto& d : m.densities) validate(d);
}

/// Integral kernels k(s) for measure integration.
struct Kernel {
  enum class Kind { stieltjes, tclass, exp, classic };
  Kind kind = Kind::stieltjes;
  int n = 1;
  double alpha = 1.0;
  cplx z{1.0, 0.0};

  static Kernel stieltjes(int n, cplx z) { return {Kind::stieltjes, n, double(n), z}; }
  static Kernel tclass(int n, cplx z) { return {Kind::tclass, n, double(n), z}; }
  static Kernel exp(cplx z) { return {Kind::exp, 0, 0.0, z}; }
  static Kernel classic(double alpha, cplx z) { return {Kind::classic, 0, alpha, z}; }

  cplx operator()(double s) const {
    switch (kind) {
      case Kind::stieltjes: return std::pow(1.0 + z * s, -n);
      case Kind::tclass: return std::pow(z / (1.0 + z * s), n);
      case Kind::exp: return std::exp(-s * z);
      case Kind::classic: return std::pow(z + s, -alpha);
    }
    return 0.0;
  }

  /// Point s >= 0 where the kernel is singular, if any.
  std::optional<double> pole() const {
    if (kind == Kind::exp) return std::nullopt;
    if (kind == Kind::classic) {
      if (z.imag() == 0.0 && z.real() <= 0.0) return -z.real();
      return std::nullopt;
    }
    if (z.imag() == 0.0 && z.real() < 0.0) return -1.0 / z.real();
    return std::nullopt;
  }

  TailProfile bound() const {
    const double r = std::abs(z);
    const double kappa = z.real() >= 0.0 ? 1.0 : std::abs(std::sin(std::arg(z)));
    switch (kind) {
      case Kind::stieltjes:
        if (r == 0.0) return {1.0, 0.0, 0.0, 0.0};
        if (kappa == 0.0) return {1.0, 0.0, -1.0, 0.0};
        return {std::pow(r * kappa, -n), double(n), 0.0, 0.0};
      case Kind::tclass:
        if (kappa == 0.0) return {1.0, 0.0, -1.0, 0.0};
        return {std::pow(kappa, -n), double(n), 0.0, 0.0};
      case Kind::exp:
        return {1.0, 0.0, z.real(), 0.0};
      case Kind::classic:
        return {std::pow(2.0, alpha), alpha, 0.0, 2.0 * r};
    }
    return {};
  }
};

struct Integral {
  cplx value{0.0};
  double err = 0.0;
  std::size_t nodes = 0;
};

namespace detail {

/// Integer power of a complex number by repeated squaring (n may be negative).
inline cplx ipow(cplx x, int n) {
  if (n < 0) return 1.0 / ipow(x, -n);
  cplx r = 1.0;
  while (n) {
    if (n & 1) r *= x;
    x *= x;
    n >>= 1;
  }
  return r;
}

inline bool is_int(double x) { return x == std::floor(x); }

/// Closed-form integrals of catalog densities against kernels, where available.
inline std::optional<cplx> closed_form(const Density& d, const Kernel& k);

}  // namespace detail

/// Quadrature of s -> density(s) * kernel(s) over the density's support. Unbounded
/// supports are truncated where envelope x kernel bound certifies the tail < tol/10.
template <class V, class K>
quad::Result<V> integrate_density(const Density& d, K&& kernel, const TailProfile& kb, double tol,
                                  std::size_t budget, const V& zero) {
  double top = d.hi, tail_err = 0.0;
  if (!d.bounded()) {
    if (!d.envelope) throw Error(ErrorCode::TailNotDominated, "unbounded density without envelope");
    TailProfile p = TailProfile::of(*d.envelope).times(kb);
    top = p.truncation(std::max(d.lo, 1.0), 0.1 * tol);
    if (!std::isfinite(top)) throw Error(ErrorCode::TailNotDominated, "envelope x kernel bound is not integrable");
    tail_err = p.tail(top);
  }
  std::vector<double> cuts{d.lo};
  for (double b : d.breakpoints())
    if (b < top) cuts.push_back(b);
  cuts.push_back(top);
  auto g = [&](double s) -> V { return d(s) * kernel(s); };
  quad::Result<V> out{zero, tail_err, 0};
  const double piece_tol = 0.9 * tol / double(cuts.size() - 1);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    std::size_t left = budget > out.nodes ? budget - out.nodes : 0;
    auto r = quad::halfline<V>(g, cuts[i], cuts[i + 1], piece_tol, left, zero);
    out.value += r.value;
    out.err += r.err;
    out.nodes += r.nodes;
  }
  return out;
}

inline Integral integrate_kernel(const RadonMeasure& mu, const Kernel& k, double tol,
                                 std::size_t budget = quad::default_node_budget()) {
  Integral out;
  const auto pole = k.pole();
  double atom_mag = 0.0;
  for (const auto& a : mu.atoms) {
    if (pole && std::abs(a.site - *pole) <= 1e-14 * std::max(1.0, *pole))
      throw Error(ErrorCode::KernelSingular, "kernel singular at atom site " + fmt(a.site));
    cplx v = a.weight * k(a.site);
    out.value += v;
    atom_mag += std::abs(v);
  }
  out.err = 4.0 * kEps * atom_mag;
  std::vector<const Density*> quad_parts;
  for (const auto& d : mu.densities) {
    if (pole && d.contains(*pole)) throw Error(ErrorCode::KernelSingular, "kernel pole inside density support");
    if (auto c = detail::closed_form(d, k)) {
      out.value += *c;
      out.err += 16.0 * kEps * std::abs(*c);
    } else {
      quad_parts.push_back(&d);
    }
  }
  const TailProfile kb = k.bound();
  for (const Density* d : quad_parts) {
    std::size_t left = budget > out.nodes ? budget - out.nodes : 0;
    auto r = integrate_density<cplx>(*d, k, kb, tol / double(quad_parts.size()), left, cplx{0.0});
    out.value += r.value;
    out.err += r.err;
    out.nodes += r.nodes;
  }
  return out;
}

inline cplx laplace_transform(const RadonMeasure& mu, cplx z, double tol) {
  return integrate_kernel(mu, Kernel::exp(z), tol).value;
}

namespace detail {

inline std::optional<cplx> closed_form(const Density& d, const Kernel& k) {
  const cplx z = k.z;
  switch (d.kind) {
    case DensityKind::power_law: {
      const double p = d.params[0], q = d.params[1];
      if (d.lo != 0.0 || d.bounded() || q != 0.0 || !(p > 0.0) || z == 0.0) return std::nullopt;
      if (k.kind == Kernel::Kind::stieltjes && p < k.n)
        return d.scale * std::pow(z, -p) * density::beta_fn(p, k.n - p);
      if (k.kind == Kernel::Kind::tclass && p < k.n)
        return d.scale * std::pow(z, k.n - p) * density::beta_fn(p, k.n - p);
      if (k.kind == Kernel::Kind::classic && p < k.alpha)
        return d.scale * std::pow(z, p - k.alpha) * density::beta_fn(p, k.alpha - p);
      if (k.kind == Kernel::Kind::exp && z.real() > 0.0) return d.scale * std::tgamma(p) * std::pow(z, -p);
      return std::nullopt;
    }
    case DensityKind::beta: {
      const int p = int(d.params[0]), q = int(d.params[1]);
      if ((k.kind != Kernel::Kind::stieltjes && k.kind != Kernel::Kind::tclass) || k.n != p + q) return std::nullopt;
      cplx v;
      if (d.bounded()) {
        v = ipow(1.0 + z * d.lo, -q) * ipow(1.0 + z * d.hi, -p);
        if (k.kind == Kernel::Kind::tclass) v *= ipow(z, p + q);
      } else {
        if (z == 0.0) return std::nullopt;
        v = ipow(1.0 + z * d.lo, -q) * (k.kind == Kernel::Kind::tclass ? ipow(z, q) : ipow(z, -p));
      }
      return d.scale * v;
    }
    case DensityKind::indicator_poly: {
      const bool tf = k.kind == Kernel::Kind::tclass;
      if (d.params.size() != 1 || (!tf && k.kind != Kernel::Kind::stieltjes) || z == 0.0) return std::nullopt;
      const int n = k.n;
      cplx v;
      if (!d.bounded()) {
        if (n < 2) return std::nullopt;
        v = ipow(1.0 + z * d.lo, 1 - n) / (double(n - 1) * z);
      } else {
        if (std::abs(z) * (d.hi - d.lo) < 1e-3) return std::nullopt;
        if (n == 1)
          v = (std::log(1.0 + z * d.hi) - std::log(1.0 + z * d.lo)) / z;
        else
          v = (ipow(1.0 + z * d.lo, 1 - n) - ipow(1.0 + z * d.hi, 1 - n)) / (double(n - 1) * z);
      }
      if (tf) v *= ipow(z, n);
      return d.scale * d.params[0] * v;
    }
    case DensityKind::exp_decay: {
      if (k.kind != Kernel::Kind::exp) return std::nullopt;
      const cplx w = d.params[0] + z;
      if (!d.bounded()) {
        if (!(w.real() > 0.0)) return std::nullopt;
        return d.scale * std::exp(-w * d.lo) / w;
      }
      const double L = d.hi - d.lo;
      const cplx x = w * L;
      cplx frac;
      if (std::abs(x) < 1e-3)
        frac = L * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0);
      else
        frac = (1.0 - std::exp(-x)) / w;
      return d.scale * std::exp(-w * d.lo) * frac;
    }
    case DensityKind::exp_conv: {
      if (k.kind != Kernel::Kind::exp || !d.inner) return std::nullopt;
      const cplx inner = integrate_kernel(RadonMeasure::of(*d.inner), k, 1e-13).value;
      return d.scale * inner / (1.0 + z);
    }
    case DensityKind::embedded: {
      const bool tf = d.params[2] == 0.0;
      if (k.kind != (tf ? Kernel::Kind::tclass : Kernel::Kind::stieltjes) || k.n != int(d.params[1]) || !d.inner)
        return std::nullopt;
      const int n = int(d.params[0]);
      const Kernel native = tf ? Kernel::tclass(n, z) : Kernel::stieltjes(n, z);
      const cplx inner = integrate_kernel(RadonMeasure::of(*d.inner), native, 1e-13).value;
      return d.scale * inner;
    }
    default:
      return std::nullopt;
  }
}

/// Integral of w(s) |sum of densities|(s) over the union of supports, where w is a
/// nonnegative weight bounded by the profile wb.
template <class W>
Integral integrate_abs(const std::vector<Density>& ds, W&& w, const TailProfile& wb, double tol) {
  Integral out;
  if (ds.empty()) return out;
  double lo = kInf, top = 0.0;
  std::vector<double> cuts;
  for (const auto& d : ds) {
    lo = std::min(lo, d.lo);
    cuts.push_back(d.lo);
    for (double b : d.breakpoints()) cuts.push_back(b);
    if (d.bounded()) {
      cuts.push_back(d.hi);
      top = std::max(top, d.hi);
      continue;
    }
    if (!d.envelope) throw Error(ErrorCode::TailNotDominated, "unbounded density without envelope");
    TailProfile p = TailProfile::of(*d.envelope).times(wb);
    double S = p.truncation(std::max(d.lo, 1.0), 0.1 * tol / double(ds.size()));
    if (!std::isfinite(S)) {
      out.value = kInf;
      out.err = 0.0;
      return out;
    }
    top = std::max(top, S);
  }
  for (const auto& d : ds)
    if (!d.bounded()) out.err += TailProfile::of(*d.envelope).times(wb).tail(top);
  cuts.push_back(top);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [&](double c) { return c < lo || c > top; }), cuts.end());
  auto g = [&](double s) -> double {
    cplx acc = 0.0;
    for (const auto& d : ds) acc += d(s);
    return w(s) * std::abs(acc);
  };
  const double piece_tol = 0.9 * tol / double(std::max<std::size_t>(1, cuts.size() - 1));
  const std::size_t budget = quad::default_node_budget() * 4;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    auto g2 = [&](double s) -> cplx { return g(s); };
    auto r = quad::halfline<cplx>(g2, cuts[i], cuts[i + 1], piece_tol, budget, cplx{0.0});
    out.value += r.value;
    out.err += r.err;
    out.nodes += r.nodes;
  }
  return out;
}

/// Sum of |weight| after merging atoms at identical sites.
inline double atom_variation(std::vector<Atom> atoms) {
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.site < b.site; });
  double tv = 0.0;
  for (std::size_t i = 0; i < atoms.size();) {
    cplx w = 0.0;
    std::size_t j = i;
    for (; j < atoms.size() && atoms[j].site == atoms[i].site; ++j) w += atoms[j].weight;
    tv += std::abs(w);
    i = j;
  }
  return tv;
}

}  // namespace detail

struct Variation {
  double tv = 0.0;
  double err = 0.0;
};

/// |mu|([0, inf)); +inf when the envelope certifies divergence.
inline Variation total_variation(const RadonMeasure& mu, double tol) {
  Variation v{detail::atom_variation(mu.atoms), 0.0};
  for (const auto& d : mu.densities)
    if (d.kind == DensityKind::power_law && d.lo == 0.0 && d.params[0] <= 0.0) return {kInf, 0.0};
  auto r = detail::integrate_abs(mu.densities, [](double) { return 1.0; }, TailProfile{1.0, 0.0, 0.0, 0.0}, tol);
  v.tv += r.value.real();
  v.err = r.err;
  return v;
}

struct Integrability {
  bool integrable = false;
  double bound = kInf;
};

/// Whether the integral of (1+s)^-alpha against |mu| is finite, with an upper bound.
inline Integrability check_integrability(const RadonMeasure& mu, double alpha) {
  Integrability out;
  for (const auto& d : mu.densities) {
    if (d.kind == DensityKind::power_law && d.lo == 0.0 && d.params[0] <= 0.0) return out;
    if (!d.bounded()) {
      if (!d.envelope) throw Error(ErrorCode::TailNotDominated, "unbounded density without envelope");
      TailProfile p = TailProfile::of(*d.envelope).times({1.0, alpha, 0.0, 0.0});
      if (!std::isfinite(p.tail(std::max({p.from, d.lo, 1.0}) * 1e6))) return out;
    }
  }
  double atoms = 0.0;
  for (const auto& a : mu.atoms) atoms += std::abs(a.weight) * std::pow(1.0 + a.site, -alpha);
  auto r = detail::integrate_abs(
      mu.densities, [alpha](double s) { return std::pow(1.0 + s, -alpha); }, TailProfile{1.0, alpha, 0.0, 0.0},
      1e-9);
  out.integrable = std::isfinite(r.value.real());
  out.bound = atoms + r.value.real() + r.err;
  return out;
}

/// Which kernel family an atomization is meant for; this decides how the mass beyond
/// the last panel is folded into an endpoint atom.
enum class AtomForm { stieltjes, tclass };

namespace density {

inline double mass_bound(const Density& in) {
  if (in.kind == DensityKind::beta && in.bounded()) return std::abs(in.scale);
  return total_variation(RadonMeasure::of(in), 1e-10).tv;
}

/// Density of order n re-expressed at order N > n (same function). In the T-form, power
/// laws from the origin, T-poles and earlier embeddings stay closed; anything else is
/// wrapped.
inline Density embedded(const Density& in, int n, int N, AtomForm form = AtomForm::tclass) {
  if (N == n) return in;
  if (N < n) throw Error(ErrorCode::BadParams, "embedding must raise the order");
  const bool tf = form == AtomForm::tclass;
  if (!tf) {
    Density d;
    d.kind = DensityKind::embedded;
    d.params = {double(n), double(N), 1.0};
    d.lo = 0.0;
    d.hi = in.hi;
    d.inner = std::make_shared<const Density>(in.kind == DensityKind::embedded ? *in.inner : in);
    if (in.kind == DensityKind::embedded) {
      d.params[0] = in.params[0];
      d.scale = in.scale;
    }
    return d;
  }
  if (in.kind == DensityKind::power_law && in.lo == 0.0 && !in.bounded() && in.params[1] == 0.0) {
    const double p = in.params[0];
    return power_law(p + N - n, 0.0, in.scale * beta_fn(p, N - n) / beta_fn(N - n, n));
  }
  if (in.kind == DensityKind::beta && !in.bounded() && int(in.params[0] + in.params[1]) == n)
    return beta(int(in.params[0]) + N - n, int(in.params[1]), in.lo, kInf, in.scale);
  if (in.kind == DensityKind::embedded) {
    Density d = in;
    d.params[1] = N;
    d.envelope.reset();
    if (d.inner->bounded()) {
      const double tv = std::abs(d.scale) * mass_bound(*d.inner);
      d.envelope = Envelope{Envelope::Kind::power, tv / beta_fn(N - d.params[0], d.params[0]), 1.0 - (N - d.params[0]),
                            std::max(1.0, d.inner->hi)};
    }
    return d;
  }
  Density d;
  d.kind = DensityKind::embedded;
  d.params = {double(n), double(N), 0.0};
  d.lo = in.lo;
  d.hi = kInf;
  d.inner = std::make_shared<const Density>(in);
  if (in.bounded()) {
    const double tv = mass_bound(in);
    d.envelope = Envelope{Envelope::Kind::power, tv / beta_fn(N - n, n), 1.0 - (N - n), std::max(1.0, in.hi)};
  }
  return d;
}

}  // namespace density


namespace detail {

inline std::vector<double> panel_cuts(const Density& d, double a, double b) {
  std::vector<double> c{a, b};
  for (int k = -28; k <= 28; ++k) {
    double x = std::pow(10.0, 0.5 * k);
    if (x > a && x < b) c.push_back(x);
  }
  for (double x : d.breakpoints())
    if (x > a && x < b) c.push_back(x);
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

}  // namespace detail

inline constexpr double kAtomHead = 1e-14;
inline constexpr double kAtomTail = 1e14;

/// Replaces a density by Gauss-Legendre atoms on half-decade panels between 1e-14 and
/// 1e14. Mass below the first panel goes to an atom at lo; the far tail goes to an atom
/// at 1e14 (for the T-form weighted by s^-order so the kernel's decay is matched).
inline std::vector<Atom> atomize(const Density& d, AtomForm form, int order, int nodes_per_panel,
                                 std::size_t budget) {
  if (d.kind == DensityKind::exp_conv || d.kind == DensityKind::embedded)
    throw Error(ErrorCode::Unsupported, std::string(to_string(d.kind)) + " densities are not atomized");
  const quad::Rule& rule = nodes_per_panel >= 20 ? quad::gl20() : quad::gl10();
  std::vector<Atom> out;
  const double a = std::max(d.lo, std::min(kAtomHead, d.hi));
  const double b = std::min(d.hi, kAtomTail);
  if (a > d.lo) {
    cplx mass;
    if (d.kind == DensityKind::power_law && d.lo == 0.0) {
      mass = d.scale * std::pow(a, d.params[0]) / d.params[0];
    } else {
      const double h = 0.5 * (a - d.lo), m = 0.5 * (a + d.lo);
      for (std::size_t i = 0; i < rule.x.size(); ++i) mass += rule.w[i] * h * d(m + h * rule.x[i]);
    }
    out.push_back({d.lo, mass});
  }
  if (b > a) {
    auto cuts = detail::panel_cuts(d, a, b);
    for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
      const double h = 0.5 * (cuts[j + 1] - cuts[j]), m = 0.5 * (cuts[j + 1] + cuts[j]);
      for (std::size_t i = 0; i < rule.x.size(); ++i) {
        const double s = m + h * rule.x[i];
        out.push_back({s, rule.w[i] * h * d(s)});
      }
    }
  }
  if (d.hi > b) {
    // mass or s^-order moment beyond b, from the density's asymptotics
    const double E = b;
    cplx tail;
    const int pw = form == AtomForm::tclass ? order : 0;
    switch (d.kind) {
      case DensityKind::power_law: {
        const double ex = d.params[0] - d.params[1] - pw;
        if (!(ex < 0.0)) throw Error(ErrorCode::TailNotDominated, "density tail not integrable against the kernel");
        tail = d.scale * std::pow(E, ex) / (-ex) * std::pow(E, pw);
        break;
      }
      case DensityKind::exp_decay:
        tail = d.scale * std::exp(-d.params[0] * E) / d.params[0];
        break;
      default:
        throw Error(ErrorCode::Unsupported, std::string("no tail model for ") + to_string(d.kind) + " densities");
    }
    out.push_back({E, tail});
  }
  if (out.size() > budget)
    throw Error(ErrorCode::AtomizationBudgetExceeded,
                std::to_string(out.size()) + " atoms exceed budget " + std::to_string(budget));
  return out;
}

}  // namespace sectorial
