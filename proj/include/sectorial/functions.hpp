#pragma once

#include <cmath>
#include <complex>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sectorial/measures.hpp"
#include "sectorial/poles.hpp"

namespace sectorial {

/// f(z) = int nu(ds) / (1+zs)^order
struct StieltjesRep {
  int order = 1;
  RadonMeasure nu;
};

/// f(z) = a + int z^order mu(ds) / (1+zs)^order
struct TclassRep {
  int order = 1;
  cplx a{0.0};
  RadonMeasure mu;
};

/// f(z) = a + b z + int (1 - e^-sz) mu(ds)
struct BernsteinTriple {
  double a = 0.0;
  double b = 0.0;
  RadonMeasure mu;
};

/// g(z) = int e^-sz mu(ds)
struct LaplaceRep {
  RadonMeasure mu;
};

enum class Builtin { power, log1p, one_minus_exp, rational, constant, identity, tilde };

inline const char* to_string(Builtin b) {
  switch (b) {
    case Builtin::power: return "power";
    case Builtin::log1p: return "log1p";
    case Builtin::one_minus_exp: return "one_minus_exp";
    case Builtin::rational: return "rational";
    case Builtin::constant: return "constant";
    case Builtin::identity: return "identity";
    case Builtin::tilde: return "tilde";
  }
  return "?";
}

struct FunctionSpec;

/// Builtin closed forms. rational params: [c0_re, c0_im, (site, order, c_re, c_im)...]
/// meaning c0 + sum c / (1+z site)^order. tilde evaluates 1/inner(1/z).
struct ClosedForm {
  Builtin id = Builtin::identity;
  std::vector<double> params;
  std::shared_ptr<const FunctionSpec> inner;
};

struct FunctionSpec {
  std::variant<StieltjesRep, TclassRep, BernsteinTriple, LaplaceRep, ClosedForm> rep;
  std::string label;

  template <class T>
  bool is() const {
    return std::holds_alternative<T>(rep);
  }
  template <class T>
  const T& as() const {
    return std::get<T>(rep);
  }
  const char* kind() const {
    static const char* names[] = {"stieltjes", "tclass", "bernstein", "laplace", "closed"};
    return names[rep.index()];
  }
};

/// Settings for turning densities into atoms before pole algebra.
struct AtomizeOptions {
  int nodes_per_panel = 20;
  std::size_t atomization_nodes = 4000;
};

namespace detail {

inline bool on_cut(cplx z) { return z.imag() == 0.0 && z.real() < 0.0; }

inline cplx one_minus_exp(cplx w) {
  if (std::abs(w) < 1e-4) return w * (1.0 - w * (0.5 - w / 6.0));
  return 1.0 - std::exp(-w);
}

}  // namespace detail

cplx eval(const FunctionSpec& f, cplx z, double tol = 1e-12);

inline cplx eval(const StieltjesRep& f, cplx z, double tol = 1e-12) {
  if (detail::on_cut(z)) throw Error(ErrorCode::DomainViolation, "z on the negative axis");
  return integrate_kernel(f.nu, Kernel::stieltjes(f.order, z), tol).value;
}

inline cplx eval(const TclassRep& f, cplx z, double tol = 1e-12) {
  if (detail::on_cut(z)) throw Error(ErrorCode::DomainViolation, "z on the negative axis");
  if (z == 0.0) return f.a;
  return f.a + integrate_kernel(f.mu, Kernel::tclass(f.order, z), tol).value;
}

inline cplx eval(const BernsteinTriple& f, cplx z, double tol = 1e-12) {
  if (z.real() < 0.0) throw Error(ErrorCode::DomainViolation, "Bernstein functions need Re z >= 0");
  cplx v = f.a + f.b * z;
  for (const auto& at : f.mu.atoms) v += at.weight * detail::one_minus_exp(at.site * z);
  const std::size_t n = f.mu.densities.size();
  for (const auto& d : f.mu.densities) {
    auto k = [z](double s) { return detail::one_minus_exp(s * z); };
    v += integrate_density<cplx>(d, k, TailProfile{2.0, 0.0, 0.0, 0.0}, tol / double(n), quad::default_node_budget(),
                                 cplx{0.0})
             .value;
  }
  return v;
}

inline bool compact_support(const RadonMeasure& m) {
  for (const auto& d : m.densities)
    if (!d.bounded()) return false;
  return true;
}

inline cplx eval(const LaplaceRep& g, cplx z, double tol = 1e-12) {
  if (z.real() < 0.0 && !compact_support(g.mu))
    throw Error(ErrorCode::DomainViolation, "Re z < 0 needs a compactly supported measure");
  return laplace_transform(g.mu, z, tol);
}

inline cplx eval(const ClosedForm& f, cplx z, double tol = 1e-12) {
  switch (f.id) {
    case Builtin::power:
      if (detail::on_cut(z)) throw Error(ErrorCode::DomainViolation, "z on the negative axis");
      if (z == 0.0) return 0.0;
      return std::pow(z, f.params.at(0));
    case Builtin::log1p:
      if (detail::on_cut(z)) throw Error(ErrorCode::DomainViolation, "z on the negative axis");
      return std::log(1.0 + z);
    case Builtin::one_minus_exp:
      return detail::one_minus_exp(z);
    case Builtin::rational: {
      if (detail::on_cut(z)) throw Error(ErrorCode::DomainViolation, "z on the negative axis");
      const auto& p = f.params;
      cplx v(p.at(0), p.at(1));
      for (std::size_t i = 2; i + 3 < p.size(); i += 4)
        v += cplx(p[i + 2], p[i + 3]) * detail::ipow(1.0 + z * p[i], -int(p[i + 1]));
      return v;
    }
    case Builtin::constant:
      return f.params.empty() ? cplx(1.0) : cplx(f.params[0], f.params.size() > 1 ? f.params[1] : 0.0);
    case Builtin::identity:
      return z;
    case Builtin::tilde:
      if (z == 0.0 || detail::on_cut(z)) throw Error(ErrorCode::DomainViolation, "tilde transform needs z off (-inf,0]");
      return 1.0 / eval(*f.inner, 1.0 / z, tol);
  }
  return 0.0;
}

inline cplx eval(const FunctionSpec& f, cplx z, double tol) {
  return std::visit([&](const auto& r) { return eval(r, z, tol); }, f.rep);
}

// ---------------------------------------------------------------- pole sums

/// Pole-sum form of a Stieltjes rep. Atoms and beta parts of matching order are exact;
/// other densities are atomized.
inline PoleSum to_poles(const StieltjesRep& f, const AtomizeOptions& opt = {}) {
  using F = PoleSum::Form;
  PoleSum p(F::stieltjes);
  for (const auto& a : f.nu.atoms) p.add(a.site, f.order, a.weight);
  std::size_t used = 0;
  for (const auto& d : f.nu.densities) {
    if (d.kind == DensityKind::beta && d.bounded() && int(d.params[0] + d.params[1]) == f.order) {
      const int pp = int(d.params[0]), qq = int(d.params[1]);
      if (d.lo == 0.0)
        p.add(d.hi, pp, d.scale);
      else
        p.add(multiply(pole(F::stieltjes, d.lo, qq, d.scale), pole(F::stieltjes, d.hi, pp)));
      continue;
    }
    auto atoms = atomize(d, AtomForm::stieltjes, f.order, opt.nodes_per_panel, opt.atomization_nodes - used);
    used += atoms.size();
    for (const auto& a : atoms) p.add(a.site, f.order, a.weight);
  }
  return p;
}

namespace detail {

/// Adds a T-class density of the given order to p. Beta parts of matching order are
/// exact, embedded parts are handled at their own order, the rest is atomized.
inline void add_tclass_density(PoleSum& p, const Density& d, int order, const AtomizeOptions& opt, std::size_t& used) {
  using F = PoleSum::Form;
  if (d.kind == DensityKind::beta && int(d.params[0] + d.params[1]) == order) {
    const int pp = int(d.params[0]), qq = int(d.params[1]);
    if (!d.bounded())
      p.add(d.lo, qq, d.scale);
    else
      p.add(multiply(pole(F::tclass, d.lo, qq, d.scale), pole(F::tclass, d.hi, pp)));
    return;
  }
  if (d.kind == DensityKind::embedded) {
    PoleSum q(F::tclass);
    add_tclass_density(q, *d.inner, int(d.params[0]), opt, used);
    p.add(q, d.scale);
    return;
  }
  auto atoms = atomize(d, AtomForm::tclass, order, opt.nodes_per_panel, opt.atomization_nodes - used);
  used += atoms.size();
  for (const auto& a : atoms) p.add(a.site, order, a.weight);
}

}  // namespace detail

inline PoleSum to_poles(const TclassRep& f, const AtomizeOptions& opt = {}) {
  PoleSum p(PoleSum::Form::tclass);
  p.constant = f.a;
  for (const auto& a : f.mu.atoms) p.add(a.site, f.order, a.weight);
  std::size_t used = 0;
  for (const auto& d : f.mu.densities) detail::add_tclass_density(p, d, f.order, opt, used);
  return p;
}

/// Embeds a stieltjes-form pole sum at order N: lower orders become beta densities on [0, s].
inline StieltjesRep stieltjes_from_poles(const PoleSum& p, int N) {
  if (p.form != PoleSum::Form::stieltjes) throw Error(ErrorCode::BadParams, "expected stieltjes-form poles");
  if (p.max_order() > N) throw Error(ErrorCode::BadParams, "pole order exceeds target order");
  StieltjesRep r{N, {}};
  if (p.constant != 0.0) r.nu.atoms.push_back({0.0, p.constant});
  for (const auto& [s, c] : p.poles)
    for (std::size_t k0 = 0; k0 < c.size(); ++k0) {
      if (c[k0] == 0.0) continue;
      const int k = int(k0) + 1;
      if (k == N)
        r.nu.atoms.push_back({s, c[k0]});
      else
        r.nu.densities.push_back(density::beta(k, N - k, 0.0, s, c[k0]));
    }
  return r;
}

/// Embeds a tclass-form pole sum at order N: lower orders become beta densities on [s, inf).
inline TclassRep tclass_from_poles(const PoleSum& p, int N) {
  if (p.form != PoleSum::Form::tclass) throw Error(ErrorCode::BadParams, "expected tclass-form poles");
  if (p.max_order() > N) throw Error(ErrorCode::BadParams, "pole order exceeds target order");
  TclassRep r{N, p.constant, {}};
  for (const auto& [s, c] : p.poles)
    for (std::size_t k0 = 0; k0 < c.size(); ++k0) {
      if (c[k0] == 0.0) continue;
      const int k = int(k0) + 1;
      if (k == N)
        r.mu.atoms.push_back({s, c[k0]});
      else
        r.mu.densities.push_back(density::beta(N - k, k, s, kInf, c[k0]));
    }
  return r;
}

inline TclassRep to_tclass(const StieltjesRep& f, const AtomizeOptions& opt = {}) {
  return tclass_from_poles(stieltjes_to_tclass(to_poles(f, opt)), f.order);
}

inline std::variant<StieltjesRep, TclassRep> product_operand(const FunctionSpec& f);

/// Pole sum in tclass form of a Stieltjes or T-class function, with its order.
inline std::pair<PoleSum, int> tclass_poles(const FunctionSpec& f, const AtomizeOptions& opt) {
  auto op = product_operand(f);
  if (auto* s = std::get_if<StieltjesRep>(&op)) return {stieltjes_to_tclass(to_poles(*s, opt)), s->order};
  const auto& t = std::get<TclassRep>(op);
  return {to_poles(t, opt), t.order};
}

/// c/(w+s)^k (w+t)^l at order N >= k+l: the beta density on [s, t], embedded if needed.
inline Density pair_density(const PolePair& x, int N) {
  Density d = density::beta(x.l, x.k, x.s, x.t, x.c);
  return x.k + x.l == N ? d : density::embedded(d, x.k + x.l, N);
}

/// Whether d is a (possibly embedded) two-site beta density, i.e. a kept pole pair.
inline bool is_pair_density(const Density& d, int order) {
  if (d.kind == DensityKind::embedded) return is_pair_density(*d.inner, int(d.params[0]));
  return d.kind == DensityKind::beta && d.bounded() && int(d.params[0] + d.params[1]) == order;
}

struct ProductRep {
  TclassRep rep;
  std::size_t merged_sites = 0;
  std::size_t kept_pairs = 0;
};

/// Rep of f1 f2 in the T-class of order n+m by partial fractions on atoms. Pairs whose
/// expansion would cancel are kept as two-site beta densities, which are exact.
inline ProductRep stieltjes_product_ex(const FunctionSpec& f1, const FunctionSpec& f2, const AtomizeOptions& opt = {}) {
  auto [p, n] = tclass_poles(f1, opt);
  auto [q, m] = tclass_poles(f2, opt);
  GuardedProduct g = multiply_guarded(p, q);
  g.sum.prune();
  ProductRep out{tclass_from_poles(g.sum, n + m), g.sum.merged, 0};
  double tv = std::abs(g.sum.constant);
  auto size = [](const PolePair& x) { return std::abs(x.c) * std::pow(1.0 + x.s, -x.k) * std::pow(1.0 + x.t, -x.l); };
  for (const auto& [s, c] : g.sum.poles)
    for (std::size_t k = 0; k < c.size(); ++k) tv += std::abs(c[k]) * std::pow(1.0 + s, -double(k + 1));
  for (const auto& x : g.pairs) tv += size(x);
  for (const auto& x : g.pairs) {
    if (size(x) < 1e-16 * tv) continue;
    out.rep.mu.densities.push_back(pair_density(x, n + m));
    ++out.kept_pairs;
  }
  return out;
}

inline TclassRep stieltjes_product(const FunctionSpec& f1, const FunctionSpec& f2, std::size_t atomization_nodes = 4000) {
  AtomizeOptions opt;
  opt.atomization_nodes = atomization_nodes;
  return stieltjes_product_ex(f1, f2, opt).rep;
}

/// Product of two bounded Stieltjes reps, staying in the bounded class. Kept pairs of
/// full order become two-site beta densities; lower-order ones are expanded after all.
inline StieltjesRep bounded_product(const StieltjesRep& f, const StieltjesRep& g, const AtomizeOptions& opt = {}) {
  using F = PoleSum::Form;
  const int N = f.order + g.order;
  GuardedProduct r = multiply_guarded(to_poles(f, opt), to_poles(g, opt));
  std::vector<Density> exact;
  for (const auto& x : r.pairs) {
    if (x.k + x.l == N)
      exact.push_back(density::beta(x.l, x.k, x.s, x.t, x.c));
    else
      r.sum.add(multiply(pole(F::stieltjes, x.s, x.k, x.c), pole(F::stieltjes, x.t, x.l)));
  }
  r.sum.prune();
  StieltjesRep out = stieltjes_from_poles(r.sum, N);
  for (auto& d : exact) out.nu.densities.push_back(std::move(d));
  return out;
}

/// The same T-class function at order N >= f.order.
inline TclassRep embed(const TclassRep& f, int N) {
  if (N == f.order) return f;
  TclassRep r{N, f.a, {}};
  for (const auto& a : f.mu.atoms) r.mu.densities.push_back(density::beta(N - f.order, f.order, a.site, kInf, a.weight));
  for (const auto& d : f.mu.densities) r.mu.densities.push_back(density::embedded(d, f.order, N));
  return r;
}

/// f + g for Stieltjes/T-class inputs, at the larger order.
inline TclassRep sum_rep(const FunctionSpec& f, const FunctionSpec& g, const AtomizeOptions& opt = {}) {
  auto rep = [&](const FunctionSpec& h) {
    auto op = product_operand(h);
    if (auto* s = std::get_if<StieltjesRep>(&op)) return to_tclass(*s, opt);
    return std::get<TclassRep>(op);
  };
  TclassRep a = rep(f), b = rep(g);
  const int N = std::max(a.order, b.order);
  a = embed(a, N);
  b = embed(b, N);
  a.a += b.a;
  a.mu += b.mu;
  return a;
}

// ---------------------------------------------------------------- regularization

namespace detail {

/// x^-k (1 - (1+zx)^-1)^k, the T-class pole c/(w+x)^k in stieltjes form.
inline PoleSum far_pole(double x, int k) {
  PoleSum h(PoleSum::Form::stieltjes);
  for (int j = 0; j <= k; ++j) h.add(x, j, binom(k, j) * ((j % 2) ? -1.0 : 1.0) * std::pow(x, -k));
  return h;
}

/// psi_(n-a) (1-psi_1)^a = psi_n z^a.
inline PoleSum psi_head(int n, int a) {
  PoleSum h(PoleSum::Form::stieltjes);
  for (int j = 0; j <= a; ++j) h.add(1.0, j + n - a, binom(a, j) * ((j % 2) ? -1.0 : 1.0));
  return h;
}

}  // namespace detail

/// f psi_n as a bounded Stieltjes rep of order 2n, following the split of mu at s = 1:
///   s <= 1: psi_(n-k) (1-psi_1)^k (1+zs)^-k   (the z^k factor absorbed by psi_k)
///   s >  1: s^-k (1 - (1+zs)^-1)^k psi_n
/// with lower-order T-class terms c/(w+s)^k handled the same way. A two-site beta part
/// c/(w+s)^k (w+t)^l with s <= 1 is converted factor by factor, so no tclass-form partial
/// fractions between small sites arise.
inline StieltjesRep regularize_tclass(const TclassRep& f, const AtomizeOptions& opt = {}) {
  using F = PoleSum::Form;
  const int n = f.order, N = 2 * n;
  TclassRep rest{n, f.a, {f.mu.atoms, {}}};
  PoleSum out(F::stieltjes);
  std::vector<Density> exact;
  // products with the psi factor, whose site 1 may nearly coincide with an atom
  auto put = [&](const PoleSum& head, const PoleSum& tail, cplx c) {
    GuardedProduct g = multiply_keep_near(head, tail);
    out.add(g.sum, c);
    for (const auto& x : g.pairs) {
      Density d = density::beta(x.l, x.k, x.s, x.t, c * x.c);
      exact.push_back(x.k + x.l == N ? d : density::embedded(d, x.k + x.l, N, AtomForm::stieltjes));
    }
  };
  for (const auto& d : f.mu.densities) {
    if (!is_pair_density(d, n)) {
      rest.mu.densities.push_back(d);
      continue;
    }
    const Density& b = d.kind == DensityKind::embedded ? *d.inner : d;
    const cplx c = &b == &d ? d.scale : d.scale * b.scale;
    const double s = b.lo, t = b.hi;
    const int k = int(b.params[1]), l = int(b.params[0]);
    if (s > 1.0) {
      rest.mu.densities.push_back(d);
      continue;
    }
    PoleSum near = s == 0.0 ? pole(F::stieltjes, 0.0, 0, 1.0) : pole(F::stieltjes, s, k);
    if (t <= 1.0)
      put(detail::psi_head(n, k + l), multiply(near, pole(F::stieltjes, t, l)), c);
    else
      put(detail::psi_head(n, k), multiply(near, detail::far_pole(t, l)), c);
  }
  PoleSum tp = to_poles(rest, opt);
  out.add(1.0, n, tp.constant);
  for (const auto& [s, c] : tp.poles) {
    for (std::size_t k0 = 0; k0 < c.size(); ++k0) {
      if (c[k0] == 0.0) continue;
      const int k = int(k0) + 1;
      if (s <= 1.0)
        put(detail::psi_head(n, k), s == 0.0 ? pole(F::stieltjes, 0.0, 0, 1.0) : pole(F::stieltjes, s, k), c[k0]);
      else
        put(detail::far_pole(s, k), pole(F::stieltjes, 1.0, n), c[k0]);
    }
  }
  out.prune();
  StieltjesRep r = stieltjes_from_poles(out, N);
  for (auto& d : exact) r.nu.densities.push_back(std::move(d));
  return r;
}

// ---------------------------------------------------------------- order lifting

namespace detail {

/// Coefficients of P(t - a) expanded in powers of t.
inline std::vector<double> shift_poly(const std::vector<double>& c, double a) {
  std::vector<double> out(c.size(), 0.0);
  for (std::size_t j = 0; j < c.size(); ++j)
    for (std::size_t i = 0; i <= j; ++i) out[i] += c[j] * binom(int(j), int(i)) * std::pow(-a, double(j - i));
  return out;
}

/// Lifted density n t^(n-1) int_t^inf rho(s) s^-n ds for polynomial rho on [a, b], when
/// no logarithm appears. Returns the parts, or nothing.
inline std::optional<std::vector<Density>> lift_poly(const Density& d, int n) {
  const double a = d.lo, b = d.hi;
  std::vector<double> c = shift_poly(d.params, a);  // rho = sum c_j s^j
  for (std::size_t j = 0; j < c.size(); ++j)
    if (c[j] != 0.0 && int(j) == n - 1) return std::nullopt;
  // G(t) = int_t^b rho(s) s^-n ds = sum c_j (b^(j-n+1) - t^(j-n+1)) / (j-n+1)
  auto antideriv = [&](double x) {
    double v = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j)
      if (c[j] != 0.0) v += c[j] * std::pow(x, double(j) - n + 1) / (double(j) - n + 1);
    return v;
  };
  if (a == 0.0) {
    for (std::size_t j = 0; j < c.size(); ++j)
      if (c[j] != 0.0 && int(j) < n - 1) return std::nullopt;
  }
  const double Gb = antideriv(b);
  std::vector<Density> parts;
  if (a > 0.0) {
    // [0, a): n t^(n-1) (G(b) - G(a))
    std::vector<double> poly(n, 0.0);
    poly[n - 1] = n * (Gb - antideriv(a));
    parts.push_back(density::indicator_poly(poly, 0.0, a, d.scale));
  }
  // [a, b]: n t^(n-1) Gb - n sum c_j t^j / (j-n+1), re-expanded around a
  std::vector<double> poly(std::max<std::size_t>(c.size(), n), 0.0);
  poly[n - 1] += n * Gb;
  for (std::size_t j = 0; j < c.size(); ++j)
    if (c[j] != 0.0) poly[j] -= n * c[j] / (double(j) - n + 1);
  parts.push_back(density::indicator_poly(shift_poly(poly, -a), a, b, d.scale));
  return parts;
}

}  // namespace detail

/// Same function, represented at order n+1.
inline StieltjesRep lift_order(const StieltjesRep& f, const AtomizeOptions& opt = {}) {
  using F = PoleSum::Form;
  const int n = f.order;
  StieltjesRep r{n + 1, {}};
  for (const auto& a : f.nu.atoms) {
    if (a.site == 0.0)
      r.nu.atoms.push_back(a);
    else
      r.nu.densities.push_back(density::beta(n, 1, 0.0, a.site, a.weight));
  }
  for (const auto& d : f.nu.densities) {
    if (d.kind == DensityKind::beta && d.bounded() && int(d.params[0] + d.params[1]) == n) {
      const int p = int(d.params[0]), q = int(d.params[1]);
      if (d.lo == 0.0) {
        r.nu.densities.push_back(density::beta(p, q + 1, 0.0, d.hi, d.scale));
      } else {
        auto lifted = stieltjes_from_poles(multiply(pole(F::stieltjes, d.lo, q, d.scale), pole(F::stieltjes, d.hi, p)), n + 1);
        r.nu += lifted.nu;
      }
      continue;
    }
    if (d.kind == DensityKind::power_law && d.lo == 0.0 && !d.bounded() && d.params[1] == 0.0 && d.params[0] < n) {
      const double p = d.params[0];
      r.nu.densities.push_back(density::power_law(p, 0.0, d.scale * double(n) / (n - p)));
      continue;
    }
    if (d.kind == DensityKind::indicator_poly) {
      if (auto parts = detail::lift_poly(d, n)) {
        for (auto& part : *parts) r.nu.densities.push_back(std::move(part));
        continue;
      }
    }
    for (const auto& a : atomize(d, AtomForm::stieltjes, n, opt.nodes_per_panel, opt.atomization_nodes)) {
      if (a.site == 0.0)
        r.nu.atoms.push_back(a);
      else
        r.nu.densities.push_back(density::beta(n, 1, 0.0, a.site, a.weight));
    }
  }
  return r;
}

// ---------------------------------------------------------------- catalog

inline FunctionSpec make_spec(StieltjesRep r, std::string label = {}) { return {std::move(r), std::move(label)}; }
inline FunctionSpec make_spec(TclassRep r, std::string label = {}) { return {std::move(r), std::move(label)}; }
inline FunctionSpec make_spec(BernsteinTriple r, std::string label = {}) { return {std::move(r), std::move(label)}; }
inline FunctionSpec make_spec(LaplaceRep r, std::string label = {}) { return {std::move(r), std::move(label)}; }
inline FunctionSpec make_spec(ClosedForm r, std::string label = {}) { return {std::move(r), std::move(label)}; }

namespace detail {

inline std::string label_of(std::string_view name, const std::vector<double>& params) {
  std::string s(name);
  for (std::size_t i = 0; i < params.size(); ++i) {
    s += i ? "," : ":";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", params[i]);
    s += buf;
  }
  return s;
}

inline void need(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::BadParams, what);
}

}  // namespace detail

/// Catalog functions with their natural representation:
///   power(alpha)  T-class of order floor(alpha)+1 (integer alpha: order alpha, mu = delta_0)
///   log1p         T-class order 1, Lebesgue measure on [0,1]
///   one_minus_exp Bernstein triple (0, 0, delta_1)
///   psi(k)        (1+z)^-k, Stieltjes order k
///   tau           z(1+z)^-2, Stieltjes order 2
///   e3(r)         z^r (1+z)^-r for integer r, Stieltjes order r
///   identity, constant(c)
inline FunctionSpec catalog(std::string_view name, const std::vector<double>& params = {}) {
  using F = PoleSum::Form;
  const std::string label = detail::label_of(name, params);
  auto arg = [&](std::size_t i, double dflt) { return i < params.size() ? params[i] : dflt; };
  if (name == "power") {
    detail::need(params.size() == 1, "power needs one exponent");
    const double alpha = params[0];
    detail::need(alpha > 0.0 && std::isfinite(alpha), "power exponent must be positive");
    if (alpha == std::floor(alpha)) return make_spec(TclassRep{int(alpha), 0.0, RadonMeasure::dirac(0.0)}, label);
    const int n = int(std::floor(alpha)) + 1;
    const double c = std::tgamma(double(n)) / (std::tgamma(n - alpha) * std::tgamma(alpha));
    return make_spec(TclassRep{n, 0.0, RadonMeasure::of(density::power_law(n - alpha, 0.0, c))}, label);
  }
  if (name == "log1p") {
    detail::need(params.empty(), "log1p takes no parameters");
    return make_spec(TclassRep{1, 0.0, RadonMeasure::of(density::lebesgue(0.0, 1.0))}, label);
  }
  if (name == "one_minus_exp") {
    detail::need(params.empty(), "one_minus_exp takes no parameters");
    return make_spec(BernsteinTriple{0.0, 0.0, RadonMeasure::dirac(1.0)}, label);
  }
  if (name == "psi") {
    const double k = arg(0, 1.0);
    detail::need(params.size() <= 1 && k >= 1 && k == std::floor(k) && k <= 64, "psi needs a positive integer order");
    return make_spec(StieltjesRep{int(k), RadonMeasure::dirac(1.0)}, label);
  }
  if (name == "tau") {
    detail::need(params.empty(), "tau takes no parameters");
    RadonMeasure nu = RadonMeasure::of(density::beta(1, 1, 0.0, 1.0)) + RadonMeasure::dirac(1.0, -1.0);
    return make_spec(StieltjesRep{2, nu}, label);
  }
  if (name == "e3") {
    const double r = arg(0, 1.0);
    detail::need(params.size() <= 1 && r >= 1 && r == std::floor(r) && r <= 64, "e3 needs a positive integer exponent");
    const int R = int(r);
    PoleSum p(F::stieltjes);
    for (int j = 0; j <= R; ++j) p.add(1.0, j, binom(R, j) * ((j % 2) ? -1.0 : 1.0));
    return make_spec(stieltjes_from_poles(p, R), label);
  }
  if (name == "identity") {
    detail::need(params.empty(), "identity takes no parameters");
    return make_spec(TclassRep{1, 0.0, RadonMeasure::dirac(0.0)}, label);
  }
  if (name == "constant") {
    detail::need(params.size() <= 2, "constant takes (re[, im])");
    return make_spec(StieltjesRep{1, RadonMeasure::dirac(0.0, cplx(arg(0, 1.0), arg(1, 0.0)))}, label);
  }
  throw Error(ErrorCode::UnknownBuiltin, std::string(name));
}

/// Parses "name" or "name:p1,p2".
inline FunctionSpec parse_function(std::string_view text) {
  const auto colon = text.find(':');
  std::string_view name = text.substr(0, colon);
  std::vector<double> params;
  if (colon != std::string_view::npos) {
    std::string rest(text.substr(colon + 1));
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      std::size_t comma = rest.find(',', pos);
      std::string tok = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        std::size_t used = 0;
        params.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(ErrorCode::BadParams, "cannot parse parameter '" + tok + "'");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  return catalog(name, params);
}

/// The catalog name and parameters encoded in a spec's label, if any.
inline std::optional<std::pair<std::string, std::vector<double>>> catalog_entry(const FunctionSpec& f) {
  if (f.label.empty()) return std::nullopt;
  const auto colon = f.label.find(':');
  std::pair<std::string, std::vector<double>> out{f.label.substr(0, colon), {}};
  if (colon != std::string::npos) {
    std::string rest = f.label.substr(colon + 1);
    std::size_t pos = 0;
    while (pos < rest.size()) {
      std::size_t comma = rest.find(',', pos);
      out.second.push_back(std::stod(rest.substr(pos, comma - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  return out;
}

/// Levy triple of a catalog Bernstein function, where one is known.
inline std::optional<BernsteinTriple> catalog_bernstein(const FunctionSpec& f) {
  if (f.is<BernsteinTriple>()) return f.as<BernsteinTriple>();
  auto e = catalog_entry(f);
  if (!e) return std::nullopt;
  const auto& [name, p] = *e;
  if (name == "power" && p.size() == 1) {
    const double alpha = p[0];
    if (alpha == 1.0) return BernsteinTriple{0.0, 1.0, {}};
    if (alpha > 0.0 && alpha < 1.0)
      return BernsteinTriple{0.0, 0.0, RadonMeasure::of(density::power_law(-alpha, 0.0, alpha / std::tgamma(1.0 - alpha)))};
  }
  if (name == "identity") return BernsteinTriple{0.0, 1.0, {}};
  if (name == "e3" && (p.empty() || p[0] == 1.0)) return BernsteinTriple{0.0, 0.0, RadonMeasure::of(density::exp_decay(1.0))};
  if (name == "one_minus_exp") return BernsteinTriple{0.0, 0.0, RadonMeasure::dirac(1.0)};
  if (name == "constant" && (p.size() < 2 || p[1] == 0.0) && (p.empty() || p[0] >= 0.0))
    return BernsteinTriple{p.empty() ? 1.0 : p[0], 0.0, {}};
  return std::nullopt;
}

/// Stieltjes or T-class view used by products and engines; ClosedForm builtins that
/// have catalog reps are converted.
inline std::variant<StieltjesRep, TclassRep> product_operand(const FunctionSpec& f) {
  if (f.is<StieltjesRep>()) return f.as<StieltjesRep>();
  if (f.is<TclassRep>()) return f.as<TclassRep>();
  if (f.is<ClosedForm>()) {
    const auto& c = f.as<ClosedForm>();
    switch (c.id) {
      case Builtin::power: return catalog("power", c.params).as<TclassRep>();
      case Builtin::log1p: return catalog("log1p").as<TclassRep>();
      case Builtin::identity: return catalog("identity").as<TclassRep>();
      case Builtin::constant: {
        cplx v = eval(c, 1.0);
        return StieltjesRep{1, RadonMeasure::dirac(0.0, v)};
      }
      case Builtin::rational: {
        const auto& p = c.params;
        PoleSum ps(PoleSum::Form::stieltjes);
        ps.constant = cplx(p.at(0), p.at(1));
        for (std::size_t i = 2; i + 3 < p.size(); i += 4) ps.add(p[i], int(p[i + 1]), cplx(p[i + 2], p[i + 3]));
        return stieltjes_from_poles(ps, std::max(1, ps.max_order()));
      }
      default: break;
    }
  }
  throw Error(ErrorCode::BadParams, std::string("no Stieltjes/T-class representation for ") + f.kind() +
                                        (f.label.empty() ? "" : " " + f.label));
}

/// T-class view (Stieltjes reps converted exactly).
inline TclassRep as_tclass(const FunctionSpec& f, const AtomizeOptions& opt = {}) {
  auto op = product_operand(f);
  if (auto* t = std::get_if<TclassRep>(&op)) return *t;
  return to_tclass(std::get<StieltjesRep>(op), opt);
}

/// Polynomial growth order used by the holomorphic regularization.
inline int growth_order(const FunctionSpec& f) {
  if (f.is<StieltjesRep>() || f.is<LaplaceRep>()) return 0;
  if (f.is<TclassRep>()) return f.as<TclassRep>().order;
  if (f.is<BernsteinTriple>()) return 1;
  const auto& c = f.as<ClosedForm>();
  switch (c.id) {
    case Builtin::power: return int(std::ceil(c.params.at(0)));
    case Builtin::log1p:
    case Builtin::identity:
    case Builtin::tilde: return 1;
    default: return 0;
  }
}

// ---------------------------------------------------------------- tilde transform

/// f~(z) = 1/f(1/z). Powers are fixed points; other functions become a tilde closed form.
inline FunctionSpec tilde_transform(const FunctionSpec& f) {
  if (auto e = catalog_entry(f); e && e->first == "power") return catalog("power", e->second);
  if (f.is<ClosedForm>()) {
    const auto& c = f.as<ClosedForm>();
    if (c.id == Builtin::power) return f;
    if (c.id == Builtin::tilde) return *c.inner;
  }
  for (int k = 0; k <= 120; ++k) {
    const double x = std::pow(10.0, -6.0 + k * 0.1);
    if (std::abs(eval(f, x, 1e-13)) < 1e-13) throw Error(ErrorCode::ZeroDetected, "f vanishes near x=" + fmt(x));
  }
  ClosedForm t{Builtin::tilde, {}, std::make_shared<const FunctionSpec>(f)};
  return make_spec(t, f.label.empty() ? std::string() : "tilde(" + f.label + ")");
}

// ---------------------------------------------------------------- Bernstein split

namespace detail {

inline void check_levy(const BernsteinTriple& f) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::LevyIntegrabilityViolated, m); };
  if (f.a < 0.0 || f.b < 0.0) fail("a and b must be nonnegative");
  for (const auto& at : f.mu.atoms)
    if (at.weight.imag() != 0.0 || at.weight.real() < 0.0) fail("Levy measure must be positive");
  for (const auto& d : f.mu.densities) {
    if (d.scale.imag() != 0.0 || d.scale.real() < 0.0) fail("Levy measure must be positive");
    if (d.kind == DensityKind::power_law && d.lo == 0.0 && d.params[0] <= -1.0) fail("min(1,s) mu(ds) diverges at 0");
    if (!d.bounded()) {
      if (!d.envelope) throw Error(ErrorCode::TailNotDominated, "unbounded density without envelope");
      if (!std::isfinite(TailProfile::of(*d.envelope).tail(std::max(d.lo, 1.0) * 1e6)))
        fail("mu([1,inf)) diverges");
    }
  }
}

/// t -> int_t^1 rho(s) ds on [0, 1], as catalog densities.
inline std::vector<Density> upper_mass(const Density& d) {
  const double lo = d.lo, h = std::min(d.hi, 1.0);
  std::vector<Density> parts;
  if (!(h > lo)) return parts;
  auto constant_on = [&](double a, double b, cplx v) {
    if (b > a && v != 0.0) parts.push_back(density::indicator_poly({1.0}, a, b, v));
  };
  switch (d.kind) {
    case DensityKind::power_law: {
      const double p = d.params[0];
      if (d.params[1] != 0.0 || p == 0.0) break;
      const cplx c = d.scale / p;
      constant_on(0.0, lo, c * (std::pow(h, p) - std::pow(lo, p)));
      constant_on(lo, h, c * std::pow(h, p));
      parts.push_back(density::power_law(p + 1.0, 0.0, -c, lo, h));
      return parts;
    }
    case DensityKind::indicator_poly: {
      std::vector<double> Q(d.params.size() + 1, 0.0);
      for (std::size_t j = 0; j < d.params.size(); ++j) Q[j + 1] = d.params[j] / double(j + 1);
      auto Qv = [&](double x) {
        double v = 0.0;
        for (std::size_t j = Q.size(); j-- > 0;) v = v * x + Q[j];
        return v;
      };
      const double top = Qv(h - lo);
      constant_on(0.0, lo, d.scale * top);
      std::vector<double> poly(Q.size());
      for (std::size_t j = 0; j < Q.size(); ++j) poly[j] = -Q[j];
      poly[0] += top;
      parts.push_back(density::indicator_poly(poly, lo, h, d.scale));
      return parts;
    }
    case DensityKind::exp_decay: {
      const double c = d.params[0];
      if (c == 0.0) break;
      constant_on(0.0, lo, d.scale * (std::exp(-c * lo) - std::exp(-c * h)) / c);
      parts.push_back(density::exp_decay(c, d.scale / c, lo, h));
      constant_on(lo, h, -d.scale * std::exp(-c * h) / c);
      return parts;
    }
    default:
      break;
  }
  throw Error(ErrorCode::Unsupported, std::string("no closed-form tail mass for ") + to_string(d.kind));
}

}  // namespace detail

struct BernsteinSplit {
  LaplaceRep g1;
  LaplaceRep g2;
};

/// f(z) = g1(z) + z g2(z) with
///   g1 = (a + mu([1,inf))) delta_0 - mu|[1,inf)
///   g2 = b delta_0 + density t -> mu((t,1)) on [0,1]
inline BernsteinSplit bernstein_split(const BernsteinTriple& f) {
  detail::check_levy(f);
  BernsteinSplit out;
  cplx far_mass = 0.0;
  for (const auto& at : f.mu.atoms) {
    if (at.site >= 1.0) {
      far_mass += at.weight;
      out.g1.mu.atoms.push_back({at.site, -at.weight});
    } else if (at.site > 0.0) {
      out.g2.mu.densities.push_back(density::indicator_poly({1.0}, 0.0, at.site, at.weight));
    }
  }
  for (const auto& d : f.mu.densities) {
    if (d.hi > 1.0) {
      Density far = restricted(d, std::max(d.lo, 1.0), d.hi);
      far_mass += integrate_kernel(RadonMeasure::of(far), Kernel::exp(0.0), 1e-14).value;
      out.g1.mu.densities.push_back(scaled(far, -1.0));
    }
    if (d.lo < 1.0)
      for (auto& part : detail::upper_mass(d)) out.g2.mu.densities.push_back(std::move(part));
  }
  const cplx m0 = f.a + far_mass;
  if (m0 != 0.0) out.g1.mu.atoms.insert(out.g1.mu.atoms.begin(), {0.0, m0});
  if (f.b != 0.0) out.g2.mu.atoms.insert(out.g2.mu.atoms.begin(), {0.0, f.b});
  return out;
}

/// Laplace rep of f(z)/(1+z) = (g1 + z g2)/(1+z) where (g1, g2) split f. Written as
/// g2 + e^-t * (g1 - g2).
inline LaplaceRep resolvent_regularized(const BernsteinTriple& f) {
  auto [g1, g2] = bernstein_split(f);
  LaplaceRep out{g2.mu};
  std::vector<Atom> diff = g1.mu.atoms;
  for (const auto& a : g2.mu.atoms) diff.push_back({a.site, -a.weight});
  std::sort(diff.begin(), diff.end(), [](const Atom& x, const Atom& y) { return x.site < y.site; });
  for (std::size_t i = 0; i < diff.size();) {
    cplx w = 0.0;
    std::size_t j = i;
    for (; j < diff.size() && diff[j].site == diff[i].site; ++j) w += diff[j].weight;
    if (w != 0.0) out.mu.densities.push_back(density::exp_decay(1.0, w * std::exp(diff[i].site), diff[i].site));
    i = j;
  }
  auto conv = [&](const Density& d, cplx sign) {
    const double tv = total_variation(RadonMeasure::of(d), 1e-8).tv;
    out.mu.densities.push_back(scaled(density::exp_conv(d, tv), sign));
  };
  for (const auto& d : g1.mu.densities) conv(d, 1.0);
  for (const auto& d : g2.mu.densities) conv(d, -1.0);
  return out;
}

/// Laplace rep of z / ((1+z) f(z)) from the caller-supplied triple for z/f, checked
/// against f on a few points.
inline LaplaceRep sbf_regularized_rep(const FunctionSpec& f, const BernsteinTriple& z_over_f) {
  LaplaceRep out = resolvent_regularized(z_over_f);
  for (cplx z : {cplx(0.5), cplx(1.0), cplx(3.0), cplx(1.0, 2.0)}) {
    const cplx want = z / ((1.0 + z) * eval(f, z, 1e-12));
    const cplx got = eval(out, z, 1e-10);
    if (std::abs(got - want) > 1e-6 * std::max(1.0, std::abs(want)))
      throw Error(ErrorCode::BadParams, "triple does not represent z/f(z) at z=" + fmt(z.real()) + "+" + fmt(z.imag()) + "i");
  }
  return out;
}

}  // namespace sectorial
