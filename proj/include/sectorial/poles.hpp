#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <tuple>
#include <vector>

#include "sectorial/measures.hpp"

namespace sectorial {

/// Relative distance below which two pole sites are treated as one.
inline constexpr double kSiteMerge = 1e-10;

inline double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Finite sum of graded poles.
///   stieltjes form: constant + sum c / (1+zs)^k   (sites s > 0)
///   tclass form:    constant + sum c / (w+s)^k    (w = 1/z, sites s >= 0),
///                   i.e. c z^k / (1+zs)^k
struct PoleSum {
  enum class Form { stieltjes, tclass };
  Form form = Form::stieltjes;
  cplx constant{0.0};
  std::map<double, std::vector<cplx>> poles;
  std::size_t merged = 0;

  explicit PoleSum(Form f = Form::stieltjes) : form(f) {}

  int max_order() const {
    int m = 0;
    for (const auto& [s, c] : poles) m = std::max<int>(m, int(c.size()));
    return m;
  }

  std::size_t terms() const {
    std::size_t n = 0;
    for (const auto& [s, c] : poles) n += c.size();
    return n;
  }

  void add(double site, int order, cplx c) {
    if (c == 0.0) return;
    if (order == 0 || (form == Form::stieltjes && site == 0.0)) {
      constant += c;
      return;
    }
    auto it = poles.lower_bound(site);
    auto near = [&](double key) { return std::abs(key - site) <= kSiteMerge * std::max(key, site); };
    if (it != poles.end() && near(it->first)) {
      if (it->first != site) ++merged;
      site = it->first;
    } else if (it != poles.begin() && near(std::prev(it)->first)) {
      ++merged;
      site = std::prev(it)->first;
    }
    auto& v = poles[site];
    if (int(v.size()) < order) v.resize(order, 0.0);
    v[order - 1] += c;
  }

  void add(const PoleSum& o, cplx factor = 1.0) {
    constant += factor * o.constant;
    for (const auto& [s, c] : o.poles)
      for (std::size_t k = 0; k < c.size(); ++k) add(s, int(k) + 1, factor * c[k]);
  }

  cplx eval(cplx z) const {
    cplx acc = constant;
    for (const auto& [s, c] : poles) {
      const cplx base = form == Form::stieltjes ? 1.0 / (1.0 + z * s) : z / (1.0 + z * s);
      cplx p = base;
      for (std::size_t k = 0; k < c.size(); ++k, p *= base) acc += c[k] * p;
    }
    return acc;
  }

  /// Drops terms whose size at |z| ~ 1 is below rel * (total size). A T-form pole of
  /// order k at site s is of size |c| (1+s)^-k there.
  void prune(double rel = 1e-16) {
    auto size = [&](double s, std::size_t k0, cplx c) {
      return form == Form::tclass ? std::abs(c) * std::pow(1.0 + s, -double(k0 + 1)) : std::abs(c);
    };
    double tv = std::abs(constant);
    for (const auto& [s, c] : poles)
      for (std::size_t k = 0; k < c.size(); ++k) tv += size(s, k, c[k]);
    for (auto it = poles.begin(); it != poles.end();) {
      auto& c = it->second;
      for (std::size_t k = 0; k < c.size(); ++k)
        if (size(it->first, k, c[k]) < rel * tv) c[k] = 0.0;
      while (!c.empty() && c.back() == 0.0) c.pop_back();
      it = c.empty() ? poles.erase(it) : std::next(it);
    }
  }
};

namespace detail {

/// Coefficients of 1/((1+zs)^k (1+zt)^l), s != t, on (1+zs)^-i, i = 1..k (stieltjes form),
/// or of 1/((w+s)^k (w+t)^l) on (w+s)^-i (tclass form).
inline void partial_fraction(PoleSum::Form form, double s, int k, double t, int l, std::vector<cplx>& out) {
  out.assign(k, 0.0);
  for (int i = 1; i <= k; ++i) {
    const int m = k + l - i;
    double c = ((k - i) % 2 ? -1.0 : 1.0) * binom(k + l - i - 1, k - i);
    if (form == PoleSum::Form::stieltjes) {
      const double r = t / s;
      c *= std::pow(r, k - i) / std::pow(1.0 - r, m);
    } else {
      c /= std::pow(t - s, m);
    }
    out[i - 1] = c;
  }
}

}  // namespace detail

/// Product term c * pole(s, k) * pole(t, l) with s < t, kept unexpanded.
struct PolePair {
  double s;
  int k;
  double t;
  int l;
  cplx c;
};

namespace detail {

/// Pairwise product of two pole sums. Sites are clustered once so the pairwise loop
/// accumulates into flat arrays. Pairs for which keep(...) holds are not expanded.
template <class Keep>
PoleSum multiply_impl(const PoleSum& P, const PoleSum& Q, Keep&& keep, std::vector<PolePair>* kept) {
  if (P.form != Q.form) throw Error(ErrorCode::BadParams, "pole sums of different forms");
  PoleSum R(P.form);
  R.constant = P.constant * Q.constant;
  std::vector<double> all;
  for (const auto& [s, c] : P.poles) all.push_back(s);
  for (const auto& [s, c] : Q.poles) all.push_back(s);
  std::sort(all.begin(), all.end());
  std::vector<double> sites;
  std::size_t merged = 0;
  for (double s : all) {
    if (!sites.empty() && std::abs(s - sites.back()) <= kSiteMerge * std::max(s, sites.back())) {
      if (s != sites.back()) ++merged;
      continue;
    }
    sites.push_back(s);
  }
  auto index = [&](double s) {
    auto it = std::lower_bound(sites.begin(), sites.end(), s * (1.0 - 2 * kSiteMerge));
    while (it + 1 != sites.end() && std::abs(*(it + 1) - s) < std::abs(*it - s)) ++it;
    return std::size_t(it - sites.begin());
  };
  struct Term {
    std::size_t idx;
    double site;
    std::vector<cplx> c;
  };
  std::vector<Term> tp, tq;
  for (const auto& [s, c] : P.poles) tp.push_back({index(s), sites[index(s)], c});
  for (const auto& [s, c] : Q.poles) tq.push_back({index(s), sites[index(s)], c});
  const int K = P.max_order() + Q.max_order();
  std::vector<cplx> acc(sites.size() * std::max(K, 1), 0.0);
  auto at = [&](std::size_t idx, int order) -> cplx& { return acc[idx * K + order - 1]; };
  for (const auto& a : tp)
    for (std::size_t k = 0; k < a.c.size(); ++k) at(a.idx, int(k) + 1) += Q.constant * a.c[k];
  for (const auto& b : tq)
    for (std::size_t l = 0; l < b.c.size(); ++l) at(b.idx, int(l) + 1) += P.constant * b.c[l];
  std::vector<cplx> pa, pb;
  for (const auto& a : tp) {
    for (const auto& b : tq) {
      if (a.idx == b.idx) {
        for (std::size_t k = 0; k < a.c.size(); ++k)
          for (std::size_t l = 0; l < b.c.size(); ++l) at(a.idx, int(k + l) + 2) += a.c[k] * b.c[l];
        continue;
      }
      for (std::size_t k = 0; k < a.c.size(); ++k) {
        if (a.c[k] == 0.0) continue;
        for (std::size_t l = 0; l < b.c.size(); ++l) {
          const cplx w = a.c[k] * b.c[l];
          if (w == 0.0) continue;
          const int kk = int(k) + 1, ll = int(l) + 1;
          partial_fraction(P.form, a.site, kk, b.site, ll, pa);
          partial_fraction(P.form, b.site, ll, a.site, kk, pb);
          if (keep(a.site, kk, b.site, ll, w, pa, pb)) {
            if (a.site < b.site)
              kept->push_back({a.site, kk, b.site, ll, w});
            else
              kept->push_back({b.site, ll, a.site, kk, w});
            continue;
          }
          for (int i = 0; i < kk; ++i) at(a.idx, i + 1) += w * pa[i];
          for (int j = 0; j < ll; ++j) at(b.idx, j + 1) += w * pb[j];
        }
      }
    }
  }
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (int k = 1; k <= K; ++k)
      if (at(i, k) != 0.0) R.add(sites[i], k, at(i, k));
  R.merged = P.merged + Q.merged + merged;
  return R;
}

}  // namespace detail

/// Exact product of two pole sums of the same form, fully in partial fractions.
inline PoleSum multiply(const PoleSum& P, const PoleSum& Q) {
  auto never = [](double, int, double, int, cplx, const std::vector<cplx>&, const std::vector<cplx>&) { return false; };
  return detail::multiply_impl(P, Q, never, nullptr);
}

struct GuardedProduct {
  PoleSum sum;
  std::vector<PolePair> pairs;
};

/// Product of two pole sums in which a pair whose partial fractions would cancel badly
/// is kept as a pair. The rounding of a pair's expansion at z = rho is estimated as
/// eps |w| sum |pf_i| |pole_i(rho)|; a pair is kept when this exceeds target |PQ(rho)|
/// divided by the number of pairs, for some rho in {1e-2, 1, 1e2}.
inline GuardedProduct multiply_guarded(const PoleSum& P, const PoleSum& Q, double target = 1e-11) {
  const double rhos[3] = {1e-2, 1.0, 1e2};
  double npairs = 0.0;
  for (const auto& [s, a] : P.poles)
    for (const auto& [t, b] : Q.poles)
      if (s != t) npairs += double(a.size() * b.size());
  double limit[3];
  for (int r = 0; r < 3; ++r) limit[r] = target * std::abs(P.eval(rhos[r]) * Q.eval(rhos[r])) / std::max(1.0, npairs);
  const bool tform = P.form == PoleSum::Form::tclass;
  auto u = [&](double rho, double x) { return tform ? rho / (1.0 + rho * x) : 1.0 / (1.0 + rho * x); };
  auto keep = [&](double s, int, double t, int, cplx w, const std::vector<cplx>& pa, const std::vector<cplx>& pb) {
    for (int r = 0; r < 3; ++r) {
      const double us = u(rhos[r], s), ut = u(rhos[r], t);
      double e = 0.0, p = us;
      for (const cplx& c : pa) e += std::abs(c) * p, p *= us;
      p = ut;
      for (const cplx& c : pb) e += std::abs(c) * p, p *= ut;
      if (kEps * std::abs(w) * e > limit[r]) return true;
    }
    return false;
  };
  GuardedProduct out;
  out.sum = detail::multiply_impl(P, Q, keep, &out.pairs);
  auto key = [](const PolePair& x) { return std::make_tuple(x.s, x.k, x.t, x.l); };
  std::sort(out.pairs.begin(), out.pairs.end(), [&](const PolePair& x, const PolePair& y) { return key(x) < key(y); });
  std::vector<PolePair> merged;
  for (const auto& x : out.pairs) {
    if (!merged.empty() && key(merged.back()) == key(x))
      merged.back().c += x.c;
    else
      merged.push_back(x);
  }
  out.pairs = std::move(merged);
  return out;
}

/// Product in which pairs of distinct sites within a factor `ratio` of each other are
/// kept as pairs (their partial fraction coefficients grow like (1 - s/t)^-order).
inline GuardedProduct multiply_keep_near(const PoleSum& P, const PoleSum& Q, double ratio = 2.0) {
  auto keep = [&](double s, int, double t, int, cplx, const std::vector<cplx>&, const std::vector<cplx>&) {
    return s > 0.0 && t > 0.0 && std::max(s, t) < ratio * std::min(s, t);
  };
  GuardedProduct out;
  out.sum = detail::multiply_impl(P, Q, keep, &out.pairs);
  return out;
}

/// Single pole c/(1+zs)^k or c/(w+s)^k as a pole sum.
inline PoleSum pole(PoleSum::Form form, double s, int k, cplx c = 1.0) {
  PoleSum p(form);
  p.add(s, k, c);
  return p;
}

/// Stieltjes-form pole sum rewritten in tclass form (exact binomial expansion of
/// (1+zs)^-k = (1 - s/(w+s))^k).
inline PoleSum stieltjes_to_tclass(const PoleSum& p) {
  PoleSum t(PoleSum::Form::tclass);
  t.constant = p.constant;
  for (const auto& [s, c] : p.poles)
    for (std::size_t k0 = 0; k0 < c.size(); ++k0) {
      const int k = int(k0) + 1;
      for (int j = 0; j <= k; ++j) t.add(s, j, c[k0] * binom(k, j) * std::pow(-s, j));
    }
  t.merged = p.merged;
  return t;
}

}  // namespace sectorial
