#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "sectorial/error.hpp"

namespace sectorial {

using cplx = std::complex<double>;
using cmat = Eigen::MatrixXcd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kEps = std::numeric_limits<double>::epsilon();

namespace quad {

/// Gauss-Legendre rule on [-1, 1].
struct Rule {
  std::vector<double> x;
  std::vector<double> w;
};

template <int N>
Rule make_rule() {
  using G = boost::math::quadrature::gauss<double, N>;
  const auto& ax = G::abscissa();
  const auto& aw = G::weights();
  Rule r;
  for (std::size_t i = ax.size(); i-- > 0;) {
    if (ax[i] == 0.0) continue;
    r.x.push_back(-ax[i]);
    r.w.push_back(aw[i]);
  }
  for (std::size_t i = 0; i < ax.size(); ++i) {
    r.x.push_back(ax[i]);
    r.w.push_back(aw[i]);
  }
  return r;
}

inline const Rule& gl10() {
  static const Rule r = make_rule<10>();
  return r;
}
inline const Rule& gl20() {
  static const Rule r = make_rule<20>();
  return r;
}

/// Quadrature node budget; SECTORIAL_CALC_NODE_BUDGET overrides the default 20000.
inline std::size_t default_node_budget() {
  if (const char* env = std::getenv("SECTORIAL_CALC_NODE_BUDGET")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return 20000;
}

inline double magnitude(const cplx& v) { return std::abs(v); }
inline double magnitude(const cmat& v) { return v.norm(); }

template <class V>
struct Result {
  V value;
  double err = 0.0;
  std::size_t nodes = 0;
};

namespace detail {

template <class V>
struct Panel {
  double a, b;
  V fine;
  double err;
  double mag;
};

template <class V, class F>
Panel<V> eval_panel(F& f, double a, double b, const V& zero) {
  const double h = 0.5 * (b - a), m = 0.5 * (a + b);
  V coarse = zero, fine = zero;
  double mag = 0.0;
  const Rule& r10 = gl10();
  for (std::size_t i = 0; i < r10.x.size(); ++i) coarse += (r10.w[i] * h) * f(m + h * r10.x[i]);
  const Rule& r20 = gl20();
  for (std::size_t i = 0; i < r20.x.size(); ++i) {
    V v = f(m + h * r20.x[i]);
    mag += r20.w[i] * std::abs(h) * magnitude(v);
    fine += (r20.w[i] * h) * v;
  }
  double err = magnitude(V(fine - coarse));
  return {a, b, std::move(fine), err, mag};
}

}  // namespace detail

/// Adaptive Gauss-Legendre on [a, b]: 10- vs 20-point rule per panel, bisecting the
/// panel with the largest difference. The sum is taken in left-endpoint order.
template <class V, class F>
Result<V> adaptive(F&& f, double a, double b, double tol, std::size_t budget, const V& zero) {
  Result<V> res{zero, 0.0, 0};
  if (!(b > a)) return res;
  const std::size_t per_panel = gl10().x.size() + gl20().x.size();
  auto cmp = [](const detail::Panel<V>& p, const detail::Panel<V>& q) { return p.err < q.err; };
  std::vector<detail::Panel<V>> done;
  std::priority_queue<detail::Panel<V>, std::vector<detail::Panel<V>>, decltype(cmp)> heap(cmp);
  heap.push(detail::eval_panel(f, a, b, zero));
  std::size_t nodes = per_panel;
  double err_sum = heap.top().err, mag_sum = heap.top().mag;
  while (!heap.empty()) {
    double floor = 64.0 * kEps * mag_sum;
    if (err_sum <= std::max(tol, floor)) break;
    detail::Panel<V> worst = heap.top();
    if (worst.err <= floor / 64.0) break;
    const double mid = 0.5 * (worst.a + worst.b);
    if (nodes + 2 * per_panel > budget || !(mid > worst.a && mid < worst.b)) {
      throw Error(ErrorCode::QuadratureStall,
                  "tolerance " + fmt(tol) + " not reached with " + std::to_string(nodes) +
                      " nodes (estimate " + fmt(err_sum) + ")");
    }
    heap.pop();
    auto left = detail::eval_panel(f, worst.a, mid, zero);
    auto right = detail::eval_panel(f, mid, worst.b, zero);
    nodes += 2 * per_panel;
    err_sum += left.err + right.err - worst.err;
    mag_sum += left.mag + right.mag - worst.mag;
    heap.push(std::move(left));
    heap.push(std::move(right));
  }
  while (!heap.empty()) {
    done.push_back(heap.top());
    heap.pop();
  }
  std::sort(done.begin(), done.end(), [](const auto& p, const auto& q) { return p.a < q.a; });
  double err = 0.0;
  for (const auto& p : done) {
    res.value += p.fine;
    err += p.err;
  }
  res.err = err;
  res.nodes = nodes;
  return res;
}

/// Integral over [lo, hi] (hi finite) of g(s) ds. The part below 1 is integrated in
/// s = w^2, the part above 1 in the reciprocal variable s = 1/v^2, so that both the
/// origin and the far tail are resolved by bisection of a bounded interval.
template <class V, class F>
Result<V> halfline(F&& g, double lo, double hi, double tol, std::size_t budget, const V& zero) {
  Result<V> out{zero, 0.0, 0};
  if (!(hi > lo)) return out;
  const bool near = lo < 1.0, far = hi > 1.0;
  const double tol_part = (near && far) ? 0.5 * tol : tol;
  std::size_t used = 0;
  if (near) {
    const double b = std::min(hi, 1.0);
    auto h = [&](double w) -> V { return (2.0 * w) * g(w * w); };
    auto r = adaptive<V>(h, std::sqrt(lo), std::sqrt(b), tol_part, budget, zero);
    out.value += r.value;
    out.err += r.err;
    used += r.nodes;
  }
  if (far) {
    const double a = std::max(lo, 1.0);
    auto h = [&](double v) -> V {
      const double s = 1.0 / (v * v);
      return (2.0 / (v * v * v)) * g(s);
    };
    std::size_t left = budget > used ? budget - used : 0;
    auto r = adaptive<V>(h, 1.0 / std::sqrt(hi), 1.0 / std::sqrt(a), tol_part, left, zero);
    out.value += r.value;
    out.err += r.err;
    used += r.nodes;
  }
  out.nodes = used;
  return out;
}

}  // namespace quad
}  // namespace sectorial
