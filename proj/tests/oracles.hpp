#pragma once

// Reference computations that share no code with the library: Boost double-exponential
// quadrature for scalar integrals, and plain closed forms.

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace oracle {

using cplx = std::complex<double>;

inline cplx integrate(const std::function<cplx(double)>& f, double a, double b) {
  boost::math::quadrature::tanh_sinh<double> ts(15);
  double re = ts.integrate([&](double s) { return f(s).real(); }, a, b, 1e-14);
  double im = ts.integrate([&](double s) { return f(s).imag(); }, a, b, 1e-14);
  return {re, im};
}

/// Integral over [a, inf).
inline cplx integrate_tail(const std::function<cplx(double)>& f, double a) {
  boost::math::quadrature::exp_sinh<double> es(15);
  auto re = [&](double s) { return f(a + s).real(); };
  auto im = [&](double s) { return f(a + s).imag(); };
  return {es.integrate(re, 1e-14), es.integrate(im, 1e-14)};
}

/// Integral over [0, inf), split at 1 so both the origin and the tail are handled.
inline cplx integrate_halfline(const std::function<cplx(double)>& f) {
  return integrate(f, 0.0, 1.0) + integrate_tail(f, 1.0);
}

inline std::vector<cplx> standard_grid() {
  const double pi = std::acos(-1.0);
  std::vector<cplx> g;
  for (double r : {0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0})
    for (double t : {0.0, pi / 4, -pi / 4, pi / 2, -pi / 2, 3 * pi / 4, -3 * pi / 4}) g.push_back(std::polar(r, t));
  return g;
}

inline double rel(cplx got, cplx want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

}  // namespace oracle
