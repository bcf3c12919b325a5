#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sectorial/error.hpp"
#include "sectorial/quadrature.hpp"

namespace sectorial {
namespace gen {

inline cmat diag(const std::vector<cplx>& values) {
  const Eigen::Index d = Eigen::Index(values.size());
  cmat A = cmat::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) A(i, i) = values[std::size_t(i)];
  return A;
}

/// lambda I + N with ones on the superdiagonal.
inline cmat jordan(cplx lambda, int d) {
  if (d < 1) throw Error(ErrorCode::BadSpec, "jordan needs d >= 1");
  cmat A = lambda * cmat::Identity(d, d);
  for (int i = 0; i + 1 < d; ++i) A(i, i + 1) = 1.0;
  return A;
}

/// tridiag(-1, 2, -1).
inline cmat laplacian1d(int d) {
  if (d < 1) throw Error(ErrorCode::BadSpec, "laplacian1d needs d >= 1");
  cmat A = cmat::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    A(i, i) = 2.0;
    if (i + 1 < d) A(i, i + 1) = A(i + 1, i) = -1.0;
  }
  return A;
}

/// Spectral derivative on d equispaced points of the circle: the real skew-symmetric
/// circulant with eigenvalues i k, |k| < d/2 (the Nyquist mode maps to 0).
inline cmat shift_generator(int d) {
  if (d < 1) throw Error(ErrorCode::BadSpec, "shift_generator needs d >= 1");
  cmat A = cmat::Zero(d, d);
  const double h = 2.0 * std::acos(-1.0) / d;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      const int m = i - j;
      const double x = 0.5 * m * h;
      const double sign = (m % 2 == 0) ? 1.0 : -1.0;
      // even d: cot kernel; odd d: csc kernel
      A(i, j) = d % 2 == 0 ? 0.5 * sign / std::tan(x) : 0.5 * sign / std::sin(x);
    }
  return A;
}

namespace detail {

/// Uniform doubles from the raw 64-bit stream, so fixtures do not depend on the
/// standard library's distribution implementations.
struct Stream {
  std::mt19937_64 eng;
  explicit Stream(std::uint64_t seed) : eng(seed) {}
  double uniform() { return double(eng() >> 11) * 0x1.0p-53; }
  double normal() {
    const double u = 1.0 - uniform(), v = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::acos(-1.0) * v);
  }
};

inline cmat random_unitary(int d, Stream& rng) {
  cmat G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G(i, j) = cplx(rng.normal(), rng.normal());
  Eigen::HouseholderQR<cmat> qr(G);
  cmat Q = qr.householderQ();
  cmat R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j) {
    const cplx r = R(j, j);
    if (std::abs(r) > 0.0) Q.col(j) *= r / std::abs(r);
  }
  return Q;
}

}  // namespace detail

/// V diag(lambda) V^-1 with eigenvalues in the open sector of half-angle omega (moduli
/// log-uniform in [0.2, 5], arguments uniform in (-0.9 omega, 0.9 omega)) and
/// cond(V) = cond exactly (singular values log-spaced in [1, cond]).
inline cmat random_sectorial(int d, double omega, double cond, std::uint64_t seed) {
  if (d < 1 || !(omega > 0.0) || !(omega < std::acos(-1.0)) || !(cond >= 1.0))
    throw Error(ErrorCode::BadSpec, "random_sectorial needs d >= 1, 0 < omega < pi, cond >= 1");
  detail::Stream rng(seed);
  std::vector<cplx> lambda(d);
  for (int i = 0; i < d; ++i) {
    const double r = 0.2 * std::pow(25.0, rng.uniform());
    const double t = 0.9 * omega * (2.0 * rng.uniform() - 1.0);
    lambda[i] = std::polar(r, t);
  }
  cmat U = detail::random_unitary(d, rng), W = detail::random_unitary(d, rng);
  Eigen::VectorXd sv(d);
  for (int i = 0; i < d; ++i) sv(i) = d == 1 ? 1.0 : std::pow(cond, double(i) / (d - 1));
  cmat V = U * sv.cast<cplx>().asDiagonal() * W.adjoint();
  cmat Vinv = W * sv.cwiseInverse().cast<cplx>().asDiagonal() * U.adjoint();
  return V * diag(lambda) * Vinv;
}

/// A with k zero rows and columns appended (k kernel dimensions).
inline cmat zero_padded(const cmat& A, int k) {
  if (k < 0) throw Error(ErrorCode::BadSpec, "zero_padded needs k >= 0");
  cmat B = cmat::Zero(A.rows() + k, A.cols() + k);
  B.topLeftCorner(A.rows(), A.cols()) = A;
  return B;
}

/// Parses a real or complex literal: 2, -1.5, 3i, 2+i, 2-0.5i.
inline cplx parse_complex(std::string_view s) {
  auto fail = [&] { throw Error(ErrorCode::BadSpec, "bad number '" + std::string(s) + "'"); };
  if (s.empty()) fail();
  std::string t(s);
  auto real_of = [&](const std::string& x) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(x, &used);
    } catch (...) {
      fail();
    }
    if (used != x.size()) fail();
    return v;
  };
  if (t.back() != 'i') return real_of(t);
  t.pop_back();
  // split at the last sign that is not an exponent sign
  std::size_t cut = std::string::npos;
  for (std::size_t i = t.size(); i-- > 1;)
    if ((t[i] == '+' || t[i] == '-') && t[i - 1] != 'e' && t[i - 1] != 'E') {
      cut = i;
      break;
    }
  auto imag_of = [&](const std::string& x) {
    if (x.empty() || x == "+") return 1.0;
    if (x == "-") return -1.0;
    return real_of(x);
  };
  if (cut == std::string::npos) return {0.0, imag_of(t)};
  return {real_of(t.substr(0, cut)), imag_of(t.substr(cut))};
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i)
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  return out;
}

/// Builtin generator from "name:args", e.g. diag:1,4,9  jordan:0,2  laplacian1d:5
/// shift_generator:16  random_sectorial:8,1.0,100,42  zero_padded:1,diag:1,2+i
inline cmat generate(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string name(spec.substr(0, colon));
  const std::string_view rest = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
  auto ints = [&](const std::string& x) {
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(x, &used);
    } catch (...) {
      used = 0;
    }
    if (used == 0 || used != x.size()) throw Error(ErrorCode::BadSpec, "bad integer '" + x + "' in " + std::string(spec));
    return v;
  };
  auto args = split(rest, ',');
  auto need = [&](std::size_t n) {
    if (rest.empty() || args.size() != n)
      throw Error(ErrorCode::BadSpec, name + " takes " + std::to_string(n) + " argument(s)");
  };
  if (name == "diag") {
    if (rest.empty()) throw Error(ErrorCode::BadSpec, "diag needs values");
    std::vector<cplx> v;
    for (const auto& a : args) v.push_back(parse_complex(a));
    return diag(v);
  }
  if (name == "jordan") {
    need(2);
    return jordan(parse_complex(args[0]), int(ints(args[1])));
  }
  if (name == "laplacian1d") {
    need(1);
    return laplacian1d(int(ints(args[0])));
  }
  if (name == "shift_generator") {
    need(1);
    return shift_generator(int(ints(args[0])));
  }
  if (name == "random_sectorial") {
    need(4);
    const long seed = ints(args[3]);
    if (seed < 0) throw Error(ErrorCode::BadSpec, "seed must be nonnegative");
    return random_sectorial(int(ints(args[0])), parse_complex(args[1]).real(), parse_complex(args[2]).real(),
                            std::uint64_t(seed));
  }
  if (name == "zero_padded") {
    const auto comma = rest.find(',');
    if (comma == std::string_view::npos) throw Error(ErrorCode::BadSpec, "zero_padded needs k,spec");
    return zero_padded(generate(rest.substr(comma + 1)), int(ints(std::string(rest.substr(0, comma)))));
  }
  throw Error(ErrorCode::BadSpec, "unknown matrix generator '" + name + "'");
}

}  // namespace gen
}  // namespace sectorial
