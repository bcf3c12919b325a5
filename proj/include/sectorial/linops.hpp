#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "sectorial/error.hpp"
#include "sectorial/quadrature.hpp"

namespace sectorial {

/// Dense matrix with its sectoriality data. Immutable after analyze().
struct SectorialMatrix {
  cmat A;
  std::vector<cplx> spectrum;
  double omega = 0.0;
  double M = 1.0;
  double norm = 0.0;
  double min_singular = 0.0;
  cmat kernel_basis;

  Eigen::Index dim() const { return A.rows(); }
  bool injective() const { return min_singular > 1e-12 * norm || dim() == 0; }
};

struct AnalyzeOptions {
  int decades = 8;  // s from 10^-decades to 10^decades
  int per_decade = 16;
};

namespace detail {

inline double resolvent_norm(const cmat& A, double s, const std::vector<cplx>* normal_spectrum) {
  if (normal_spectrum) {
    double m = 0.0;
    for (const cplx& l : *normal_spectrum) m = std::max(m, 1.0 / std::abs(1.0 + s * l));
    return m;
  }
  const Eigen::Index d = A.rows();
  cmat B = cmat::Identity(d, d) + s * A;
  Eigen::JacobiSVD<cmat> svd(B);
  const double smin = svd.singularValues()(d - 1);
  return smin > 0.0 ? 1.0 / smin : kInf;
}

}  // namespace detail

/// Spectrum, sector angle and the sampled constant M(A) = sup_s |(1+sA)^-1|. M is the
/// maximum over a logarithmic grid refined by golden section around the best point. For
/// normal A the norm is max |1+s lambda|^-1 over the spectrum; otherwise 1/sigma_min.
inline SectorialMatrix analyze(const cmat& A, const AnalyzeOptions& opt = {}) {
  if (A.rows() != A.cols()) throw Error(ErrorCode::BadParams, "matrix must be square");
  if (!A.allFinite()) throw Error(ErrorCode::BadParams, "matrix entries must be finite");
  SectorialMatrix op;
  op.A = A;
  const Eigen::Index d = A.rows();
  if (d == 0) return op;
  Eigen::JacobiSVD<cmat> svd(A, Eigen::ComputeFullV);
  op.norm = svd.singularValues()(0);
  op.min_singular = svd.singularValues()(d - 1);
  const double scale = std::max(op.norm, 1e-300);
  Eigen::Index rank = 0;
  while (rank < d && svd.singularValues()(rank) >= 1e-12 * scale) ++rank;
  op.kernel_basis = svd.matrixV().rightCols(d - rank);

  Eigen::ComplexEigenSolver<cmat> es(A, false);
  for (Eigen::Index i = 0; i < d; ++i) op.spectrum.push_back(es.eigenvalues()(i));
  for (const cplx& l : op.spectrum) {
    if (l.real() < -1e-12 * scale && std::abs(l.imag()) <= 1e-12 * scale)
      throw Error(ErrorCode::NotSectorial, "eigenvalue " + fmt(l.real()) + " on the negative axis");
    if (std::abs(l) > 1e-12 * scale) op.omega = std::max(op.omega, std::abs(std::arg(l)));
  }

  // for normal A, eigenvalues within round-off of the imaginary axis are put on it
  const bool normal = (A * A.adjoint() - A.adjoint() * A).norm() <= 1e-13 * scale * scale;
  std::vector<cplx> snapped = op.spectrum;
  for (cplx& l : snapped)
    if (std::abs(l.real()) <= 1e-12 * scale) l = cplx(0.0, l.imag());
  const std::vector<cplx>* ns = normal ? &snapped : nullptr;
  const int n = 2 * opt.decades * opt.per_decade;
  std::vector<double> logs(n + 1), vals(n + 1);
  for (int i = 0; i <= n; ++i) {
    logs[i] = -opt.decades + double(i) / opt.per_decade;
    vals[i] = detail::resolvent_norm(A, std::pow(10.0, logs[i]), ns);
  }
  // unbounded growth over the top two decades
  const double top = vals[n], before = vals[n - 2 * opt.per_decade];
  if (!std::isfinite(top) || top > 10.0 * before)
    throw Error(ErrorCode::NotSectorial, "resolvent norm grows without bound (" + fmt(before) + " -> " + fmt(top) + ")");
  const int best = int(std::max_element(vals.begin(), vals.end()) - vals.begin());
  double M = vals[best];
  if (best > 0 && best < n) {
    double a = logs[best - 1], b = logs[best + 1];
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    auto f = [&](double x) { return detail::resolvent_norm(A, std::pow(10.0, x), ns); };
    double c = b - g * (b - a), e = a + g * (b - a);
    double fc = f(c), fe = f(e);
    for (int it = 0; it < 40; ++it) {
      if (fc > fe) {
        b = e;
        e = c;
        fe = fc;
        c = b - g * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = e;
        fc = fe;
        e = a + g * (b - a);
        fe = f(e);
      }
    }
    M = std::max({M, fc, fe});
  }
  op.M = std::max(1.0, M);
  return op;
}

/// (z - A)^-1 by LU.
inline cmat resolvent(const SectorialMatrix& op, cplx z) {
  const double scale = std::max(op.norm, 1.0);
  for (const cplx& l : op.spectrum)
    if (std::abs(z - l) <= 1e-12 * scale) throw Error(ErrorCode::SpectrumHit, "z is in the spectrum");
  const Eigen::Index d = op.dim();
  cmat B = z * cmat::Identity(d, d) - op.A;
  Eigen::PartialPivLU<cmat> lu(B);
  cmat R = lu.solve(cmat::Identity(d, d));
  if (!R.allFinite()) throw Error(ErrorCode::SpectrumHit, "resolvent is numerically singular");
  return R;
}

/// e^-tA (scaling and squaring with Pade approximants).
inline cmat semigroup(const SectorialMatrix& op, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error(ErrorCode::DomainViolation, "semigroup needs finite t >= 0");
  const Eigen::Index d = op.dim();
  if (t == 0.0) return cmat::Identity(d, d);
  return cmat(-t * op.A).exp();
}

struct Quotient {
  cmat u;              // d0 x d, orthonormal rows spanning (ker A)^perp
  SectorialMatrix A0;  // u A u*
  bool degenerate() const { return u.rows() == 0; }
};

/// Operator induced on the orthogonal complement of ker A: A0 u = u A.
inline Quotient kernel_quotient(const SectorialMatrix& op) {
  const Eigen::Index d = op.dim();
  const Eigen::Index k = op.kernel_basis.cols();
  Quotient q;
  if (k == 0) {
    q.u = cmat::Identity(d, d);
    q.A0 = op;
    return q;
  }
  Eigen::JacobiSVD<cmat> svd(op.A, Eigen::ComputeFullV);
  q.u = svd.matrixV().leftCols(d - k).adjoint();
  if (d - k == 0) {
    q.A0.A = cmat(0, 0);
    return q;
  }
  q.A0 = analyze(q.u * op.A * q.u.adjoint());
  return q;
}

}  // namespace sectorial
