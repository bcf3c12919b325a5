#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sectorial/generators.hpp"
#include "sectorial/linops.hpp"

using namespace sectorial;

namespace {

const double kPi = std::acos(-1.0);

cmat mat2(cplx a, cplx b, cplx c, cplx d) {
  cmat A(2, 2);
  A << a, b, c, d;
  return A;
}

double opnorm(const cmat& X) { return X.rows() == 0 ? 0.0 : Eigen::JacobiSVD<cmat>(X).singularValues()(0); }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::BadParams;
}

std::vector<cmat> fixtures() {
  return {gen::diag({1.0, 4.0, 9.0}), gen::laplacian1d(5), gen::shift_generator(8), gen::jordan(1.0, 3),
          gen::random_sectorial(6, 1.0, 10.0, 1), gen::random_sectorial(6, 2.5, 50.0, 2),
          gen::zero_padded(gen::random_sectorial(4, 1.2, 5.0, 3), 1)};
}

}  // namespace

// ---------------------------------------------------------------- analyze

TEST(Analyze, Identity) {
  auto op = analyze(cmat::Identity(3, 3));
  EXPECT_EQ(op.M, 1.0);
  EXPECT_EQ(op.omega, 0.0);
  EXPECT_TRUE(op.injective());
  EXPECT_EQ(op.kernel_basis.cols(), 0);
}

TEST(Analyze, ImaginaryDiagonal) {
  // normal: |(1+sA)^-1| = (1+s^2)^-1/2 <= 1
  auto op = analyze(gen::diag({cplx(0, 1), cplx(0, -1)}));
  EXPECT_NEAR(op.omega, kPi / 2, 1e-15);
  EXPECT_NEAR(op.M, 1.0, 1e-12);
}

TEST(Analyze, NilpotentRejected) {
  EXPECT_EQ(code_of([] { analyze(mat2(0, 1, 0, 0)); }), ErrorCode::NotSectorial);
  EXPECT_EQ(code_of([] { analyze(gen::jordan(0.0, 2)); }), ErrorCode::NotSectorial);
}

TEST(Analyze, NegativeEigenvalueRejected) {
  EXPECT_EQ(code_of([] { analyze(gen::diag({-1.0, 1.0})); }), ErrorCode::NotSectorial);
}

TEST(Analyze, ShiftGeneratorAccepted) {
  auto op = analyze(gen::shift_generator(16));
  EXPECT_LE(op.M, 1.0 + 1e-9);
  EXPECT_NEAR(op.omega, kPi / 2, 1e-9);
  EXPECT_EQ(op.kernel_basis.cols(), 2);
  // eigenvalues i k for integer |k| < 8, with 0 twice (the Nyquist mode)
  std::vector<double> ks;
  for (cplx l : op.spectrum) {
    EXPECT_NEAR(l.real(), 0.0, 1e-12);
    EXPECT_NEAR(l.imag(), std::round(l.imag()), 1e-10);
    ks.push_back(std::round(l.imag()));
  }
  std::sort(ks.begin(), ks.end());
  std::vector<double> want;
  for (int k = -7; k <= 7; ++k) want.push_back(k);
  want.push_back(0.0);
  std::sort(want.begin(), want.end());
  EXPECT_EQ(ks, want);
}

TEST(Analyze, LaplacianSpectrum) {
  auto op = analyze(gen::laplacian1d(3));
  std::vector<double> re;
  for (cplx l : op.spectrum) re.push_back(l.real());
  std::sort(re.begin(), re.end());
  EXPECT_NEAR(re[0], 2.0 - std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(re[1], 2.0, 1e-14);
  EXPECT_NEAR(re[2], 2.0 + std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(op.M, 1.0, 1e-12);
}

TEST(Analyze, KernelBasis) {
  auto op = analyze(gen::diag({0.0, 1.0}));
  ASSERT_EQ(op.kernel_basis.cols(), 1);
  EXPECT_NEAR(std::abs(op.kernel_basis(0, 0)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(op.kernel_basis(1, 0)), 0.0, 1e-15);
  EXPECT_FALSE(op.injective());
}

TEST(Analyze, NonNormalConstantExceedsOne) {
  // (1+sA)^-1 = (1+s)^-1 [[1, -10s/(1+s)], [0, 1]] has norm about 2.6 at s = 1
  auto op = analyze(mat2(1, 10, 0, 1));
  EXPECT_GT(op.M, 1.1);
  for (double s : {0.1, 0.5, 1.0, 3.0, 100.0}) {
    cmat R = (cmat::Identity(2, 2) + s * op.A).inverse();
    EXPECT_LE(opnorm(R), op.M * (1.0 + 1e-9));
  }
}

TEST(Analyze, BadInput) {
  EXPECT_EQ(code_of([] { analyze(cmat::Zero(2, 3)); }), ErrorCode::BadParams);
  cmat A = cmat::Identity(2, 2);
  A(0, 1) = std::nan("");
  EXPECT_EQ(code_of([&] { analyze(A); }), ErrorCode::BadParams);
}

// ---------------------------------------------------------------- resolvent / semigroup

TEST(Resolvent, Scalar) {
  auto R = resolvent(analyze(gen::diag({1.0})), 2.0);
  EXPECT_NEAR(std::abs(R(0, 0) - 1.0), 0.0, 1e-15);
}

TEST(Resolvent, AtOrigin) {
  auto R = resolvent(analyze(gen::diag({1.0, 3.0})), 0.0);
  EXPECT_NEAR(std::abs(R(0, 0) + 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(R(1, 1) + 1.0 / 3.0), 0.0, 1e-15);
  EXPECT_EQ(std::abs(R(0, 1)), 0.0);
}

TEST(Resolvent, SpectrumHit) {
  EXPECT_EQ(code_of([] { resolvent(analyze(cmat::Identity(2, 2)), 1.0); }), ErrorCode::SpectrumHit);
}

TEST(Semigroup, Zero) {
  auto op = analyze(gen::random_sectorial(4, 1.0, 10.0, 7));
  EXPECT_EQ(semigroup(op, 0.0), cmat::Identity(4, 4));
}

TEST(Semigroup, Diagonal) {
  auto T = semigroup(analyze(gen::diag({1.0, 2.0})), 1.0);
  EXPECT_NEAR(std::abs(T(0, 0) - std::exp(-1.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(T(1, 1) - std::exp(-2.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(T(0, 1)), 0.0, 1e-16);
}

TEST(Semigroup, JordanBlock) {
  // e^-(I+N) = e^-1 (I - N)
  auto T = semigroup(analyze(gen::jordan(1.0, 2)), 1.0);
  const double e = std::exp(-1.0);
  EXPECT_LT((T - mat2(e, -e, 0, e)).norm(), 1e-15);
}

TEST(Semigroup, NegativeTimeRejected) {
  EXPECT_EQ(code_of([] { semigroup(analyze(cmat::Identity(1, 1)), -1.0); }), ErrorCode::DomainViolation);
}

// ---------------------------------------------------------------- quotient

TEST(Quotient, InjectiveIsUnitary) {
  auto op = analyze(gen::random_sectorial(5, 1.0, 10.0, 11));
  auto q = kernel_quotient(op);
  EXPECT_EQ(q.u.rows(), 5);
  EXPECT_LT((q.u * q.u.adjoint() - cmat::Identity(5, 5)).norm(), 1e-14);
  EXPECT_LT((q.A0.A - q.u * op.A * q.u.adjoint()).norm(), 1e-14);
}

TEST(Quotient, DiagZeroOne) {
  auto q = kernel_quotient(analyze(gen::diag({0.0, 1.0})));
  ASSERT_EQ(q.u.rows(), 1);
  ASSERT_EQ(q.u.cols(), 2);
  EXPECT_NEAR(std::abs(q.u(0, 0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(q.u(0, 1)), 1.0, 1e-15);
  ASSERT_EQ(q.A0.dim(), 1);
  EXPECT_NEAR(std::abs(q.A0.A(0, 0) - 1.0), 0.0, 1e-15);
}

TEST(Quotient, ZeroOperatorIsDegenerate) {
  auto q = kernel_quotient(analyze(cmat::Zero(1, 1)));
  EXPECT_TRUE(q.degenerate());
  EXPECT_EQ(q.A0.dim(), 0);
}

TEST(QuotientProperty, IntertwinesAndIsInjective) {
  for (int k : {1, 2}) {
    for (std::uint64_t seed : {21u, 22u, 23u}) {
      auto op = analyze(gen::zero_padded(gen::random_sectorial(4, 1.3, 20.0, seed), k));
      auto q = kernel_quotient(op);
      EXPECT_EQ(q.u.rows(), 4);
      EXPECT_LE((q.u * op.A - q.A0.A * q.u).norm(), 1e-12 * op.norm);
      EXPECT_TRUE(q.A0.injective());
    }
  }
}

// ---------------------------------------------------------------- properties

TEST(LinopsProperty, ResolventIdentity) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-4.0, 4.0);
  for (const auto& A : fixtures()) {
    auto op = analyze(A);
    for (int i = 0; i < 10; ++i) {
      const cplx z(U(rng), U(rng)), w(U(rng), U(rng));
      cmat Rz = resolvent(op, z), Rw = resolvent(op, w);
      cmat lhs = Rz - Rw, rhs = (w - z) * Rz * Rw;
      EXPECT_LE((lhs - rhs).norm(), 1e-10 * std::max(1.0, rhs.norm()));
    }
  }
}

TEST(LinopsProperty, SemigroupLaw) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(0.0, 5.0);
  for (const auto& A : fixtures()) {
    auto op = analyze(A);
    for (int i = 0; i < 10; ++i) {
      const double t = U(rng), s = U(rng);
      cmat Tts = semigroup(op, t + s);
      EXPECT_LE((semigroup(op, t) * semigroup(op, s) - Tts).norm(), 1e-10 * opnorm(Tts));
    }
  }
}

TEST(LinopsProperty, StrongConvergenceAtZero) {
  for (const auto& A : fixtures()) {
    auto op = analyze(A);
    const Eigen::Index d = op.dim();
    for (int n = 1; n <= 3; ++n) {
      double prev = kInf;
      for (int k = 1; k <= 8; ++k) {
        const double s = std::pow(10.0, -k);
        cmat R = (cmat::Identity(d, d) + s * op.A).inverse();
        cmat P = cmat::Identity(d, d);
        for (int j = 0; j < n; ++j) P = P * R;
        const double dev = opnorm(P - cmat::Identity(d, d));
        EXPECT_LT(dev, prev);
        prev = dev;
      }
    }
  }
}

TEST(LinopsProperty, SampledBounds) {
  for (const auto& A : fixtures()) {
    auto op = analyze(A);
    const Eigen::Index d = op.dim();
    EXPECT_GE(op.M, 1.0);
    for (const cplx& l : op.spectrum)
      if (std::abs(l) > 1e-12 * op.norm) {
        EXPECT_LE(std::abs(std::arg(l)), op.omega + 1e-15);
      }
    for (int i = -32; i <= 32; ++i) {
      const double s = std::pow(10.0, i / 4.0);
      // the inverse itself carries rounding of order eps * cond(1+sA)
      const double slack = 1.0 + 1e-9 + 100.0 * kEps * (1.0 + s * op.norm) * op.M;
      cmat R = (cmat::Identity(d, d) + s * op.A).inverse();
      EXPECT_LE(opnorm(R), op.M * slack) << s;
      EXPECT_LE(opnorm(s * op.A * R), (1.0 + op.M) * slack) << s;
      for (double delta : {0.1, 1.0}) {
        cmat Rd = ((1.0 + delta * s) * cmat::Identity(d, d) + s * op.A).inverse();
        EXPECT_LE(opnorm(Rd), op.M / (1.0 + delta * s) * slack) << s << " " << delta;
      }
    }
  }
}

// ---------------------------------------------------------------- generators

TEST(Generators, DiagAndLaplacian) {
  EXPECT_EQ(gen::generate("diag:1,2"), gen::diag({1.0, 2.0}));
  cmat L = gen::generate("laplacian1d:3");
  EXPECT_EQ(L(0, 0), 2.0);
  EXPECT_EQ(L(0, 1), -1.0);
  EXPECT_EQ(L(1, 0), -1.0);
  EXPECT_EQ(L(0, 2), 0.0);
}

TEST(Generators, ComplexLiterals) {
  EXPECT_EQ(gen::parse_complex("2+i"), cplx(2, 1));
  EXPECT_EQ(gen::parse_complex("2-0.5i"), cplx(2, -0.5));
  EXPECT_EQ(gen::parse_complex("-i"), cplx(0, -1));
  EXPECT_EQ(gen::parse_complex("3i"), cplx(0, 3));
  EXPECT_EQ(gen::parse_complex("1e-3"), cplx(1e-3, 0));
  EXPECT_EQ(gen::parse_complex("1e-3+2e+1i"), cplx(1e-3, 20));
  EXPECT_EQ(code_of([] { gen::parse_complex("2x"); }), ErrorCode::BadSpec);
}

TEST(Generators, ZeroPaddedNested) {
  cmat A = gen::generate("zero_padded:1,diag:1,2+i");
  ASSERT_EQ(A.rows(), 3);
  EXPECT_EQ(A(1, 1), cplx(2, 1));
  EXPECT_EQ(A(2, 2), 0.0);
  EXPECT_EQ(analyze(A).kernel_basis.cols(), 1);
}

TEST(Generators, BadSpecs) {
  for (const char* s : {"nope:1", "diag", "jordan:1", "laplacian1d:x", "random_sectorial:4,1,10", "zero_padded:1"})
    EXPECT_EQ(code_of([&] { gen::generate(s); }), ErrorCode::BadSpec) << s;
  EXPECT_EQ(code_of([] { gen::random_sectorial(4, 4.0, 10.0, 1); }), ErrorCode::BadSpec);
}

TEST(Generators, RandomSectorialDeterministicAndInSector) {
  cmat A = gen::generate("random_sectorial:8,1.0,100,42");
  cmat B = gen::generate("random_sectorial:8,1.0,100,42");
  EXPECT_EQ(A, B);
  EXPECT_NE(A, gen::generate("random_sectorial:8,1.0,100,43"));
  auto op = analyze(A);
  EXPECT_LT(op.omega, 1.0);
  EXPECT_TRUE(op.injective());
}

TEST(Generators, FixturesPassAnalyze) {
  for (const auto& A : fixtures()) EXPECT_NO_THROW(analyze(A));
}
