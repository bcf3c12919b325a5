#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "sectorial/measures.hpp"

using namespace sectorial;
using oracle::cplx;

namespace {

const double kPi = std::acos(-1.0);

RadonMeasure inv_sqrt_over_pi() { return RadonMeasure::of(density::power_law(0.5, 0.0, 1.0 / kPi)); }

}  // namespace

TEST(TotalVariation, UnitAtom) {
  auto v = total_variation(RadonMeasure::dirac(1.0), 1e-12);
  EXPECT_DOUBLE_EQ(v.tv, 1.0);
}

TEST(TotalVariation, LebesgueUnitInterval) {
  auto v = total_variation(RadonMeasure::of(density::lebesgue(0.0, 1.0)), 1e-12);
  EXPECT_NEAR(v.tv, 1.0, 1e-12);
}

TEST(TotalVariation, ExponentialDensity) {
  auto v = total_variation(RadonMeasure::of(density::exp_decay(1.0)), 1e-10);
  EXPECT_NEAR(v.tv, 1.0, 1e-10);
  EXPECT_LE(v.err, 1e-10);
}

TEST(TotalVariation, CancellingAtomsMerge) {
  RadonMeasure m{{{1.0, 1.0}, {1.0, -1.0}, {2.0, {0.0, 2.0}}}, {}};
  EXPECT_DOUBLE_EQ(total_variation(m, 1e-12).tv, 2.0);
}

TEST(TotalVariation, MissingEnvelopeRejected) {
  Density d = density::power_law(0.5, 2.0);
  d.envelope.reset();
  EXPECT_THROW(total_variation(RadonMeasure::of(d), 1e-8), Error);
}

TEST(TotalVariation, DivergentTailIsInfinite) {
  auto v = total_variation(RadonMeasure::of(density::power_law(1.0, 0.0)), 1e-8);
  EXPECT_TRUE(std::isinf(v.tv));
}

TEST(IntegrateKernel, AtomStieltjes) {
  auto r = integrate_kernel(RadonMeasure::dirac(1.0), Kernel::stieltjes(1, 1.0), 1e-12);
  EXPECT_DOUBLE_EQ(r.value.real(), 0.5);
}

TEST(IntegrateKernel, LebesgueTclassIsLog2) {
  auto r = integrate_kernel(RadonMeasure::of(density::lebesgue(0.0, 1.0)), Kernel::tclass(1, 1.0), 1e-12);
  EXPECT_NEAR(r.value.real(), std::log(2.0), 1e-12);
  EXPECT_NEAR(r.value.imag(), 0.0, 1e-14);
  EXPECT_LE(r.err, 1e-12);
}

TEST(IntegrateKernel, InverseSqrtDensityGivesOne) {
  auto r = integrate_kernel(inv_sqrt_over_pi(), Kernel::stieltjes(1, 1.0), 1e-12);
  EXPECT_NEAR(r.value.real(), 1.0, 1e-13);
}

TEST(IntegrateKernel, InverseSqrtDensityByQuadrature) {
  // same density, but on [0, 1e300] so the closed form does not apply
  Density d = density::power_law(0.5, 0.0, 1.0 / kPi);
  d.hi = 1e300;
  d.envelope.reset();
  for (cplx z : {cplx(1.0), cplx(4.0), cplx(0.3, 2.0), std::polar(5.0, 2.3)}) {
    auto r = integrate_kernel(RadonMeasure::of(d), Kernel::stieltjes(1, z), 1e-10);
    EXPECT_LT(std::abs(r.value - std::pow(z, -0.5)), 1e-9) << z;
  }
}

TEST(IntegrateKernel, QuadratureMatchesIndependentOracle) {
  // s^(1/3 - 1) (1+s)^(-1/2): no closed form in the library
  Density d = density::power_law(1.0 / 3.0, 0.5, cplx(0.7, -0.2));
  for (cplx z : oracle::standard_grid()) {
    for (int n : {1, 2}) {
      auto r = integrate_kernel(RadonMeasure::of(d), Kernel::stieltjes(n, z), 1e-11);
      cplx want = oracle::integrate_halfline([&](double s) { return d(s) * std::pow(1.0 + z * s, -n); });
      EXPECT_LT(std::abs(r.value - want), 1e-9) << "z=" << z << " n=" << n;
      EXPECT_LT(std::abs(r.value - want), r.err + 1e-12) << "z=" << z << " n=" << n;
    }
  }
}

TEST(IntegrateKernel, ClassicKernelClosedForm) {
  // int_0^inf s^(-1/2) (z+s)^-1 ds = pi z^(-1/2)
  auto r = integrate_kernel(RadonMeasure::of(density::power_law(0.5, 0.0)), Kernel::classic(1.0, 4.0), 1e-12);
  EXPECT_NEAR(r.value.real(), kPi / 2.0, 1e-13);
}

TEST(IntegrateKernel, BetaClosedFormMatchesQuadrature) {
  Density b = density::beta(2, 1, 0.5, 3.0, cplx(1.0, 1.0));
  for (cplx z : {cplx(1.0), cplx(0.2, 3.0), std::polar(2.0, -2.0)}) {
    auto exact = integrate_kernel(RadonMeasure::of(b), Kernel::stieltjes(3, z), 1e-12);
    cplx want = oracle::integrate([&](double s) { return b(s) * std::pow(1.0 + z * s, -3); }, 0.5, 3.0);
    EXPECT_LT(std::abs(exact.value - want), 1e-13) << z;
  }
}

TEST(Embedded, TclassShapeCarriesTheFunction) {
  // beta(1, 2) on [0.5, 3] is z^3 / ((1+z/2)^2 (1+3z)) at order 3; re-expressed at order 5
  Density e = density::embedded(density::beta(1, 2, 0.5, 3.0, 2.0), 3, 5);
  ASSERT_EQ(e.kind, DensityKind::embedded);
  validate(e);
  for (cplx z : {cplx(1.0), cplx(0.3, 2.0)}) {
    const cplx want = 2.0 * std::pow(z, 3) / (std::pow(1.0 + 0.5 * z, 2) * (1.0 + 3.0 * z));
    auto k = [&](double s) { return e(s) * std::pow(z / (1.0 + z * s), 5); };
    const cplx quad = oracle::integrate(k, 0.5, 3.0) + oracle::integrate_tail(k, 3.0);
    EXPECT_LT(std::abs(quad - want), 1e-10) << z;
    EXPECT_LT(std::abs(integrate_kernel(RadonMeasure::of(e), Kernel::tclass(5, z), 1e-12).value - want), 1e-14);
  }
}

TEST(Embedded, StieltjesShapeCarriesTheFunction) {
  Density e = density::embedded(density::beta(2, 1, 0.5, 3.0), 3, 4, AtomForm::stieltjes);
  EXPECT_EQ(e.lo, 0.0);
  EXPECT_EQ(e.hi, 3.0);
  for (cplx z : {cplx(1.0), cplx(0.3, 2.0)}) {
    const cplx want = 1.0 / ((1.0 + 0.5 * z) * std::pow(1.0 + 3.0 * z, 2));
    auto k = [&](double s) { return e(s) * std::pow(1.0 + z * s, -4); };
    EXPECT_LT(std::abs(oracle::integrate(k, 0.0, 0.5) + oracle::integrate(k, 0.5, 3.0) - want), 1e-10) << z;
    EXPECT_LT(std::abs(integrate_kernel(RadonMeasure::of(e), Kernel::stieltjes(4, z), 1e-12).value - want), 1e-14);
  }
}

TEST(Embedded, PowerLawStaysClosed) {
  // z^(1/2) at order 1 has density s^(-1/2) / pi
  const double pi = std::acos(-1.0);
  Density e = density::embedded(density::power_law(0.5, 0.0, 1.0 / pi), 1, 3);
  EXPECT_EQ(e.kind, DensityKind::power_law);
  for (cplx z : {cplx(0.5), cplx(-1.0, 2.0)})
    EXPECT_LT(std::abs(integrate_kernel(RadonMeasure::of(e), Kernel::tclass(3, z), 1e-12).value - std::sqrt(z)), 1e-14);
}

TEST(IntegrateKernel, KernelSingularOnSupport) {
  EXPECT_THROW(integrate_kernel(RadonMeasure::dirac(2.0), Kernel::stieltjes(1, -0.5), 1e-10), Error);
  EXPECT_THROW(integrate_kernel(RadonMeasure::of(density::lebesgue(0.0, 3.0)), Kernel::stieltjes(1, -0.5), 1e-10),
               Error);
}

TEST(Laplace, DiracAtZero) {
  EXPECT_DOUBLE_EQ(laplace_transform(RadonMeasure::dirac(0.0), cplx(3.0, -7.0), 1e-12).real(), 1.0);
}

TEST(Laplace, ExponentialDensity) {
  EXPECT_NEAR(laplace_transform(RadonMeasure::of(density::exp_decay(1.0)), 1.0, 1e-12).real(), 0.5, 1e-14);
}

TEST(Laplace, DiracAtOneOnImaginaryAxis) {
  cplx v = laplace_transform(RadonMeasure::dirac(1.0), cplx(0.0, kPi), 1e-12);
  EXPECT_NEAR(v.real(), -1.0, 1e-15);
  EXPECT_NEAR(v.imag(), 0.0, 1e-15);
}

TEST(Laplace, PowerLawTailByQuadrature) {
  // c t^(-3/2) on [1, inf): only quadrature applies
  Density d = density::power_law(-0.5, 0.0, 0.3, 1.0);
  for (cplx z : {cplx(1.0), cplx(0.5, 3.0), cplx(0.05, 2.0)}) {
    cplx got = laplace_transform(RadonMeasure::of(d), z, 1e-10);
    cplx want = oracle::integrate_tail([&](double s) { return d(s) * std::exp(-s * z); }, 1.0);
    EXPECT_LT(std::abs(got - want), 1e-9) << z;
  }
}

TEST(Laplace, OscillatoryTailStallsHonestly) {
  // on the imaginary axis the certified truncation point is ~1e22 periods away
  Density d = density::power_law(-0.5, 0.0, 0.3, 1.0);
  try {
    laplace_transform(RadonMeasure::of(d), cplx(0.0, 2.0), 1e-10);
    FAIL() << "expected a stall";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::QuadratureStall);
  }
}

TEST(Integrability, AtomsAlwaysIntegrable) {
  for (double c : {0.0, 1.0, 1e6}) EXPECT_TRUE(check_integrability(RadonMeasure::dirac(c), 0.5).integrable);
}

TEST(Integrability, InverseSqrtAgainstOrderOne) {
  auto r = check_integrability(RadonMeasure::of(density::power_law(0.5, 0.0)), 1.0);
  EXPECT_TRUE(r.integrable);
  EXPECT_NEAR(r.bound, kPi, 1e-6);
  EXPECT_GE(r.bound, kPi - 1e-12);
}

TEST(Integrability, ConstantDensityFails) {
  EXPECT_FALSE(check_integrability(RadonMeasure::of(density::power_law(1.0, 0.0)), 1.0).integrable);
}

TEST(Validate, EnvelopeMustDominate) {
  Density d = density::power_law(0.5, 0.0);
  d.envelope->coeff = 0.5;
  EXPECT_THROW(validate(d), Error);
  EXPECT_NO_THROW(validate(density::power_law(0.5, 0.0)));
  EXPECT_THROW(validate(RadonMeasure::dirac(-1.0)), Error);
}

TEST(Property, Linearity) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> N(0.0, 1.0);
  RadonMeasure m1 = RadonMeasure::of(density::power_law(0.25, 0.75)) + RadonMeasure::dirac(2.0, {0.0, 1.0});
  RadonMeasure m2 = RadonMeasure::of(density::indicator_poly({1.0, -2.0, 0.5}, 0.1, 4.0));
  for (int trial = 0; trial < 10; ++trial) {
    cplx a(N(rng), N(rng)), b(N(rng), N(rng));
    cplx z = std::polar(std::exp(N(rng)), 2.0 * N(rng) / 3.0);
    Kernel k = Kernel::stieltjes(1 + trial % 2, z);
    auto i1 = integrate_kernel(m1, k, 1e-10), i2 = integrate_kernel(m2, k, 1e-10);
    auto i12 = integrate_kernel(a * m1 + b * m2, k, 1e-10);
    double bound = std::abs(a) * i1.err + std::abs(b) * i2.err + i12.err;
    EXPECT_LE(std::abs(i12.value - (a * i1.value + b * i2.value)), bound + 1e-14);
  }
}

TEST(Property, ErrorBoundHonesty) {
  Density d = density::power_law(0.3, 0.9, 1.0);
  for (cplx z : oracle::standard_grid()) {
    auto coarse = integrate_kernel(RadonMeasure::of(d), Kernel::stieltjes(1, z), 1e-5);
    auto fine = integrate_kernel(RadonMeasure::of(d), Kernel::stieltjes(1, z), 1e-12);
    EXPECT_LE(std::abs(fine.value - coarse.value), coarse.err) << z;
  }
}

TEST(Property, AtomsAreExact) {
  RadonMeasure m{{{0.0, 1.0}, {0.5, {2.0, -1.0}}, {3.0, -0.25}}, {}};
  cplx z(0.7, 1.3);
  auto r = integrate_kernel(m, Kernel::stieltjes(2, z), 1e-12);
  cplx want = 1.0 + cplx(2.0, -1.0) / ((1.0 + 0.5 * z) * (1.0 + 0.5 * z)) - 0.25 / ((1.0 + 3.0 * z) * (1.0 + 3.0 * z));
  EXPECT_LE(std::abs(r.value - want), 1e-14 * std::abs(want));
  EXPECT_LE(r.err, 1e-14 * 4.0);
  EXPECT_EQ(r.nodes, 0u);
}

TEST(Atomize, ReproducesStieltjesTransform) {
  Density d = density::power_law(0.5, 0.0, 1.0 / kPi);
  auto atoms = atomize(d, AtomForm::tclass, 1, 20, 4000);
  for (cplx z : oracle::standard_grid()) {
    cplx acc = 0.0;
    for (const auto& a : atoms) acc += a.weight * z / (1.0 + z * a.site);
    EXPECT_LT(oracle::rel(acc, std::sqrt(z)), 1e-11) << z;
  }
}

TEST(Atomize, BudgetEnforced) {
  EXPECT_THROW(atomize(density::power_law(0.5, 0.0), AtomForm::tclass, 1, 20, 100), Error);
}

TEST(Envelope, ExpConvolutionDominates) {
  Density inner = density::power_law(-0.5, 0.0, 1.0, 1.0);
  Density c = density::exp_conv(inner, 2.0);
  EXPECT_NO_THROW(validate(c));
  // e^-t * 1_[0,1] at s = 2 is e^-1 - e^-2
  Density c2 = density::exp_conv(density::lebesgue(0.0, 1.0), 1.0);
  EXPECT_NEAR(c2(2.0).real(), std::exp(-1.0) - std::exp(-2.0), 1e-13);
}

TEST(IntegrateKernel, ConstantDensityClosedFormMatchesOracle) {
  for (int n : {1, 2, 3})
    for (bool tf : {false, true})
      for (double hi : {2.5, kInf})
        for (cplx z : oracle::standard_grid()) {
          if (hi == kInf && n == 1) continue;
          Density d = density::indicator_poly({1.5}, 0.5, hi, cplx(1.0, -0.5));
          Kernel k = tf ? Kernel::tclass(n, z) : Kernel::stieltjes(n, z);
          auto f = [&](double s) { return d(s) * k(s); };
          const cplx want = hi == kInf ? oracle::integrate_tail([&](double s) { return f(s); }, 0.5)
                                       : oracle::integrate(f, 0.5, hi);
          const cplx got = integrate_kernel(RadonMeasure::of(d), k, 1e-13).value;
          EXPECT_LT(oracle::rel(got, want), 1e-11) << n << " " << tf << " " << hi << " " << z;
        }
}
