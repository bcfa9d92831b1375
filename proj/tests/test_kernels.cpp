#include <gtest/gtest.h>

#include <complex>

#include <cmath>
#include <numbers>
#include <vector>

#include "bellcv/kernels.hpp"

using namespace bellcv;

namespace {

constexpr double kPi = std::numbers::pi;

// Trapezoid rule on a uniform grid; spectrally accurate for rapidly decaying
// smooth integrands.
template <class F>
double integrate(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = 0.5 * (f(a) + f(b));
  for (int i = 1; i < n; ++i) s += f(a + i * h);
  return s * h;
}

// Five-point central difference.
template <class F>
double derivative(F&& f, double x, double h = 1e-3) {
  return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h);
}

// Explicit Hermite polynomials for low degree.
double hermite_explicit(int n, double x) {
  switch (n) {
    case 0: return 1;
    case 1: return 2 * x;
    case 2: return 4 * x * x - 2;
    case 3: return 8 * x * x * x - 12 * x;
    case 4: return 16 * std::pow(x, 4) - 48 * x * x + 12;
    case 5: return 32 * std::pow(x, 5) - 160 * std::pow(x, 3) + 120 * x;
  }
  return NAN;
}

}  // namespace

TEST(Hermite, MatchesExplicitPolynomials) {
  for (int n = 0; n <= 5; ++n)
    for (double x : {-2.3, -0.4, 0.0, 0.7, 1.5, 3.1})
      EXPECT_NEAR(hermite(n, x), hermite_explicit(n, x), 1e-11 * (1 + std::abs(hermite_explicit(n, x))));
  EXPECT_DOUBLE_EQ(hermite(3, 1.5), 9.0);
}

TEST(Hermite, RejectsBadDegree) {
  EXPECT_THROW(hermite(-1, 0.0), std::out_of_range);
  EXPECT_THROW(psi(kMaxDegree + 1, 0.0), std::out_of_range);
}

TEST(Psi, OrthonormalOnTheLine) {
  for (int n = 0; n <= 20; ++n) {
    for (int m = n; m <= 20; m += 3) {
      const double v = integrate([&](double x) { return psi(n, x) * psi(m, x); }, -14, 14, 5600);
      EXPECT_NEAR(v, n == m ? 1.0 : 0.0, 1e-12) << n << "," << m;
    }
  }
}

TEST(Psi, AgreesWithFactorialFormAtLowDegree) {
  for (int n = 0; n <= 5; ++n) {
    const double norm = 1 / std::sqrt(std::pow(2.0, n) * std::tgamma(n + 1) * std::sqrt(kPi));
    for (double x : {-1.7, 0.2, 2.4})
      EXPECT_NEAR(psi(n, x), norm * hermite_explicit(n, x) * std::exp(-x * x / 2), 1e-14);
  }
}

TEST(Psi, HighDegreeStaysFinite) {
  for (double x : {0.0, 5.0, 11.0, 30.0}) EXPECT_TRUE(std::isfinite(psi(60, x)));
  EXPECT_EQ(psi(3, 0.0), 0.0);
}

TEST(Psi, DerivativeMatchesFiniteDifference) {
  for (int n : {0, 1, 4, 9})
    for (double x : {-2.0, 0.3, 1.9})
      EXPECT_NEAR(psi_derivative(n, x), derivative([&](double t) { return psi(n, t); }, x), 1e-10);
}

TEST(Erfi, ReferenceValues) {
  EXPECT_EQ(erfi(0.0), 0.0);
  EXPECT_NEAR(erfi(1.0), 1.6504257587975428760, 1e-15);
  for (double x : {0.3, 1.7, 4.2}) EXPECT_DOUBLE_EQ(erfi(-x), -erfi(x));
}

TEST(Erfi, DerivativeIsScaledGaussian) {
  for (double x : {-2.5, -0.1, 0.8, 3.0}) {
    const double expected = 2 / std::sqrt(kPi) * std::exp(x * x);
    EXPECT_NEAR(derivative([](double t) { return erfi(t); }, x, 1e-4) / expected, 1.0, 1e-9);
  }
}

TEST(Erfi, BeyondCutoffIsAnError) {
  EXPECT_THROW(erfi(6.5), std::domain_error);
  EXPECT_NO_THROW(erfi(6.5, EvalSettings{7.0, 1e-17}));
}

TEST(Phi, OriginValue) {
  EXPECT_NEAR(phi(1, 0.0), -std::sqrt(2.0) * std::pow(kPi, 0.25), 1e-14);
  EXPECT_NEAR(phi(1, 0.0), -1.8827925275534296, 1e-14);
}

TEST(Phi, SolvesOscillatorEquation) {
  // -phi''/2 + x^2 phi/2 = (m + 1/2) phi, second derivative by finite differences.
  for (int m = 0; m <= 8; ++m) {
    for (double x : {-2.2, -0.6, 0.0, 1.1, 2.9}) {
      const double h = 1e-3;
      const double d2 = (-phi(m, x + 2 * h) + 16 * phi(m, x + h) - 30 * phi(m, x) + 16 * phi(m, x - h) -
                         phi(m, x - 2 * h)) /
                        (12 * h * h);
      const double residual = -d2 / 2 + x * x * phi(m, x) / 2 - (m + 0.5) * phi(m, x);
      EXPECT_NEAR(residual, 0.0, 2e-5 * (1 + std::abs(phi(m, x)))) << m << " " << x;
    }
  }
}

TEST(Phi, DerivativeMatchesFiniteDifference) {
  for (int m : {0, 1, 5, 12})
    for (double x : {-4.0, -1.3, 0.5, 3.7})
      EXPECT_NEAR(phi_derivative(m, x) / derivative([&](double t) { return phi(m, t); }, x, 1e-4), 1.0, 1e-8);
}

TEST(Phi, WronskianIsTwo) {
  for (int m = 0; m <= 12; ++m) {
    for (int k = 0; k <= 100; ++k) {
      const double x = -5 + 0.1 * k;
      EXPECT_NEAR(psi(m, x) * phi_derivative(m, x) - psi_derivative(m, x) * phi(m, x), 2.0, 1e-9);
    }
  }
}

TEST(Pattern, FrozenHighPrecisionValues) {
  struct Case {
    int n, m;
    double x, value;
  };
  // 25-digit references from arbitrary-precision evaluation of (psi_n phi_m)'.
  const Case cases[] = {
      {0, 0, 0.0, 2.0},
      {0, 0, 0.7, 0.570588638834151145746968},
      {1, 1, 7.5, -0.01931560195049199668196152},
      {0, 1, -2.2, 0.2713971890135420404773887},
      {3, 5, 1.3, 0.4863867185591541048783585},
      {12, 13, 8.0, -0.02187187949149780001881411},
      {13, 13, 6.5, -0.1152101823254448865338998},
      {2, 2, 12.0, -0.007323265131790780500632336},
      {0, 13, 3.0, 0.02152864528742633352096737},
  };
  for (const auto& c : cases) EXPECT_NEAR(pattern(c.n, c.m, c.x), c.value, 1e-13) << c.n << "," << c.m << " @ " << c.x;
}

TEST(Pattern, SymmetricInIndices) {
  for (int n = 0; n <= 6; ++n)
    for (int m = 0; m <= 6; ++m)
      for (double x : {-3.3, 0.1, 7.7}) EXPECT_EQ(pattern(n, m, x), pattern(m, n, x));
}

TEST(Pattern, MatchesProductDerivative) {
  for (int n : {0, 2, 5})
    for (int m : {0, 3, 6})
      for (double x : {-2.7, -0.3, 1.4, 3.9}) {
        const int lo = std::min(n, m), hi = std::max(n, m);
        const double fd = derivative([&](double t) { return psi(lo, t) * phi(hi, t); }, x, 1e-4);
        EXPECT_NEAR(pattern(n, m, x), fd, 1e-8) << n << "," << m << " @ " << x;
      }
}

TEST(Pattern, BoundedAndDecaying) {
  double worst = 0;
  for (int n = 0; n <= 13; ++n)
    for (int m = n; m <= 13; ++m)
      for (int k = 0; k <= 400; ++k) worst = std::max(worst, std::abs(pattern(n, m, -20 + 0.1 * k)));
  EXPECT_LE(worst, 10.0);
  EXPECT_LT(std::abs(pattern(4, 4, 200.0)), 1e-3);
  EXPECT_EQ(pattern(4, 4, 1e9), 0.0);
}

TEST(Pattern, ContinuousAcrossCutoff) {
  const EvalSettings s;
  for (int n = 0; n <= 13; n += 4)
    for (int m = n; m <= 13; m += 3) {
      const double below = pattern(n, m, std::nextafter(s.x_cutoff, 0.0));
      const double above = pattern(n, m, std::nextafter(s.x_cutoff, 10.0));
      EXPECT_NEAR(below, above, 1e-12);
      // shifting the switch-over point changes nothing
      EXPECT_NEAR(pattern(n, m, 6.4, EvalSettings{7.0, 1e-17}), pattern(n, m, 6.4), 1e-12);
    }
}

TEST(Pattern, FockReconstructionIdentity) {
  // (1/pi) int_0^pi e^{i(m-n)theta} dtheta int psi_j^2 f_nm dx = delta_nj delta_mj
  for (int j = 0; j <= 4; ++j)
    for (int n = 0; n <= 4; ++n)
      for (int m = 0; m <= 4; ++m) {
        const int k = m - n;
        const std::complex<double> angular = k == 0 ? 1.0 : (k % 2 == 0 ? 0.0 : std::complex<double>(0, 2.0 / (kPi * k)));
        const double radial = integrate([&](double x) { return psi(j, x) * psi(j, x) * pattern(n, m, x); }, -12, 12, 2400);
        EXPECT_NEAR(std::abs(angular * radial - ((n == j && m == j) ? 1.0 : 0.0)), 0.0, 1e-6) << j << n << m;
      }
}

TEST(SummedKernels, AreSumsOfPatternFunctions) {
  for (int level : {0, 2}) {
    for (double x : {-4.4, 0.0, 2.5, 9.0}) {
      double xy = 0, z = 0, zero = 0;
      for (int k = 0; k <= level; ++k) xy += pattern(2 * k, 2 * k + 1, x);
      for (int k = 0; k <= 2 * level + 1; ++k) {
        zero += pattern(k, k, x);
        z += (k % 2 ? -1 : 1) * pattern(k, k, x);
      }
      const auto v = summed_kernels(level, x);
      EXPECT_NEAR(v.xy, xy, 1e-14);
      EXPECT_NEAR(v.z, z, 1e-14);
      EXPECT_NEAR(v.zero, zero, 1e-14);
      EXPECT_EQ(summed_kernel(KernelClass::Z, level, x), v.z);
    }
  }
  EXPECT_THROW(summed_kernels(-1, 0.0), std::out_of_range);
  EXPECT_THROW(summed_kernels(40, 0.0), std::out_of_range);
}

TEST(KernelTable, InterpolationMatchesDirectEvaluation) {
  const KernelTable table(1);
  double worst = 0;
  for (int k = 0; k <= 2000; ++k) {
    const double x = -9.0 + 0.009137 * k;  // includes points outside the table
    const auto a = table(x);
    const auto b = summed_kernels(1, x);
    worst = std::max({worst, std::abs(a.xy - b.xy), std::abs(a.z - b.z), std::abs(a.zero - b.zero)});
  }
  EXPECT_LT(worst, 1e-9);
  EXPECT_EQ(table.level(), 1);
  EXPECT_THROW(KernelTable(0, -1.0), std::invalid_argument);
}
