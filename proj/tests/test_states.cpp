#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>

#include "bellcv/operators.hpp"
#include "bellcv/random.hpp"
#include "bellcv/states.hpp"

using namespace bellcv;

namespace {

FockMatrix annihilation(int dim) {
  FockMatrix a = FockMatrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

// Kronecker product of two single-mode operators in the n * D + m ordering.
FockMatrix kron(const FockMatrix& a, const FockMatrix& b) {
  const Eigen::Index d = a.rows();
  FockMatrix out(d * d, d * d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) out.block(i * d, j * d, d, d) = a(i, j) * b;
  return out;
}

FockMatrix quadrature(int dim, double phi) {
  const FockMatrix a = annihilation(dim);
  return (a * std::polar(1.0, -phi) + a.adjoint() * std::polar(1.0, phi)) / std::sqrt(2.0);
}

FockMatrix random_density(int dim, Rng& rng) {
  FockMatrix g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = cplx(rng.normal(), rng.normal());
  FockMatrix rho = g * g.adjoint();
  return rho / rho.trace();
}

// Loss through explicit Kraus operators E_k = sum_n sqrt(C(n,k) eta^{n-k} (1-eta)^k) |n-k><n|.
FockMatrix kraus_loss(const FockMatrix& rho, double eta) {
  const auto d = static_cast<int>(rho.rows());
  FockMatrix out = FockMatrix::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    FockMatrix e = FockMatrix::Zero(d, d);
    for (int n = k; n < d; ++n) {
      const double binom = std::tgamma(n + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(n - k + 1.0));
      e(n - k, n) = std::sqrt(binom * std::pow(eta, n - k) * std::pow(1 - eta, k));
    }
    out += e * rho * e.adjoint();
  }
  return out;
}

FockMatrix fock_projector(int dim, int n) {
  FockMatrix p = FockMatrix::Zero(dim, dim);
  p(n, n) = 1;
  return p;
}

}  // namespace

TEST(Tmsv, CoefficientsMatchSqueezingOperator) {
  // exp(z (ab - a^dag b^dag)) |00> on a truncated space as the oracle.
  const int d = 24;
  const double z = 0.5;
  const FockMatrix a = kron(annihilation(d), FockMatrix::Identity(d, d));
  const FockMatrix b = kron(FockMatrix::Identity(d, d), annihilation(d));
  const FockMatrix gen = z * (a * b - a.adjoint() * b.adjoint());
  const FockMatrix s = gen.exp();
  const auto c = tmsv_fock_coeffs(TmsvState(z, d - 1));
  for (int n = 0; n < 12; ++n) {
    EXPECT_NEAR(s(static_cast<Eigen::Index>(two_mode_index(n, n, d)), 0).real(), c[n], 1e-9) << n;
    EXPECT_NEAR(c[n], std::pow(-std::tanh(z), n) / std::cosh(z), 1e-15);
  }
}

TEST(Tmsv, TruncationDeficitIsAnError) {
  EXPECT_THROW(tmsv_fock_coeffs(TmsvState(3.0, 20)), std::invalid_argument);
  EXPECT_NO_THROW(tmsv_fock_coeffs(TmsvState(1.15, 60)));
  EXPECT_THROW(TmsvState(-0.1), std::invalid_argument);
}

TEST(Tmsv, AnalyticTensorMatchesFockEvaluation) {
  for (double z : {0.0, 0.25, 0.5, 0.8, 1.15}) {
    const TmsvState st(z, 60);
    const FockVector ket = tmsv_ket(st);
    for (int n = 0; n <= 5; ++n) {
      const auto exact = correlation_tensor_exact(ket, st.dim(), n);
      const auto closed = tmsv_tensor_analytic(z, n);
      for (Axis mu : kAllAxes)
        for (Axis nu : kAllAxes) EXPECT_NEAR(closed(mu, nu), exact(mu, nu), 1e-8) << z << " N=" << n;
      EXPECT_NEAR(closed.norm(), 1 - std::pow(std::tanh(z), 4 * (n + 1)), 1e-15);
    }
  }
}

TEST(Tmsv, InfiniteLevelLimit) {
  const auto t = tmsv_tensor_analytic(0.7, std::nullopt);
  EXPECT_EQ(t.norm(), 1.0);
  EXPECT_NEAR(t(Axis::Z, Axis::Zero), 1 / std::cosh(1.4), 1e-15);
  EXPECT_NEAR(t(Axis::X, Axis::X), -std::tanh(1.4), 1e-15);
  const auto big = tmsv_tensor_analytic(0.7, 400);
  EXPECT_NEAR(big(Axis::Y, Axis::Y), t(Axis::Y, Axis::Y), 1e-14);
}

TEST(Tmsv, CovarianceMatchesFockExpectations) {
  const int d = 40;
  const double z = 0.6;
  const FockVector ket = tmsv_ket(TmsvState(z, d - 1));
  const FockMatrix id = FockMatrix::Identity(d, d);
  for (double phi : {0.0, 0.4, 1.9})
    for (double theta : {0.0, 1.1, 2.8}) {
      const FockMatrix xa = kron(quadrature(d, phi), id);
      const FockMatrix yb = kron(id, quadrature(d, theta));
      const auto c = quadrature_covariance(TmsvState(z), phi, theta);
      EXPECT_NEAR(ket.dot(xa * (xa * ket)).real(), c.var_x, 1e-10);
      EXPECT_NEAR(ket.dot(yb * (yb * ket)).real(), c.var_y, 1e-10);
      EXPECT_NEAR(ket.dot(xa * (yb * ket)).real(), c.cov, 1e-10);
      EXPECT_NEAR(ket.dot(xa * ket).real(), 0.0, 1e-12);
    }
}

TEST(Sampler, SampleMomentsMatchCovariance) {
  const TmsvState st(0.8);
  const std::size_t n = 200000;
  for (double eta : {1.0, 0.9}) {
    Rng rng(1234);
    const auto samples = sample_quadratures(st, 0.3, 0.5, n, eta, rng);
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (const auto& [x, y] : samples) {
      sx += x;
      sy += y;
      sxx += x * x;
      syy += y * y;
      sxy += x * y;
    }
    const auto c = quadrature_covariance(st, 0.3, 0.5);
    const double vx = eta * c.var_x + (1 - eta) / 2;
    const double cxy = eta * c.cov;
    // 5 sigma bands using Gaussian fourth moments
    const double se_v = vx * std::sqrt(2.0 / n);
    const double se_c = std::sqrt((vx * vx + cxy * cxy) / n);
    EXPECT_NEAR(sx / n, 0.0, 5 * std::sqrt(vx / n));
    EXPECT_NEAR(sy / n, 0.0, 5 * std::sqrt(vx / n));
    EXPECT_NEAR(sxx / n, vx, 5 * se_v);
    EXPECT_NEAR(syy / n, vx, 5 * se_v);
    EXPECT_NEAR(sxy / n, cxy, 5 * se_c);
  }
}

TEST(Sampler, DeterministicGivenSeed) {
  Rng a(77), b(77);
  const auto s1 = sample_quadratures(TmsvState(0.5), 0.1, 0.2, 1000, 0.9, a);
  const auto s2 = sample_quadratures(TmsvState(0.5), 0.1, 0.2, 1000, 0.9, b);
  EXPECT_EQ(s1, s2);
  Rng c(1);
  EXPECT_THROW(sample_quadratures(TmsvState(0.5), 0, 0, 10, 0.0, c), std::invalid_argument);
  EXPECT_THROW(sample_quadratures(TmsvState(0.5), 0, 0, 0, 1.0, c), std::invalid_argument);
}

TEST(LossChannel, MatchesKrausOperators) {
  Rng rng(21);
  const FockMatrix rho = random_density(9, rng);
  for (double eta : {0.3, 0.9}) EXPECT_LE((loss_channel(rho, eta) - kraus_loss(rho, eta)).norm(), 1e-13);
}

TEST(LossChannel, BasicProperties) {
  Rng rng(4);
  const FockMatrix rho = random_density(10, rng);
  EXPECT_LE((loss_channel(rho, 1.0) - rho).norm(), 1e-15);
  EXPECT_NEAR(loss_channel(rho, 0.4).trace().real(), 1.0, 1e-13);
  EXPECT_LE((loss_channel(loss_channel(rho, 0.8), 0.5) - loss_channel(rho, 0.4)).norm(), 1e-13);
  const FockMatrix one = loss_channel(fock_projector(3, 1), 0.9);
  EXPECT_NEAR(one(0, 0).real(), 0.1, 1e-15);
  EXPECT_NEAR(one(1, 1).real(), 0.9, 1e-15);
  EXPECT_THROW(loss_channel(rho, 1.2), std::invalid_argument);
}

TEST(LossChannel, TwoModeBlockMatchesProductOfSingleModeChannels) {
  const int d = 8;
  Rng rng(8);
  FockVector ket(d * d);
  for (int i = 0; i < d * d; ++i) ket(i) = cplx(rng.normal(), rng.normal());
  ket /= ket.norm();
  const double eta = 0.7;
  // Oracle: Kraus operators E_k x E_l on the full two-mode density matrix.
  const FockMatrix rho = ket * ket.adjoint();
  FockMatrix oracle = FockMatrix::Zero(d * d, d * d);
  std::vector<FockMatrix> ek;
  for (int k = 0; k < d; ++k) {
    FockMatrix e = FockMatrix::Zero(d, d);
    for (int n = k; n < d; ++n) {
      const double binom = std::tgamma(n + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(n - k + 1.0));
      e(n - k, n) = std::sqrt(binom * std::pow(eta, n - k) * std::pow(1 - eta, k));
    }
    ek.push_back(e);
  }
  for (int k = 0; k < d; ++k)
    for (int l = 0; l < d; ++l) {
      const FockMatrix e = kron(ek[k], ek[l]);
      oracle += e * rho * e.adjoint();
    }
  const int out = 4;
  const FockMatrix block = loss_channel_two_mode_block(ket, d, eta, out);
  for (int n = 0; n < out; ++n)
    for (int np = 0; np < out; ++np)
      for (int m = 0; m < out; ++m)
        for (int mp = 0; mp < out; ++mp)
          EXPECT_NEAR(std::abs(block(static_cast<Eigen::Index>(two_mode_index(n, np, out)),
                                     static_cast<Eigen::Index>(two_mode_index(m, mp, out))) -
                               oracle(static_cast<Eigen::Index>(two_mode_index(n, np, d)),
                                      static_cast<Eigen::Index>(two_mode_index(m, mp, d)))),
                      0.0, 1e-13);
}

TEST(Moments, NormalOrderedDefinition) {
  Rng rng(17);
  const int d = 7;
  const FockMatrix rho = random_density(d, rng);
  const FockMatrix a = annihilation(d);
  const auto table = moments_from_state(rho, d - 1);
  FockMatrix adk = FockMatrix::Identity(d, d);
  for (int k = 0; k < d; ++k) {
    FockMatrix al = FockMatrix::Identity(d, d);
    for (int l = 0; l < d; ++l) {
      EXPECT_LE(std::abs(table(k, l) - (rho * adk * al).trace()), 1e-11) << k << "," << l;
      al = al * a;
    }
    adk = adk * a.adjoint();
  }
  EXPECT_NEAR(table(0, 0).real(), 1.0, 1e-14);
  EXPECT_THROW(moments_from_state(rho, d), std::invalid_argument);
}

TEST(Moments, EfficiencyScalingEqualsLoss) {
  Rng rng(5);
  const int d = 9;
  const FockMatrix rho = random_density(d, rng);
  for (double eta : {0.9, 0.55}) {
    const auto scaled = moments_at_efficiency(moments_from_state(rho, d - 1), eta);
    const auto lossy = moments_from_state(loss_channel(rho, eta), d - 1);
    EXPECT_LE((scaled.mu - lossy.mu).norm(), 1e-11);
    EXPECT_DOUBLE_EQ(scaled.eta, eta);
  }
}

TEST(Moments, ReconstructionInvertsMoments) {
  Rng rng(6);
  const int d = 8;
  const FockMatrix rho = random_density(d, rng);
  const auto table = moments_from_state(rho, d - 1);
  EXPECT_LE((reconstruct_from_moments(table, d - 1) - rho).norm(), 1e-11);
  for (double eta : {0.9, 0.6})
    EXPECT_LE((reconstruct_from_moments(moments_at_efficiency(table, eta), d - 1) - loss_channel(rho, eta)).norm(),
              1e-11);
}

TEST(Moments, FockOneAtReducedEfficiency) {
  const FockMatrix rho = fock_projector(6, 1);
  const auto rec = reconstruct_from_moments(moments_at_efficiency(moments_from_state(rho, 5), 0.9), 5);
  EXPECT_LE((rec - loss_channel(rho, 0.9)).norm(), 1e-10);
}

TEST(Moments, IncompleteTableMustConverge) {
  // mean photon number sinh^2(1.2) > 1 makes the alternating moment series diverge
  const TmsvState st(1.2, 60);
  const FockMatrix thermal = partial_trace_b(tmsv_ket(st), st.dim());
  const auto table = moments_from_state(thermal, 10);
  EXPECT_THROW(reconstruct_from_moments(table, 2, 8), std::runtime_error);
}

TEST(Moments, TmsvReducedStateThroughMoments) {
  const TmsvState st(0.5, 60);
  const FockMatrix reduced = partial_trace_b(tmsv_ket(st), st.dim());
  const auto c = tmsv_fock_coeffs(st);
  for (int n = 0; n < 10; ++n) EXPECT_NEAR(reduced(n, n).real(), c[n] * c[n], 1e-15);
  const auto table = moments_from_state(reduced, 60);
  for (double eta : {1.0, 0.9}) {
    const FockMatrix rec = reconstruct_from_moments(moments_at_efficiency(table, eta), 15);
    const FockMatrix oracle = loss_channel(reduced, eta).topLeftCorner(16, 16);
    EXPECT_LE((rec - oracle).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(TwoModeMoments, ReconstructionMatchesLossChannel) {
  const TmsvState st(0.5, 30);
  const FockVector ket = tmsv_ket(st);
  const TwoModeMoments moments(ket, st.dim());
  for (double eta : {1.0, 0.9}) {
    const FockMatrix a = reconstruct_two_mode_from_moments(moments, eta, 3, st.dim() - 1);
    const FockMatrix b = loss_channel_two_mode_block(ket, st.dim(), eta, 3);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-10) << eta;
  }
}

TEST(BellState, TensorIsDiagonal) {
  const auto t = bell_qubit_tensor();
  EXPECT_EQ(t(Axis::X, Axis::X), 1.0);
  EXPECT_EQ(t(Axis::Y, Axis::Y), 1.0);
  EXPECT_EQ(t(Axis::Z, Axis::Z), -1.0);
  EXPECT_EQ(t(Axis::Zero, Axis::Zero), 1.0);
  EXPECT_EQ(t(Axis::X, Axis::Y), 0.0);
}
