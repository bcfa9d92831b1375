#ifndef BELLCV_STATES_HPP
#define BELLCV_STATES_HPP

// Two-mode squeezed vacuum |Psi> = S(z)|00>, S(z) = exp(z (ab - a^dag b^dag)),
// in the representations needed downstream, plus the detector-loss model.
//
// Conventions:
//   x_phi = (a e^{-i phi} + a^dag e^{i phi}) / sqrt(2)   (vacuum variance 1/2)
//   |Psi> = sum_n c_n |n>|n>,  c_n = sech(z) (-tanh z)^n
//   moments mu[k][l] = Tr[rho a^dag^k a^l]  (normal order)

#include <quadmath.h>

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "bellcv/operators.hpp"
#include "bellcv/random.hpp"

namespace bellcv {

class TmsvState {
 public:
  explicit TmsvState(double z, int n_max = 60) : z_(z), n_max_(n_max) {
    if (!(z >= 0)) throw std::invalid_argument("TmsvState: squeezing z must be >= 0");
    if (n_max < 1) throw std::invalid_argument("TmsvState: n_max must be >= 1");
  }
  double z() const { return z_; }
  int n_max() const { return n_max_; }
  int dim() const { return n_max_ + 1; }

 private:
  double z_;
  int n_max_;
};

/// Schmidt coefficients c_0..c_{n_max}. Throws when the truncation loses more
/// than 1e-6 of the norm.
inline std::vector<double> tmsv_fock_coeffs(const TmsvState& state) {
  const double t = -std::tanh(state.z());
  std::vector<double> c(static_cast<std::size_t>(state.n_max()) + 1);
  double amp = 1.0 / std::cosh(state.z());
  double norm = 0;
  for (auto& cn : c) {
    cn = amp;
    norm += amp * amp;
    amp *= t;
  }
  if (1.0 - norm > 1e-6) {
    throw std::invalid_argument("tmsv_fock_coeffs: norm deficit " + std::to_string(1.0 - norm) +
                                " at n_max = " + std::to_string(state.n_max()) + "; increase n_max");
  }
  return c;
}

/// Two-mode ket sum_n c_n |n, n> in the composite index n * D + m.
inline FockVector tmsv_ket(const TmsvState& state) {
  const auto c = tmsv_fock_coeffs(state);
  const int d = state.dim();
  FockVector ket = FockVector::Zero(static_cast<Eigen::Index>(d) * d);
  for (int n = 0; n < d; ++n) ket(static_cast<Eigen::Index>(two_mode_index(n, n, d))) = c[n];
  return ket;
}

/// Closed-form correlation tensor of the squeezed vacuum:
///   T3 = w diag(-tanh 2z, tanh 2z, 1),  T[0][0] = w,  w = 1 - tanh^{4(N+1)} z,
///   T[Z][0] = T[0][Z] = w / cosh 2z,  all other entries zero; w = 1 for N = inf.
inline CorrelationTensor tmsv_tensor_analytic(double z, const Level& level) {
  if (!(z >= 0)) throw std::invalid_argument("tmsv_tensor_analytic: z must be >= 0");
  if (level && *level < 0) throw std::invalid_argument("tmsv_tensor_analytic: level must be >= 0");
  const double w = level ? 1.0 - std::pow(std::tanh(z), 4.0 * (*level + 1)) : 1.0;
  const double t = std::tanh(2 * z);
  CorrelationTensor out;
  out.level = level;
  out.provenance = Provenance::Analytic;
  out(Axis::X, Axis::X) = -w * t;
  out(Axis::Y, Axis::Y) = w * t;
  out(Axis::Z, Axis::Z) = w;
  out(Axis::Zero, Axis::Zero) = w;
  out(Axis::Z, Axis::Zero) = w / std::cosh(2 * z);
  out(Axis::Zero, Axis::Z) = w / std::cosh(2 * z);
  return out;
}

struct QuadratureCovariance {
  double var_x = 0.5;
  double var_y = 0.5;
  double cov = 0;
};

/// Covariance of (x_phi, y_theta): var = cosh(2z)/2, cov = -sinh(2z)/2 cos(phi + theta).
inline QuadratureCovariance quadrature_covariance(const TmsvState& state, double phi, double theta) {
  const double z2 = 2 * state.z();
  return {std::cosh(z2) / 2, std::cosh(z2) / 2, -std::sinh(z2) / 2 * std::cos(phi + theta)};
}

/// Draws (x, y) pairs from a zero-mean bivariate Gaussian by a 2x2 Cholesky
/// factor; with efficiency eta < 1 each coordinate becomes
/// sqrt(eta) x + sqrt(1 - eta) v with v an independent vacuum deviate.
class QuadratureSampler {
 public:
  QuadratureSampler(const QuadratureCovariance& c, double eta) : eta_(eta) {
    if (!(eta > 0 && eta <= 1)) throw std::invalid_argument("QuadratureSampler: eta must lie in (0, 1]");
    if (!(c.var_x > 0) || !(c.var_x * c.var_y - c.cov * c.cov > 0)) {
      throw std::invalid_argument("QuadratureSampler: covariance not positive definite");
    }
    l11_ = std::sqrt(c.var_x);
    l21_ = c.cov / l11_;
    l22_ = std::sqrt(c.var_y - l21_ * l21_);
    signal_ = std::sqrt(eta);
    noise_ = std::sqrt((1 - eta) / 2);
  }

  std::pair<double, double> operator()(Rng& rng) const {
    const double g1 = rng.normal();
    const double g2 = rng.normal();
    double x = l11_ * g1;
    double y = l21_ * g1 + l22_ * g2;
    if (eta_ < 1) {
      x = signal_ * x + noise_ * rng.normal();
      y = signal_ * y + noise_ * rng.normal();
    }
    return {x, y};
  }

 private:
  double eta_;
  double l11_ = 0, l21_ = 0, l22_ = 0;
  double signal_ = 1, noise_ = 0;
};

inline std::vector<std::pair<double, double>> sample_quadratures(const TmsvState& state, double phi, double theta,
                                                                 std::size_t count, double eta, Rng& rng) {
  if (count == 0) throw std::invalid_argument("sample_quadratures: count must be positive");
  const QuadratureSampler sampler(quadrature_covariance(state, phi, theta), eta);
  std::vector<std::pair<double, double>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sampler(rng));
  return out;
}

namespace detail {

inline void check_eta(double eta, const char* who) {
  if (!(eta > 0 && eta <= 1)) throw std::invalid_argument(std::string(who) + ": eta must lie in (0, 1]");
}

/// sqrt(C(n+k, k)) eta^{n/2} (1-eta)^{k/2}: amplitude of the loss Kraus operator
/// taking |n+k> to |n>.
inline double loss_amplitude(int n, int k, double eta) {
  const double log_binom = std::lgamma(n + k + 1.0) - std::lgamma(n + 1.0) - std::lgamma(k + 1.0);
  const double log_loss = k == 0 ? 0.0 : k * std::log1p(-eta);
  if (eta == 1.0 && k > 0) return 0.0;
  return std::exp(0.5 * (log_binom + n * std::log(eta) + log_loss));
}

}  // namespace detail

/// Pure-loss channel of transmissivity eta on a single-mode density matrix:
///   rho'_{nm} = sum_k sqrt(C(n+k,k) C(m+k,k)) eta^{(n+m)/2} (1-eta)^k rho_{n+k,m+k}.
inline FockMatrix loss_channel(const FockMatrix& rho, double eta) {
  detail::check_eta(eta, "loss_channel");
  if (rho.rows() != rho.cols()) throw std::invalid_argument("loss_channel: matrix is not square");
  const int d = static_cast<int>(rho.rows());
  FockMatrix out = FockMatrix::Zero(d, d);
  for (int n = 0; n < d; ++n) {
    for (int m = 0; m < d; ++m) {
      cplx acc{};
      for (int k = 0; n + k < d && m + k < d; ++k) {
        acc += detail::loss_amplitude(n, k, eta) * detail::loss_amplitude(m, k, eta) * rho(n + k, m + k);
      }
      out(n, m) = acc;
    }
  }
  return out;
}

/// Loss on both modes of a pure two-mode ket (single-mode dimension `dim`),
/// returning the leading block with both photon numbers below `out_dim`.
inline FockMatrix loss_channel_two_mode_block(const FockVector& ket, int dim, double eta, int out_dim) {
  detail::check_eta(eta, "loss_channel_two_mode_block");
  if (ket.size() != static_cast<Eigen::Index>(dim) * dim || out_dim > dim || out_dim < 1) {
    throw std::invalid_argument("loss_channel_two_mode_block: bad dimensions");
  }
  const auto amp = [&](int n, int k) { return detail::loss_amplitude(n, k, eta); };
  const auto psi = [&](int a, int b) { return ket(static_cast<Eigen::Index>(two_mode_index(a, b, dim))); };
  const Eigen::Index block = static_cast<Eigen::Index>(out_dim) * out_dim;
  FockMatrix out = FockMatrix::Zero(block, block);
  for (int n = 0; n < out_dim; ++n)
    for (int np = 0; np < out_dim; ++np)
      for (int m = 0; m < out_dim; ++m)
        for (int mp = 0; mp < out_dim; ++mp) {
          cplx acc{};
          for (int k = 0; n + k < dim && m + k < dim; ++k) {
            const double ak = amp(n, k) * amp(m, k);
            if (ak == 0) continue;
            for (int kp = 0; np + kp < dim && mp + kp < dim; ++kp) {
              acc += ak * amp(np, kp) * amp(mp, kp) * psi(n + k, np + kp) * std::conj(psi(m + k, mp + kp));
            }
          }
          out(static_cast<Eigen::Index>(two_mode_index(n, np, out_dim)),
              static_cast<Eigen::Index>(two_mode_index(m, mp, out_dim))) = acc;
        }
  return out;
}

/// Normal-ordered moments mu[k][l] = Tr[rho a^dag^k a^l] for k, l <= k_max.
struct MomentTable {
  FockMatrix mu;
  double eta = 1.0;
  /// Dimension of the state the moments came from. Moments with index
  /// >= source_dim vanish identically, so a table with k_max >= source_dim-1
  /// is complete.
  int source_dim = 0;

  int k_max() const { return static_cast<int>(mu.rows()) - 1; }
  bool complete() const { return k_max() >= source_dim - 1; }
  cplx operator()(int k, int l) const { return mu(k, l); }
};

inline MomentTable moments_from_state(const FockMatrix& rho, int k_max) {
  if (rho.rows() != rho.cols()) throw std::invalid_argument("moments_from_state: matrix is not square");
  const int d = static_cast<int>(rho.rows());
  if (k_max < 0 || k_max > d - 1) {
    throw std::invalid_argument("moments_from_state: k_max = " + std::to_string(k_max) +
                                " exceeds truncation margin (dimension " + std::to_string(d) + ")");
  }
  // (a^l)_{j-l, j} = sqrt(j!/(j-l)!); mu[k][l] = sum_j <j| rho a^dag^k a^l |j>
  //   = sum_j rho_{j, j-l+k} sqrt(j!/(j-l)!) sqrt((j-l+k)!/(j-l)!).
  MomentTable t;
  t.mu = FockMatrix::Zero(k_max + 1, k_max + 1);
  t.source_dim = d;
  for (int k = 0; k <= k_max; ++k) {
    for (int l = 0; l <= k_max; ++l) {
      cplx acc{};
      for (int j = l; j < d; ++j) {
        const int c = j - l + k;
        if (c >= d) break;
        const double w = std::exp(0.5 * (std::lgamma(j + 1.0) + std::lgamma(c + 1.0)) - std::lgamma(j - l + 1.0));
        acc += rho(j, c) * w;
      }
      t.mu(k, l) = acc;
    }
  }
  return t;
}

/// Moments as seen by a detector of efficiency eta: mu[k][l] eta^{(k+l)/2}.
inline MomentTable moments_at_efficiency(const MomentTable& ideal, double eta) {
  detail::check_eta(eta, "moments_at_efficiency");
  MomentTable t = ideal;
  t.eta = ideal.eta * eta;
  for (int k = 0; k <= t.k_max(); ++k)
    for (int l = 0; l <= t.k_max(); ++l) t.mu(k, l) *= std::pow(eta, 0.5 * (k + l));
  return t;
}

/// Density matrix from normal-ordered moments,
///   rho_{n,m} = 1/sqrt(n! m!) sum_i (-1)^i / i! mu[m+i][n+i],
/// accumulated in binary128. The series is cut at i_max or where the table
/// ends; a truncated tail whose last term exceeds `tol` is an error.
inline FockMatrix reconstruct_from_moments(const MomentTable& table, int n_max, int i_max = 40, double tol = 1e-12) {
  if (n_max < 0 || n_max > table.k_max()) {
    throw std::invalid_argument("reconstruct_from_moments: n_max outside the moment table");
  }
  FockMatrix rho = FockMatrix::Zero(n_max + 1, n_max + 1);
  for (int n = 0; n <= n_max; ++n) {
    for (int m = 0; m <= n_max; ++m) {
      __float128 re = 0, im = 0;
      double last = 0;
      int i = 0;
      for (; i <= i_max && n + i <= table.k_max() && m + i <= table.k_max(); ++i) {
        const double scale = std::exp(-std::lgamma(i + 1.0) - 0.5 * (std::lgamma(n + 1.0) + std::lgamma(m + 1.0)));
        const cplx term = (i % 2 == 0 ? 1.0 : -1.0) * scale * table(m + i, n + i);
        re += term.real();
        im += term.imag();
        last = std::abs(term);
      }
      const bool table_exhausted = n + i > table.k_max() || m + i > table.k_max();
      if (!(table_exhausted && table.complete()) && last > tol) {
        throw std::runtime_error("reconstruct_from_moments: series not converged at rho(" + std::to_string(n) + "," +
                                 std::to_string(m) + "), last term " + std::to_string(last));
      }
      rho(n, m) = cplx(static_cast<double>(re), static_cast<double>(im));
    }
  }
  return rho;
}

/// Two-mode normal-ordered moments Tr[rho a^dag^k b^dag^kp a^l b^lp] of a pure
/// ket, computed in binary128 and memoized. Only nonzero amplitudes are visited.
class TwoModeMoments {
 public:
  using quad = __float128;

  TwoModeMoments(const FockVector& ket, int dim) : dim_(dim), ket_(ket) {
    if (ket.size() != static_cast<Eigen::Index>(dim) * dim) {
      throw std::invalid_argument("TwoModeMoments: ket is not of size D^2");
    }
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b)
        if (amp(a, b) != cplx{}) support_.emplace_back(a, b);
    log_fact_.resize(static_cast<std::size_t>(dim) + 1);
    for (int i = 0; i <= dim; ++i) log_fact_[i] = lgammaq(quad(i + 1));
  }

  int dim() const { return dim_; }

  /// <a^k b^kp psi | a^l b^lp psi>.
  std::pair<quad, quad> operator()(int k, int kp, int l, int lp) const {
    const auto key = std::make_tuple(k, kp, l, lp);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    quad re = 0, im = 0;
    for (const auto& [a, b] : support_) {
      // left component: a^k b^kp |a, b> -> |a-k, b-kp>
      const int p = a - k, pp = b - kp;
      if (p < 0 || pp < 0) continue;
      const int ra = p + l, rb = pp + lp;
      if (ra >= dim_ || rb >= dim_) continue;
      const cplx right = amp(ra, rb);
      if (right == cplx{}) continue;
      const quad w = expq(quad(0.5) * (log_fact_[a] + log_fact_[b] + log_fact_[ra] + log_fact_[rb]) - log_fact_[p] -
                          log_fact_[pp]);
      const cplx prod = std::conj(amp(a, b)) * right;
      re += w * prod.real();
      im += w * prod.imag();
    }
    memo_.emplace(key, std::make_pair(re, im));
    return {re, im};
  }

 private:
  cplx amp(int a, int b) const { return ket_(static_cast<Eigen::Index>(two_mode_index(a, b, dim_))); }

  int dim_;
  FockVector ket_;
  std::vector<std::pair<int, int>> support_;
  std::vector<quad> log_fact_;
  mutable std::map<std::tuple<int, int, int, int>, std::pair<quad, quad>> memo_;
};

/// Two-mode version of the moment series, with the detector efficiency applied
/// to every moment as eta^{(k+kp+l+lp)/2}. Returns the leading block with both
/// photon numbers below out_dim. The series runs to i_max per mode (use
/// i_max >= dim-1 for an exact result on a truncated ket).
inline FockMatrix reconstruct_two_mode_from_moments(const TwoModeMoments& moments, double eta, int out_dim,
                                                    int i_max) {
  detail::check_eta(eta, "reconstruct_two_mode_from_moments");
  using quad = __float128;
  const int d = moments.dim();
  const Eigen::Index block = static_cast<Eigen::Index>(out_dim) * out_dim;
  FockMatrix out = FockMatrix::Zero(block, block);
  const quad log_eta = logq(quad(eta));
  std::vector<quad> lf(static_cast<std::size_t>(std::max(d, i_max) + 2));
  for (std::size_t k = 0; k < lf.size(); ++k) lf[k] = lgammaq(quad(k + 1));
  for (int n = 0; n < out_dim; ++n)
    for (int np = 0; np < out_dim; ++np)
      for (int m = 0; m < out_dim; ++m)
        for (int mp = 0; mp < out_dim; ++mp) {
          quad re = 0, im = 0;
          for (int i = 0; i <= i_max && n + i < d && m + i < d; ++i) {
            for (int j = 0; j <= i_max && np + j < d && mp + j < d; ++j) {
              const auto [mre, mim] = moments(m + i, mp + j, n + i, np + j);
              if (mre == 0 && mim == 0) continue;
              const quad log_scale = -lf[i] - lf[j] - quad(0.5) * (lf[n] + lf[m] + lf[np] + lf[mp]) +
                                     quad(0.5) * (n + m + np + mp + 2 * i + 2 * j) * log_eta;
              const quad s = ((i + j) % 2 == 0 ? 1 : -1) * expq(log_scale);
              re += s * mre;
              im += s * mim;
            }
          }
          out(static_cast<Eigen::Index>(two_mode_index(n, np, out_dim)),
              static_cast<Eigen::Index>(two_mode_index(m, mp, out_dim))) =
              cplx(static_cast<double>(re), static_cast<double>(im));
        }
  return out;
}

/// Correlation tensor of (|01> + |10>)/sqrt(2) with Pauli operators.
inline CorrelationTensor bell_qubit_tensor() {
  CorrelationTensor t;
  t.level = 0;
  t.provenance = Provenance::Analytic;
  t(Axis::X, Axis::X) = 1;
  t(Axis::Y, Axis::Y) = 1;
  t(Axis::Z, Axis::Z) = -1;
  t(Axis::Zero, Axis::Zero) = 1;
  return t;
}

/// The same Bell state as an explicit 4x4 density matrix (D = 2).
inline FockMatrix bell_qubit_density() {
  FockVector ket = FockVector::Zero(4);
  ket(static_cast<Eigen::Index>(two_mode_index(0, 1, 2))) = 1 / std::sqrt(2.0);
  ket(static_cast<Eigen::Index>(two_mode_index(1, 0, 2))) = 1 / std::sqrt(2.0);
  return ket * ket.adjoint();
}

/// Reduced single-mode state of a two-mode ket (trace over mode B).
inline FockMatrix partial_trace_b(const FockVector& ket, int dim) {
  FockMatrix rho = FockMatrix::Zero(dim, dim);
  for (int a = 0; a < dim; ++a)
    for (int ap = 0; ap < dim; ++ap) {
      cplx acc{};
      for (int b = 0; b < dim; ++b)
        acc += ket(static_cast<Eigen::Index>(two_mode_index(a, b, dim))) *
               std::conj(ket(static_cast<Eigen::Index>(two_mode_index(ap, b, dim))));
      rho(a, ap) = acc;
    }
  return rho;
}

}  // namespace bellcv

#endif  // BELLCV_STATES_HPP
