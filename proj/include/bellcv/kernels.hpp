#ifndef BELLCV_KERNELS_HPP
#define BELLCV_KERNELS_HPP

// Harmonic-oscillator wavefunctions, their non-normalizable partners and the
// homodyne pattern functions f_nm(x) = (psi_n phi_m)'.
//
// The closed form for phi_m contains a difference of two terms that both grow
// like e^{x^2/2} while the result is smaller by a factor ~x^{-(2m+1)}. All
// such differences are evaluated in binary128 (__float128). Products of psi
// and phi are formed in the scaled representation
//   psi_n(x) = e^{-x^2/2} h_n(x),   phi_m(x) = e^{+x^2/2} g_m(x),
// so the Gaussian factors cancel analytically and nothing overflows.

#include <quadmath.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bellcv {

inline constexpr int kMaxDegree = 64;

struct EvalSettings {
  /// Beyond this |x| pattern functions switch to the asymptotic series.
  double x_cutoff = 6.0;
  /// Relative stopping tolerance of the asymptotic series.
  double tol = 1e-17;
};

/// Which summed kernel F is meant. F_X and F_Y share the XY class.
enum class KernelClass { XY = 0, Z = 1, Zero = 2 };

namespace detail {

using quad = __float128;

inline void check_degree(int n, const char* what) {
  if (n < 0 || n > kMaxDegree) {
    throw std::out_of_range(std::string(what) + ": degree " + std::to_string(n) +
                            " outside [0, " + std::to_string(kMaxDegree) + "]");
  }
}

inline quad q_pi() {
  static const quad pi = acosq(quad(-1));
  return pi;
}
inline quad q_pi_quarter() {
  static const quad r = sqrtq(sqrtq(q_pi()));
  return r;
}

/// e^{-x^2} erfi(x) from the all-positive Taylor series of erfi, so the only
/// rounding is in the final product.
inline quad scaled_erfi(quad x) {
  const quad x2 = x * x;
  quad term = x;  // x^{2k+1} / k!
  quad sum = x;
  for (int k = 1; k < 4000; ++k) {
    term *= x2 / k;
    const quad add = term / (2 * k + 1);
    sum += add;
    if (fabsq(add) < quad(1e-36) * fabsq(sum)) break;
  }
  return 2 * sum / sqrtq(q_pi()) * expq(-x2);
}

/// Physicists' Hermite polynomials H_0..H_n at x.
inline std::vector<quad> hermite_all(int n, quad x) {
  std::vector<quad> h(static_cast<std::size_t>(std::max(n, 1)) + 1);
  h[0] = 1;
  h[1] = 2 * x;
  for (int k = 1; k < n; ++k) h[k + 1] = 2 * x * h[k] - 2 * k * h[k - 1];
  return h;
}

/// h_k = e^{x^2/2} psi_k for k = 0..n via the normalized recurrence.
inline std::vector<quad> scaled_psi_all(int n, quad x) {
  std::vector<quad> h(static_cast<std::size_t>(std::max(n, 1)) + 1);
  h[0] = 1 / q_pi_quarter();
  h[1] = sqrtq(quad(2)) * x * h[0];
  for (int k = 1; k < n; ++k) {
    h[k + 1] = x * sqrtq(quad(2) / (k + 1)) * h[k] - sqrtq(quad(k) / (k + 1)) * h[k - 1];
  }
  return h;
}

/// Coefficient sum of the closed form, already divided by sqrt(2^m m!):
///   sum_{k=0}^{floor((m-1)/2)} (-2)^k k! C(m-k-1, k) H_{m-2k-1}(x) / sqrt(2^m m!)
inline quad closed_form_polynomial(int m, const std::vector<quad>& hermite) {
  if (m == 0) return 0;
  quad sum = 0;
  quad fact_k = 1;  // k!
  quad pow_k = 1;   // (-2)^k
  for (int k = 0; 2 * k <= m - 1; ++k) {
    if (k > 0) {
      fact_k *= k;
      pow_k *= -2;
    }
    // C(m-k-1, k)
    quad binom = 1;
    for (int j = 1; j <= k; ++j) binom = binom * (m - k - 1 - k + j) / j;
    sum += pow_k * fact_k * binom * hermite[static_cast<std::size_t>(m - 2 * k - 1)];
  }
  quad norm = 1;  // 2^m m!
  for (int j = 1; j <= m; ++j) norm *= 2 * j;
  return sum / sqrtq(norm);
}

/// g_m = e^{-x^2/2} phi_m for m = 0..M evaluated from the closed form.
inline std::vector<quad> scaled_phi_direct(int M, quad x) {
  const auto hermite = hermite_all(std::max(M, 1), x);
  const auto h = scaled_psi_all(std::max(M, 1), x);
  const quad se = scaled_erfi(x);
  std::vector<quad> g(static_cast<std::size_t>(M) + 1);
  for (int m = 0; m <= M; ++m) {
    g[m] = q_pi() * h[m] * se - 2 * q_pi_quarter() * closed_form_polynomial(m, hermite);
  }
  return g;
}

/// Large-|x| expansion g_m ~ x^{-m-1} sum_k a_k x^{-2k} with
/// a_0 = pi^{1/4} sqrt(m!/2^m), a_k = a_{k-1} (m+2k-1)(m+2k) / (4k).
/// Returns false when the series stops decreasing before reaching tol.
inline bool scaled_phi_asymptotic(int m, double x, double tol, double& value, double& deriv) {
  double a = std::pow(std::numbers::pi, 0.25);
  for (int j = 1; j <= m; ++j) a *= std::sqrt(j / 2.0);
  const double inv2 = 1.0 / (x * x);
  double xp = std::pow(x, -(m + 1));  // x^{-m-1-2k}
  double sum = 0, dsum = 0, last = INFINITY;
  for (int k = 0; k < 400; ++k) {
    if (k > 0) a *= double(m + 2 * k - 1) * double(m + 2 * k) / (4.0 * k);
    const double term = a * xp;
    if (std::abs(term) > std::abs(last)) return false;
    sum += term;
    dsum += -(m + 1 + 2 * k) * term / x;
    if (std::abs(term) <= tol * std::abs(sum)) {
      value = sum;
      deriv = dsum;
      return true;
    }
    last = term;
    xp *= inv2;
  }
  return false;
}

/// f_nm for n <= m from scaled h, g arrays (direct path, binary128).
inline quad pattern_scaled(int n, int m, quad x, const std::vector<quad>& h,
                           const std::vector<quad>& g) {
  const quad dg = m == 0 ? -2 * x * g[0] + 2 * q_pi_quarter()
                         : -2 * x * g[m] + sqrtq(quad(2 * m)) * g[m - 1];
  const quad dh = n == 0 ? quad(0) : sqrtq(quad(2 * n)) * h[n - 1];
  return dh * g[m] + h[n] * dg;
}

/// Fills f_{n,m} for the requested pairs, choosing the evaluation path once
/// per abscissa. Pairs must satisfy n <= m <= max_m.
inline void pattern_batch(std::span<const std::pair<int, int>> pairs, int max_m, double x,
                          const EvalSettings& settings, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const double ax = std::abs(x);
  if (ax > 1e8) return;  // every f_nm decays at least like x^{-1}

  if (ax > settings.x_cutoff) {
    std::vector<double> g(static_cast<std::size_t>(max_m) + 1), dg(g.size());
    bool ok = true;
    for (int m = 0; m <= max_m && ok; ++m) ok = scaled_phi_asymptotic(m, x, settings.tol, g[m], dg[m]);
    if (ok) {
      std::vector<double> h(static_cast<std::size_t>(std::max(max_m, 1)) + 1);
      h[0] = std::pow(std::numbers::pi, -0.25);
      h[1] = std::sqrt(2.0) * x * h[0];
      for (int k = 1; k + 1 < static_cast<int>(h.size()); ++k) {
        h[k + 1] = x * std::sqrt(2.0 / (k + 1)) * h[k] - std::sqrt(double(k) / (k + 1)) * h[k - 1];
      }
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto [n, m] = pairs[i];
        const double dh = n == 0 ? 0.0 : std::sqrt(2.0 * n) * h[n - 1];
        out[i] = dh * g[m] + h[n] * dg[m];
      }
      return;
    }
  }
  const quad qx = x;
  const auto h = scaled_psi_all(std::max(max_m, 1), qx);
  const auto g = scaled_phi_direct(max_m, qx);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out[i] = static_cast<double>(pattern_scaled(pairs[i].first, pairs[i].second, qx, h, g));
  }
}

}  // namespace detail

/// Physicists' Hermite polynomial H_n(x) by the three-term recurrence.
inline double hermite(int n, double x) {
  detail::check_degree(n, "hermite");
  double prev = 1.0, cur = 2.0 * x;
  if (n == 0) return prev;
  for (int k = 1; k < n; ++k) {
    const double next = 2.0 * x * cur - 2.0 * k * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// Fock-state wavefunction psi_n(x) = H_n(x) e^{-x^2/2} / sqrt(2^n n! sqrt(pi)),
/// built by the normalized recurrence so no factorial is ever formed.
inline double psi(int n, double x) {
  detail::check_degree(n, "psi");
  const double g = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x);
  double prev = g, cur = std::sqrt(2.0) * x * g;
  if (n == 0) return prev;
  for (int k = 1; k < n; ++k) {
    const double next = x * std::sqrt(2.0 / (k + 1)) * cur - std::sqrt(double(k) / (k + 1)) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// d psi_n / dx = -x psi_n + sqrt(2n) psi_{n-1}.
inline double psi_derivative(int n, double x) {
  detail::check_degree(n, "psi_derivative");
  return -x * psi(n, x) + (n > 0 ? std::sqrt(2.0 * n) * psi(n - 1, x) : 0.0);
}

/// Imaginary error function. Relative error well below 1e-12 for |x| <= x_cutoff.
inline double erfi(double x, const EvalSettings& settings = {}) {
  if (!(std::abs(x) <= settings.x_cutoff)) {
    throw std::domain_error("erfi: |x| = " + std::to_string(std::abs(x)) +
                            " exceeds x_cutoff = " + std::to_string(settings.x_cutoff));
  }
  const detail::quad qx = x;
  return static_cast<double>(detail::scaled_erfi(qx) * expq(qx * qx));
}

/// Non-normalizable oscillator solution phi_m(x) evaluated from
///   pi psi_m erfi(x) - 2 pi^{1/4} e^{x^2/2} / sqrt(2^m m!)
///     * sum_{k=0}^{floor((m-1)/2)} (-2)^k k! C(m-k-1,k) H_{m-2k-1}(x).
/// phi_m grows like e^{x^2/2}; outside |x| <= x_cutoff use pattern() instead.
inline double phi(int m, double x, const EvalSettings& settings = {}) {
  detail::check_degree(m, "phi");
  if (!(std::abs(x) <= settings.x_cutoff)) {
    throw std::domain_error("phi: |x| beyond x_cutoff, e^{x^2/2} growth; use pattern() for kernels");
  }
  const detail::quad qx = x;
  const auto g = detail::scaled_phi_direct(m, qx);
  return static_cast<double>(g[m] * expq(qx * qx / 2));
}

/// d phi_m / dx = -x phi_m + sqrt(2m) phi_{m-1}  (m >= 1),
/// d phi_0 / dx = -x phi_0 + 2 pi^{1/4} e^{x^2/2}.
inline double phi_derivative(int m, double x, const EvalSettings& settings = {}) {
  detail::check_degree(m, "phi_derivative");
  if (!(std::abs(x) <= settings.x_cutoff)) {
    throw std::domain_error("phi_derivative: |x| beyond x_cutoff; use pattern() for kernels");
  }
  const detail::quad qx = x;
  const auto g = detail::scaled_phi_direct(m, qx);
  const detail::quad dg = m == 0 ? -2 * qx * g[0] + 2 * detail::q_pi_quarter()
                                 : -2 * qx * g[m] + sqrtq(detail::quad(2 * m)) * g[m - 1];
  // phi' = e^{x^2/2} (g' + x g)
  return static_cast<double>((dg + qx * g[m]) * expq(qx * qx / 2));
}

/// Pattern function f_nm(x) = (psi_n phi_m)' for n <= m, symmetric in (n, m).
/// Finite for every real x and decays like |x|^{-2} or faster.
inline double pattern(int n, int m, double x, const EvalSettings& settings = {}) {
  detail::check_degree(n, "pattern");
  detail::check_degree(m, "pattern");
  if (n > m) std::swap(n, m);
  const std::pair<int, int> pair{n, m};
  double out = 0;
  detail::pattern_batch({&pair, 1}, m, x, settings, {&out, 1});
  return out;
}

/// Values of the three summed kernels at one abscissa.
struct KernelValues {
  double xy = 0;
  double z = 0;
  double zero = 0;

  double operator[](KernelClass c) const {
    switch (c) {
      case KernelClass::XY: return xy;
      case KernelClass::Z: return z;
      case KernelClass::Zero: return zero;
    }
    return 0;
  }
};

/// F_XY = sum_{k<=N} f_{2k,2k+1},  F_Z = sum_{k<=2N+1} (-1)^k f_kk,
/// F_0 = sum_{k<=2N+1} f_kk, sharing one evaluation of psi and phi.
inline KernelValues summed_kernels(int level, double x, const EvalSettings& settings = {}) {
  if (level < 0 || 2 * level + 1 > kMaxDegree) {
    throw std::out_of_range("summed_kernels: level " + std::to_string(level) +
                            " needs degree 2N+1 <= " + std::to_string(kMaxDegree));
  }
  const int top = 2 * level + 1;
  // Off-diagonal pairs first, then the diagonal ones.
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(3 * level + 3));
  for (int k = 0; k <= level; ++k) pairs.emplace_back(2 * k, 2 * k + 1);
  for (int k = 0; k <= top; ++k) pairs.emplace_back(k, k);
  std::vector<double> f(pairs.size());
  detail::pattern_batch(pairs, top, x, settings, f);

  KernelValues v;
  std::size_t i = 0;
  for (int k = 0; k <= level; ++k) v.xy += f[i++];
  for (int k = 0; k <= top; ++k, ++i) {
    v.zero += f[i];
    v.z += (k % 2 == 0 ? 1.0 : -1.0) * f[i];
  }
  return v;
}

inline double summed_kernel(KernelClass cls, int level, double x, const EvalSettings& settings = {}) {
  return summed_kernels(level, x, settings)[cls];
}

/// Summed kernels tabulated on a uniform grid with four-point (cubic Lagrange)
/// interpolation. Abscissae outside the table fall back to direct evaluation.
/// Immutable after construction.
class KernelTable {
 public:
  explicit KernelTable(int level, double half_width = 8.0, double spacing = 1e-3,
                       EvalSettings settings = {})
      : level_(level), lo_(-half_width), step_(spacing), settings_(settings) {
    if (!(half_width > 0) || !(spacing > 0)) {
      throw std::invalid_argument("KernelTable: half_width and spacing must be positive");
    }
    const auto nodes = static_cast<std::size_t>(std::llround(2 * half_width / spacing)) + 1;
    values_.resize(3 * nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
      const auto v = summed_kernels(level, lo_ + static_cast<double>(i) * step_, settings_);
      values_[3 * i] = v.xy;
      values_[3 * i + 1] = v.z;
      values_[3 * i + 2] = v.zero;
    }
    nodes_ = nodes;
  }

  int level() const { return level_; }
  double spacing() const { return step_; }
  double half_width() const { return -lo_; }

  KernelValues operator()(double x) const {
    const double t = (x - lo_) / step_;
    const double fl = std::floor(t);
    if (!(fl >= 1) || fl + 2 >= static_cast<double>(nodes_)) {
      return summed_kernels(level_, x, settings_);
    }
    const auto i = static_cast<std::size_t>(fl);
    const double s = t - fl;
    // Lagrange weights for nodes i-1, i, i+1, i+2 at offset s in [0, 1).
    const double w0 = -s * (s - 1) * (s - 2) / 6;
    const double w1 = (s + 1) * (s - 1) * (s - 2) / 2;
    const double w2 = -(s + 1) * s * (s - 2) / 2;
    const double w3 = (s + 1) * s * (s - 1) / 6;
    const double* p = &values_[3 * (i - 1)];
    KernelValues v;
    v.xy = w0 * p[0] + w1 * p[3] + w2 * p[6] + w3 * p[9];
    v.z = w0 * p[1] + w1 * p[4] + w2 * p[7] + w3 * p[10];
    v.zero = w0 * p[2] + w1 * p[5] + w2 * p[8] + w3 * p[11];
    return v;
  }

 private:
  int level_;
  double lo_;
  double step_;
  EvalSettings settings_;
  std::size_t nodes_ = 0;
  std::vector<double> values_;
};

}  // namespace bellcv

#endif  // BELLCV_KERNELS_HPP
