#ifndef BELLCV_TOMOGRAPHY_HPP
#define BELLCV_TOMOGRAPHY_HPP

// From homodyne records to correlation tensors and density matrices.
//
// A dataset holds N_qu quadrature pairs (x, y) for every phase pair
// (phi_i, theta_j) on a grid over [0, pi]. For each cell the sample mean of
// F_mu(x) F_nu(y) estimates the inner integral p~_{mu nu}(phi_i, theta_j);
// the outer phase integral against Phi_X = (2/pi) cos, Phi_Y = (2/pi) sin,
// Phi_Z = Phi_0 = 1/pi is a composite trapezoid rule on the grid.

#include <array>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "bellcv/kernels.hpp"
#include "bellcv/operators.hpp"
#include "bellcv/random.hpp"
#include "bellcv/states.hpp"

namespace bellcv {

/// phi_i = pi i / (n - 1), i = 0..n-1.
inline std::vector<double> uniform_phases(int n) {
  if (n < 2) throw std::invalid_argument("uniform_phases: need at least 2 phases");
  std::vector<double> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[i] = std::numbers::pi * i / (n - 1);
  return p;
}

inline bool is_uniform_grid(std::span<const double> phases) {
  if (phases.size() < 2) return false;
  const auto n = static_cast<int>(phases.size());
  for (int i = 0; i < n; ++i) {
    if (std::abs(phases[i] - std::numbers::pi * i / (n - 1)) > 1e-12) return false;
  }
  return true;
}

struct QuadratureDataset {
  std::vector<double> phases_a;
  std::vector<double> phases_b;
  std::size_t n_qu = 0;
  /// Sample k of cell (i, j) lives at (i * phases_b.size() + j) * n_qu + k.
  std::vector<double> x;
  std::vector<double> y;
  double z = 0;
  double eta = 1;
  std::uint64_t seed = 0;

  std::size_t cell(std::size_t i, std::size_t j) const { return i * phases_b.size() + j; }
  std::span<const double> cell_x(std::size_t i, std::size_t j) const {
    return std::span<const double>(x).subspan(cell(i, j) * n_qu, n_qu);
  }
  std::span<const double> cell_y(std::size_t i, std::size_t j) const {
    return std::span<const double>(y).subspan(cell(i, j) * n_qu, n_qu);
  }
  bool uniform_grid() const { return is_uniform_grid(phases_a) && is_uniform_grid(phases_b); }

  void validate() const {
    for (const auto* p : {&phases_a, &phases_b}) {
      if (p->size() < 2) throw std::invalid_argument("QuadratureDataset: N_ph must be >= 2");
      for (std::size_t i = 1; i < p->size(); ++i) {
        if (!((*p)[i] > (*p)[i - 1])) throw std::invalid_argument("QuadratureDataset: phases not strictly increasing");
      }
    }
    const std::size_t expect = phases_a.size() * phases_b.size() * n_qu;
    if (x.size() != expect || y.size() != expect) {
      throw std::invalid_argument("QuadratureDataset: sample arrays do not match N_ph^2 * N_qu");
    }
  }
};

/// Stream index of phase cell (i, j) for seeding.
inline std::uint64_t cell_stream(std::size_t i, std::size_t j, std::size_t n_b) { return i * n_b + j; }

/// Simulated homodyne records of the squeezed vacuum on a uniform grid. Cell
/// (i, j) of run `run` draws from the stream derive_seed(seed, run, cell).
inline QuadratureDataset simulate_dataset(const TmsvState& state, int n_ph, std::size_t n_qu, double eta,
                                          std::uint64_t seed, std::uint64_t run = 0) {
  QuadratureDataset ds;
  ds.phases_a = uniform_phases(n_ph);
  ds.phases_b = ds.phases_a;
  ds.n_qu = n_qu;
  ds.z = state.z();
  ds.eta = eta;
  ds.seed = seed;
  ds.x.resize(static_cast<std::size_t>(n_ph) * n_ph * n_qu);
  ds.y.resize(ds.x.size());
  for (std::size_t i = 0; i < ds.phases_a.size(); ++i) {
    for (std::size_t j = 0; j < ds.phases_b.size(); ++j) {
      Rng rng(derive_seed(seed, run, cell_stream(i, j, ds.phases_b.size())));
      const QuadratureSampler sampler(quadrature_covariance(state, ds.phases_a[i], ds.phases_b[j]), eta);
      const std::size_t base = ds.cell(i, j) * n_qu;
      for (std::size_t k = 0; k < n_qu; ++k) {
        const auto [xv, yv] = sampler(rng);
        ds.x[base + k] = xv;
        ds.y[base + k] = yv;
      }
    }
  }
  return ds;
}

inline constexpr std::size_t kClassPairs = 9;

inline std::size_t class_pair(KernelClass a, KernelClass b) {
  return static_cast<std::size_t>(a) * 3 + static_cast<std::size_t>(b);
}

inline KernelClass kernel_class(Axis a) {
  switch (a) {
    case Axis::X:
    case Axis::Y: return KernelClass::XY;
    case Axis::Z: return KernelClass::Z;
    case Axis::Zero: return KernelClass::Zero;
  }
  return KernelClass::Zero;
}

/// Running sums of F_a(x) F_b(y) and their squares over one phase cell.
class CellAccumulator {
 public:
  void add(const KernelValues& fx, const KernelValues& fy) {
    const std::array<double, 3> a{fx.xy, fx.z, fx.zero};
    const std::array<double, 3> b{fy.xy, fy.z, fy.zero};
    for (std::size_t p = 0; p < 3; ++p) {
      for (std::size_t q = 0; q < 3; ++q) {
        const double v = a[p] * b[q];
        sum_[p * 3 + q] += v;
        sum2_[p * 3 + q] += v * v;
      }
    }
    ++count_;
  }

  std::size_t count() const { return count_; }
  double mean(std::size_t pair) const { return sum_[pair] / static_cast<double>(count_); }
  /// Variance of the sample mean (zero for a single sample).
  double mean_variance(std::size_t pair) const {
    if (count_ < 2) return 0;
    const double n = static_cast<double>(count_);
    const double m = sum_[pair] / n;
    const double var = std::max(0.0, (sum2_[pair] - n * m * m) / (n - 1));
    return var / n;
  }

 private:
  std::array<double, kClassPairs> sum_{};
  std::array<double, kClassPairs> sum2_{};
  std::size_t count_ = 0;
};

/// p~_{ab}(phi_i, theta_j) for the nine kernel-class pairs, with the variance
/// of each cell mean.
struct PtildeGrid {
  std::vector<double> phases_a;
  std::vector<double> phases_b;
  int level = 0;
  std::array<std::vector<double>, kClassPairs> mean;
  std::array<std::vector<double>, kClassPairs> mean_variance;

  PtildeGrid() = default;
  PtildeGrid(std::vector<double> pa, std::vector<double> pb, int lvl)
      : phases_a(std::move(pa)), phases_b(std::move(pb)), level(lvl) {
    for (std::size_t p = 0; p < kClassPairs; ++p) {
      mean[p].assign(phases_a.size() * phases_b.size(), 0.0);
      mean_variance[p].assign(mean[p].size(), 0.0);
    }
  }

  std::size_t cell(std::size_t i, std::size_t j) const { return i * phases_b.size() + j; }
  double operator()(KernelClass a, KernelClass b, std::size_t i, std::size_t j) const {
    return mean[class_pair(a, b)][cell(i, j)];
  }

  void store(std::size_t i, std::size_t j, const CellAccumulator& acc) {
    if (acc.count() == 0) throw std::invalid_argument("PtildeGrid: empty phase cell");
    for (std::size_t p = 0; p < kClassPairs; ++p) {
      mean[p][cell(i, j)] = acc.mean(p);
      mean_variance[p][cell(i, j)] = acc.mean_variance(p);
    }
  }
};

/// Plug-in estimate of p~ from a dataset using tabulated kernels.
inline PtildeGrid ptilde_grid(const QuadratureDataset& ds, const KernelTable& kernels) {
  ds.validate();
  PtildeGrid grid(ds.phases_a, ds.phases_b, kernels.level());
  for (std::size_t i = 0; i < ds.phases_a.size(); ++i) {
    for (std::size_t j = 0; j < ds.phases_b.size(); ++j) {
      const auto xs = ds.cell_x(i, j);
      const auto ys = ds.cell_y(i, j);
      if (xs.empty()) throw std::invalid_argument("ptilde_grid: empty phase cell");
      CellAccumulator acc;
      for (std::size_t k = 0; k < xs.size(); ++k) acc.add(kernels(xs[k]), kernels(ys[k]));
      grid.store(i, j, acc);
    }
  }
  return grid;
}

inline PtildeGrid ptilde_grid(const QuadratureDataset& ds, int level) { return ptilde_grid(ds, KernelTable(level)); }

/// Correlation tensor with per-entry standard errors.
struct TensorEstimate {
  CorrelationTensor tensor;
  Matrix4 std_error{};
};

namespace detail {

inline std::vector<double> trapezoid_weights(std::span<const double> phases) {
  if (!is_uniform_grid(phases)) {
    throw std::invalid_argument("tensor_from_ptilde: phase grid is not uniform on [0, pi]");
  }
  const std::size_t n = phases.size();
  const double h = std::numbers::pi / static_cast<double>(n - 1);
  std::vector<double> w(n, h);
  w.front() = w.back() = h / 2;
  return w;
}

inline double phase_function(Axis a, double phi) {
  switch (a) {
    case Axis::X: return 2 / std::numbers::pi * std::cos(phi);
    case Axis::Y: return 2 / std::numbers::pi * std::sin(phi);
    default: return 1 / std::numbers::pi;
  }
}

}  // namespace detail

/// All sixteen entries by direct weighted summation over the grid.
inline TensorEstimate tensor_from_ptilde(const PtildeGrid& grid) {
  const auto wa = detail::trapezoid_weights(grid.phases_a);
  const auto wb = detail::trapezoid_weights(grid.phases_b);
  TensorEstimate est;
  est.tensor.level = grid.level;
  est.tensor.provenance = Provenance::Tomographic;
  for (Axis mu : kAllAxes) {
    std::vector<double> ca(wa.size());
    for (std::size_t i = 0; i < wa.size(); ++i) ca[i] = wa[i] * detail::phase_function(mu, grid.phases_a[i]);
    for (Axis nu : kAllAxes) {
      std::vector<double> cb(wb.size());
      for (std::size_t j = 0; j < wb.size(); ++j) cb[j] = wb[j] * detail::phase_function(nu, grid.phases_b[j]);
      const std::size_t pair = class_pair(kernel_class(mu), kernel_class(nu));
      double value = 0, var = 0;
      for (std::size_t i = 0; i < ca.size(); ++i) {
        for (std::size_t j = 0; j < cb.size(); ++j) {
          const double c = ca[i] * cb[j];
          value += c * grid.mean[pair][grid.cell(i, j)];
          var += c * c * grid.mean_variance[pair][grid.cell(i, j)];
        }
      }
      est.tensor(mu, nu) = value;
      est.std_error[static_cast<std::size_t>(mu)][static_cast<std::size_t>(nu)] = std::sqrt(var);
    }
  }
  return est;
}

/// The same integrals through discrete Fourier coefficients: the phase
/// functions are harmonics of order 0 and +-1, so each entry combines the
/// weighted 2-D transform of p~ at k_a, k_b in {-1, 0, 1}, computed as
/// separable 1-D transforms (rows first, then columns).
inline CorrelationTensor tensor_from_ptilde_fourier(const PtildeGrid& grid) {
  using C = std::complex<double>;
  const auto wa = detail::trapezoid_weights(grid.phases_a);
  const auto wb = detail::trapezoid_weights(grid.phases_b);
  const std::size_t na = wa.size(), nb = wb.size();

  // hat[pair][ka+1][kb+1] = sum_ij wa_i wb_j p_ij e^{i (ka phi_i + kb theta_j)}
  std::array<std::array<std::array<C, 3>, 3>, kClassPairs> hat{};
  for (std::size_t pair = 0; pair < kClassPairs; ++pair) {
    std::vector<std::array<C, 3>> rows(na);
    for (std::size_t i = 0; i < na; ++i) {
      for (int kb = -1; kb <= 1; ++kb) {
        C acc{};
        for (std::size_t j = 0; j < nb; ++j) {
          acc += wb[j] * grid.mean[pair][grid.cell(i, j)] * std::polar(1.0, kb * grid.phases_b[j]);
        }
        rows[i][kb + 1] = acc;
      }
    }
    for (int ka = -1; ka <= 1; ++ka) {
      for (int kb = 0; kb < 3; ++kb) {
        C acc{};
        for (std::size_t i = 0; i < na; ++i) acc += wa[i] * rows[i][kb] * std::polar(1.0, ka * grid.phases_a[i]);
        hat[pair][ka + 1][kb] = acc;
      }
    }
  }

  // Phi_mu(phi) = sum_k coef_mu[k] e^{i k phi}
  const auto coefficients = [](Axis a) -> std::array<C, 3> {
    const double ip = 1 / std::numbers::pi;
    switch (a) {
      case Axis::X: return {C(ip, 0), C(0, 0), C(ip, 0)};
      case Axis::Y: return {C(0, ip), C(0, 0), C(0, -ip)};  // (e^{i} - e^{-i}) / (i pi)
      default: return {C(0, 0), C(ip, 0), C(0, 0)};
    }
  };

  CorrelationTensor t;
  t.level = grid.level;
  t.provenance = Provenance::Tomographic;
  for (Axis mu : kAllAxes) {
    const auto cm = coefficients(mu);
    for (Axis nu : kAllAxes) {
      const auto cn = coefficients(nu);
      const std::size_t pair = class_pair(kernel_class(mu), kernel_class(nu));
      C acc{};
      for (int ka = 0; ka < 3; ++ka)
        for (int kb = 0; kb < 3; ++kb) acc += cm[ka] * cn[kb] * hat[pair][ka][kb];
      t(mu, nu) = acc.real();
      t.imag_residue = std::max(t.imag_residue, std::abs(acc.imag()));
    }
  }
  return t;
}

/// Weighted abscissae standing in for p_phi(x) at one phase: histogram bin
/// centres with probabilities, quadrature nodes with weights, or raw samples
/// with equal weights.
struct PhaseProfile {
  std::vector<double> x;
  std::vector<double> weight;

  static PhaseProfile from_samples(std::span<const double> samples) {
    PhaseProfile p;
    p.x.assign(samples.begin(), samples.end());
    p.weight.assign(samples.size(), 1.0 / static_cast<double>(samples.size()));
    return p;
  }
};

/// rho_nm = (1/pi) int_0^pi e^{i(n-m)phi} int p_phi(x) f_nm(x) dx dphi on a
/// uniform phase grid, followed by Hermitian symmetrization.
inline FockMatrix reconstruct_rho_single(std::span<const double> phases, const std::vector<PhaseProfile>& profiles,
                                         int n_max, const EvalSettings& settings = {}) {
  if (phases.size() != profiles.size()) {
    throw std::invalid_argument("reconstruct_rho_single: one profile per phase required");
  }
  if (n_max < 0 || n_max > kMaxDegree) throw std::invalid_argument("reconstruct_rho_single: bad n_max");
  if (static_cast<int>(phases.size()) - 1 < n_max) {
    throw std::invalid_argument("reconstruct_rho_single: " + std::to_string(phases.size()) +
                                " phases cannot resolve harmonic |n-m| = " + std::to_string(n_max));
  }
  const auto w = detail::trapezoid_weights(phases);

  std::vector<std::pair<int, int>> pairs;
  for (int n = 0; n <= n_max; ++n)
    for (int m = n; m <= n_max; ++m) pairs.emplace_back(n, m);
  std::vector<double> f(pairs.size());

  FockMatrix rho = FockMatrix::Zero(n_max + 1, n_max + 1);
  std::vector<double> inner(pairs.size());
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const auto& prof = profiles[i];
    if (prof.x.size() != prof.weight.size() || prof.x.empty()) {
      throw std::invalid_argument("reconstruct_rho_single: malformed phase profile");
    }
    std::fill(inner.begin(), inner.end(), 0.0);
    for (std::size_t k = 0; k < prof.x.size(); ++k) {
      detail::pattern_batch(pairs, n_max, prof.x[k], settings, f);
      for (std::size_t p = 0; p < pairs.size(); ++p) inner[p] += prof.weight[k] * f[p];
    }
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto [n, m] = pairs[p];
      const cplx phase = std::polar(1.0, (n - m) * phases[i]);
      rho(n, m) += w[i] / std::numbers::pi * phase * inner[p];
      if (n != m) rho(m, n) += w[i] / std::numbers::pi * std::conj(phase) * inner[p];
    }
  }
  return 0.5 * (rho + rho.adjoint());
}

// ---------------------------------------------------------------------------
// Text serialization. Layout:
//   # bellcv quadrature dataset v1
//   z <value>
//   eta <value>
//   seed <value>
//   N_ph <value>
//   N_qu <value>
//   [phases_a <v...>]   only for non-uniform grids
//   [phases_b <v...>]
//   i j k x y
//   <rows>
// Numbers use std::to_chars, so output is locale independent and round-trips.

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("cannot parse number '" + s + "'");
  }
  return v;
}

inline std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("cannot parse integer '" + s + "'");
  }
  return v;
}

}  // namespace detail

inline void write_dataset(std::ostream& os, const QuadratureDataset& ds) {
  ds.validate();
  if (ds.phases_a.size() != ds.phases_b.size()) {
    throw std::invalid_argument("write_dataset: both modes must share N_ph");
  }
  using detail::format_double;
  os << "# bellcv quadrature dataset v1\n";
  os << "z " << format_double(ds.z) << "\n";
  os << "eta " << format_double(ds.eta) << "\n";
  os << "seed " << ds.seed << "\n";
  os << "N_ph " << ds.phases_a.size() << "\n";
  os << "N_qu " << ds.n_qu << "\n";
  if (!ds.uniform_grid()) {
    os << "phases_a";
    for (double p : ds.phases_a) os << ' ' << format_double(p);
    os << "\nphases_b";
    for (double p : ds.phases_b) os << ' ' << format_double(p);
    os << "\n";
  }
  os << "i j k x y\n";
  for (std::size_t i = 0; i < ds.phases_a.size(); ++i)
    for (std::size_t j = 0; j < ds.phases_b.size(); ++j) {
      const auto xs = ds.cell_x(i, j);
      const auto ys = ds.cell_y(i, j);
      for (std::size_t k = 0; k < ds.n_qu; ++k) {
        os << i << ' ' << j << ' ' << k << ' ' << format_double(xs[k]) << ' ' << format_double(ys[k]) << '\n';
      }
    }
}

inline QuadratureDataset read_dataset(std::istream& is) {
  QuadratureDataset ds;
  std::string line;
  std::size_t n_ph = 0;
  bool have_rows_header = false;
  const auto read_list = [](std::istringstream& ls) {
    std::vector<double> out;
    std::string tok;
    while (ls >> tok) out.push_back(detail::parse_double(tok));
    return out;
  };
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "i") {
      have_rows_header = true;
      break;
    }
    std::string val;
    if (key == "phases_a") {
      ds.phases_a = read_list(ls);
      continue;
    }
    if (key == "phases_b") {
      ds.phases_b = read_list(ls);
      continue;
    }
    ls >> val;
    if (key == "z") ds.z = detail::parse_double(val);
    else if (key == "eta") ds.eta = detail::parse_double(val);
    else if (key == "seed") ds.seed = detail::parse_u64(val);
    else if (key == "N_ph") n_ph = detail::parse_u64(val);
    else if (key == "N_qu") ds.n_qu = detail::parse_u64(val);
    else throw std::invalid_argument("read_dataset: unknown header key '" + key + "'");
  }
  if (!have_rows_header) throw std::invalid_argument("read_dataset: missing row header");
  if (ds.phases_a.empty()) ds.phases_a = uniform_phases(static_cast<int>(n_ph));
  if (ds.phases_b.empty()) ds.phases_b = uniform_phases(static_cast<int>(n_ph));
  const std::size_t total = ds.phases_a.size() * ds.phases_b.size() * ds.n_qu;
  ds.x.assign(total, 0.0);
  ds.y.assign(total, 0.0);
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string si, sj, sk, sx, sy;
    if (!(ls >> si >> sj >> sk >> sx >> sy)) throw std::invalid_argument("read_dataset: short row '" + line + "'");
    const auto i = detail::parse_u64(si), j = detail::parse_u64(sj), k = detail::parse_u64(sk);
    if (i >= ds.phases_a.size() || j >= ds.phases_b.size() || k >= ds.n_qu) {
      throw std::invalid_argument("read_dataset: row index out of range");
    }
    const std::size_t at = ds.cell(i, j) * ds.n_qu + k;
    ds.x[at] = detail::parse_double(sx);
    ds.y[at] = detail::parse_double(sy);
    ++rows;
  }
  if (rows != total) throw std::invalid_argument("read_dataset: expected " + std::to_string(total) + " rows");
  ds.validate();
  return ds;
}

}  // namespace bellcv

#endif  // BELLCV_TOMOGRAPHY_HPP
