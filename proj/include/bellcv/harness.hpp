#ifndef BELLCV_HARNESS_HPP
#define BELLCV_HARNESS_HPP

// Monte-Carlo campaigns: simulate homodyne records of the squeezed vacuum,
// reconstruct the correlation tensor, maximize the violation ratio, and
// aggregate over independent seeded runs. Also the analytic V*(z) curves.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "bellcv/kernels.hpp"
#include "bellcv/operators.hpp"
#include "bellcv/random.hpp"
#include "bellcv/states.hpp"
#include "bellcv/tomography.hpp"
#include "bellcv/violation.hpp"

namespace bellcv {

/// Malformed configuration text or an out-of-range configuration value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "inf" / "infinity" or a non-negative integer.
inline Level parse_level(const std::string& text) {
  if (text == "inf" || text == "infinity" || text == "Inf") return std::nullopt;
  int v = -1;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || v < 0) {
    throw ConfigError("level must be a non-negative integer or 'inf', got '" + text + "'");
  }
  return v;
}

struct ExperimentConfig {
  double z = 0.8;
  Level N = 0;
  double eta = 1.0;
  int N_ph = 61;
  int N_qu = 1000;
  int runs = 2000;
  std::uint64_t seed = 20090601;
  int n_max = 60;
  int workers = 1;
  int starts = 32;
  std::string out = ".";

  /// Checks ranges; `need_finite_level` for Monte-Carlo runs.
  void validate(bool need_finite_level = true) const {
    if (!std::isfinite(z) || z < 0) throw ConfigError("z must be finite and >= 0");
    if (!(eta > 0 && eta <= 1)) throw ConfigError("eta must lie in (0, 1]");
    if (need_finite_level && !N) throw ConfigError("Monte-Carlo runs need a finite level N");
    if (N_ph < 2) throw ConfigError("N_ph must be >= 2");
    if (N_qu < 1) throw ConfigError("N_qu must be >= 1");
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (starts < 1) throw ConfigError("starts must be >= 1");
    if (N && n_max < 2 * *N + 1) throw ConfigError("n_max must cover photon number 2N+1");
    if (n_max < 1) throw ConfigError("n_max must be >= 1");
  }

  /// Applies one key=value assignment.
  void set(const std::string& key, const std::string& value) {
    const auto as_double = [&] {
      try {
        return detail::parse_double(value);
      } catch (const std::invalid_argument&) {
        throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
      }
    };
    const auto as_u64 = [&] {
      try {
        return detail::parse_u64(value);
      } catch (const std::invalid_argument&) {
        throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + value + "'");
      }
    };
    const auto as_int = [&] {
      const auto v = as_u64();
      if (v > 100000000ULL) throw ConfigError("key '" + key + "': value too large");
      return static_cast<int>(v);
    };
    if (key == "z") z = as_double();
    else if (key == "N") N = parse_level(value);
    else if (key == "eta") eta = as_double();
    else if (key == "N_ph") N_ph = as_int();
    else if (key == "N_qu") N_qu = as_int();
    else if (key == "runs") runs = as_int();
    else if (key == "seed") seed = as_u64();
    else if (key == "n_max") n_max = as_int();
    else if (key == "workers") workers = as_int();
    else if (key == "starts") starts = as_int();
    else if (key == "out") out = value;
    else throw ConfigError("unknown key '" + key + "'");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Reads flat key=value lines into `cfg`; '#' starts a comment.
inline void apply_config(std::istream& is, ExperimentConfig& cfg) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    }
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    }
    cfg.set(key, value);
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  ExperimentConfig cfg;
  apply_config(in, cfg);
  return cfg;
}

/// Substream of a run reserved for its optimizer (cell streams use indices
/// below N_ph^2).
inline constexpr std::uint64_t kOptimizerSubstream = 0xFFFF'FFFF'0000'0000ULL;

inline OptimizerSettings run_optimizer_settings(const ExperimentConfig& cfg, std::uint64_t run) {
  OptimizerSettings opt;
  opt.starts = cfg.starts;
  opt.seed = derive_seed(cfg.seed, run, kOptimizerSubstream);
  return opt;
}

/// Simulates one run on the fly, cell by cell, without storing the records.
/// Produces the same grid as simulate_dataset followed by ptilde_grid.
inline PtildeGrid simulate_ptilde(const TmsvState& state, const ExperimentConfig& cfg, std::uint64_t run,
                                  const KernelTable& kernels) {
  const auto phases = uniform_phases(cfg.N_ph);
  PtildeGrid grid(phases, phases, kernels.level());
  for (std::size_t i = 0; i < phases.size(); ++i) {
    for (std::size_t j = 0; j < phases.size(); ++j) {
      Rng rng(derive_seed(cfg.seed, run, cell_stream(i, j, phases.size())));
      const QuadratureSampler sampler(quadrature_covariance(state, phases[i], phases[j]), cfg.eta);
      CellAccumulator acc;
      for (int k = 0; k < cfg.N_qu; ++k) {
        const auto [x, y] = sampler(rng);
        acc.add(kernels(x), kernels(y));
      }
      grid.store(i, j, acc);
    }
  }
  return grid;
}

struct RunOutcome {
  TensorEstimate estimate;
  ViolationResult result;
};

inline RunOutcome run_single_experiment(const ExperimentConfig& cfg, std::uint64_t run, const KernelTable& kernels) {
  cfg.validate();
  if (kernels.level() != *cfg.N) throw std::invalid_argument("run_single_experiment: kernel table level mismatch");
  const TmsvState state(cfg.z, cfg.n_max);
  RunOutcome out;
  out.estimate = tensor_from_ptilde(simulate_ptilde(state, cfg, run, kernels));
  out.result = maximize_violation(out.estimate.tensor, run_optimizer_settings(cfg, run));
  return out;
}

struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
};

namespace detail {

inline double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/// Freedman-Diaconis bins (width 2 IQR n^{-1/3}), at most max_bins. A sample
/// with zero spread gets a single bin.
inline Histogram freedman_diaconis(std::span<const double> values, std::size_t max_bins = 200) {
  if (values.empty()) throw std::invalid_argument("freedman_diaconis: empty sample");
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  const double lo = s.front(), hi = s.back();
  const double iqr = detail::quantile(s, 0.75) - detail::quantile(s, 0.25);
  const double width = 2 * iqr / std::cbrt(static_cast<double>(s.size()));
  std::size_t bins = 1;
  if (hi > lo && width > 0) bins = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil((hi - lo) / width)), 1, max_bins);
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  h.edges.back() = hi;
  h.counts.assign(bins, 0);
  for (double v : s) {
    auto b = hi > lo ? static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins)) : 0;
    h.counts[std::min(b, bins - 1)] += 1;
  }
  return h;
}

/// Analytic references for a campaign. For eta < 1 the lossy tensor comes
/// from the loss channel applied to the truncated ket, and independently from
/// the efficiency-scaled moment series.
struct ReferenceValues {
  double V_star = 0;
  CorrelationTensor tensor;
  std::optional<double> V_star_moments;
};

inline ReferenceValues reference_values(const ExperimentConfig& cfg) {
  ReferenceValues ref;
  OptimizerSettings opt;
  opt.starts = cfg.starts;
  if (cfg.eta == 1.0) {
    ref.tensor = tmsv_tensor_analytic(cfg.z, cfg.N);
    ref.V_star = maximize_violation(ref.tensor, opt).V;
    return ref;
  }
  if (!cfg.N) throw ConfigError("lossy references need a finite level N");
  const TmsvState state(cfg.z, cfg.n_max);
  const FockVector ket = tmsv_ket(state);
  const int out_dim = single_mode_dim(*cfg.N);
  const FockMatrix block = loss_channel_two_mode_block(ket, state.dim(), cfg.eta, out_dim);
  ref.tensor = correlation_tensor_from_block(block, out_dim, *cfg.N);
  ref.tensor.provenance = Provenance::ExactFock;
  ref.V_star = maximize_violation(ref.tensor, opt).V;

  const TwoModeMoments moments(ket, state.dim());
  const FockMatrix mblock = reconstruct_two_mode_from_moments(moments, cfg.eta, out_dim, state.dim() - 1);
  auto mt = correlation_tensor_from_block(mblock, out_dim, *cfg.N);
  mt.provenance = Provenance::ExactFock;
  ref.V_star_moments = maximize_violation(mt, opt).V;
  return ref;
}

struct CampaignResult {
  ExperimentConfig config;
  std::vector<RunOutcome> runs;
  Histogram histogram;
  double mean = 0;
  double std_dev = 0;
  ReferenceValues reference;

  std::vector<double> ratios() const {
    std::vector<double> v;
    v.reserve(runs.size());
    for (const auto& r : runs) v.push_back(r.result.V);
    return v;
  }
};

/// Runs cfg.runs independent experiments on cfg.workers threads. Each run
/// owns its random streams and its output slot, so results do not depend on
/// scheduling or the worker count.
inline CampaignResult run_campaign(const ExperimentConfig& cfg) {
  cfg.validate();
  CampaignResult res;
  res.config = cfg;
  res.runs.resize(static_cast<std::size_t>(cfg.runs));
  const KernelTable kernels(*cfg.N);

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto work = [&] {
    for (int run = next++; run < cfg.runs; run = next++) {
      try {
        res.runs[static_cast<std::size_t>(run)] = run_single_experiment(cfg, static_cast<std::uint64_t>(run), kernels);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cfg.runs;
      }
    }
  };
  const int nthreads = std::min(cfg.workers, cfg.runs);
  if (nthreads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  const auto v = res.ratios();
  double sum = 0;
  for (double x : v) sum += x;
  res.mean = sum / static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - res.mean) * (x - res.mean);
  res.std_dev = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  res.histogram = freedman_diaconis(v);
  res.reference = reference_values(cfg);
  return res;
}

struct Figure1Point {
  double z;
  Level N;
  double V;
};

/// z = 0, step, ..., z_max (inclusive, up to rounding).
inline std::vector<double> z_grid(double z_max = 2.0, double step = 0.05) {
  if (!(step > 0) || z_max < 0) throw std::invalid_argument("z_grid: need step > 0 and z_max >= 0");
  std::vector<double> zs;
  const auto n = static_cast<int>(std::floor(z_max / step + 1e-9));
  // i / (1/step) avoids drift like 17 * 0.05 = 0.8500000000000001 for decimal steps
  const double inv = 1.0 / step;
  const bool whole = std::abs(inv - std::round(inv)) < 1e-9;
  for (int i = 0; i <= n; ++i) zs.push_back(whole ? i / std::round(inv) : i * step);
  return zs;
}

inline std::vector<Level> figure1_levels() { return {0, 1, 2, 3, 5, std::nullopt}; }

/// Analytic V*(z) for each level.
inline std::vector<Figure1Point> figure1_data(const std::vector<double>& zs, const std::vector<Level>& levels,
                                              const OptimizerSettings& opt = {}) {
  std::vector<Figure1Point> out;
  for (const auto& lvl : levels)
    for (double z : zs) out.push_back({z, lvl, maximize_violation(tmsv_tensor_analytic(z, lvl), opt).V});
  return out;
}

// ---------------------------------------------------------------------------
// Writers. Numbers use shortest round-trip formatting, so repeated runs with
// the same inputs produce identical bytes.

inline void write_figure1_csv(std::ostream& os, const std::vector<Figure1Point>& pts) {
  os << "z,N,V\n";
  for (const auto& p : pts) {
    os << detail::format_double(p.z) << ',' << level_name(p.N) << ',' << detail::format_double(p.V) << '\n';
  }
}

inline void write_runs_csv(std::ostream& os, const CampaignResult& res) {
  os << "run,V,lhs,rhs\n";
  for (std::size_t r = 0; r < res.runs.size(); ++r) {
    const auto& v = res.runs[r].result;
    os << r << ',' << detail::format_double(v.V) << ',' << detail::format_double(v.lhs) << ','
       << detail::format_double(v.rhs) << '\n';
  }
}

inline void write_histogram_csv(std::ostream& os, const Histogram& h) {
  os << "lower,upper,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    os << detail::format_double(h.edges[b]) << ',' << detail::format_double(h.edges[b + 1]) << ',' << h.counts[b]
       << '\n';
  }
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"z", c.z},       {"N", level_name(c.N)}, {"eta", c.eta},         {"N_ph", c.N_ph},
          {"N_qu", c.N_qu}, {"runs", c.runs},       {"seed", c.seed},       {"n_max", c.n_max},
          {"starts", c.starts}};
}

inline nlohmann::json to_json(const CampaignResult& res) {
  nlohmann::json j;
  j["config"] = to_json(res.config);
  j["mean"] = res.mean;
  j["std"] = res.std_dev;
  j["reference"] = {{"V_star", res.reference.V_star}, {"tensor", to_json(res.reference.tensor)}};
  if (res.reference.V_star_moments) j["reference"]["V_star_moments"] = *res.reference.V_star_moments;
  j["deviation"] = res.mean - res.reference.V_star;
  j["histogram"] = {{"edges", res.histogram.edges}, {"counts", res.histogram.counts}};
  return j;
}

inline void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << contents;
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace bellcv

#endif  // BELLCV_HARNESS_HPP
