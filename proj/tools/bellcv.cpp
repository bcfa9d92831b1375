// Command-line front end: figure1, simulate, tensor, maximize, verify.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "bellcv/harness.hpp"
#include "bellcv/verify.hpp"

namespace {

using namespace bellcv;

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kConfig = 3, kIo = 4, kInput = 5 };

int report(const char* kind, const std::string& message, int code) {
  std::string one_line = message;
  for (char& c : one_line)
    if (c == '\n' || c == '\r') c = ' ';
  std::cerr << "bellcv: error[" << kind << "]: " << one_line << '\n';
  return code;
}

struct CommonFlags {
  std::string config;
  std::optional<std::string> seed, z, eta, big_n, runs, out, workers;
};

ExperimentConfig resolve_config(const CommonFlags& f) {
  ExperimentConfig cfg;
  if (!f.config.empty()) cfg = load_config(f.config);
  const auto apply = [&](const char* key, const std::optional<std::string>& v) {
    if (v) cfg.set(key, *v);
  };
  apply("seed", f.seed);
  apply("z", f.z);
  apply("eta", f.eta);
  apply("N", f.big_n);
  apply("runs", f.runs);
  apply("out", f.out);
  apply("workers", f.workers);
  return cfg;
}

/// Writes to `path`, or stdout when the path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  write_text_file(path, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-spin entanglement criteria for the two-mode squeezed vacuum"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonFlags flags;
  app.add_option("--config", flags.config, "key=value configuration file (flags take precedence)");
  app.add_option("--seed", flags.seed, "master seed");
  app.add_option("--z", flags.z, "squeezing parameter");
  app.add_option("--eta", flags.eta, "detector efficiency in (0, 1]");
  app.add_option("--big-n", flags.big_n, "pseudo-spin level N (integer or inf)");
  app.add_option("--runs", flags.runs, "number of Monte-Carlo runs");
  app.add_option("--out", flags.out, "output file (figure1, tensor, maximize) or directory (simulate)");
  app.add_option("--workers", flags.workers, "worker threads for simulate");

  auto* fig = app.add_subcommand("figure1", "analytic V*(z) curves as CSV");
  double z_max = 2.0, z_step = 0.05;
  fig->add_option("--z-max", z_max, "largest z of the grid");
  fig->add_option("--z-step", z_step, "grid spacing in z");

  auto* sim = app.add_subcommand("simulate", "Monte-Carlo campaign: runs.csv, histogram.csv, summary.json");

  auto* ten = app.add_subcommand("tensor", "print the correlation tensor as JSON");
  bool exact = false;
  ten->add_flag("--exact", exact, "evaluate on the truncated Fock ket instead of the closed form");

  auto* maxc = app.add_subcommand("maximize", "maximize V over directions for a tensor JSON file");
  std::string tensor_path;
  int starts = 32;
  maxc->add_option("tensor", tensor_path, "tensor JSON file")->required();
  maxc->add_option("--starts", starts, "number of random starts");

  auto* ver = app.add_subcommand("verify", "run the identity and inequality self-checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what(), kUsage);
  }

  try {
    ExperimentConfig cfg = resolve_config(flags);
    const std::string out = flags.out ? *flags.out : std::string();

    if (*fig) {
      const std::vector<double> zs = flags.z ? std::vector<double>{cfg.z} : z_grid(z_max, z_step);
      const std::vector<Level> levels = flags.big_n ? std::vector<Level>{cfg.N} : figure1_levels();
      OptimizerSettings opt;
      opt.starts = cfg.starts;
      if (flags.seed) opt.seed = cfg.seed;
      std::ostringstream os;
      write_figure1_csv(os, figure1_data(zs, levels, opt));
      emit(out, os.str());
      return kOk;
    }

    if (*sim) {
      cfg.validate();
      const std::filesystem::path dir(cfg.out);
      std::error_code ec;
      std::filesystem::create_directories(dir, ec);
      if (ec) throw IoError("cannot create output directory '" + cfg.out + "': " + ec.message());
      const CampaignResult res = run_campaign(cfg);
      std::ostringstream runs, hist;
      write_runs_csv(runs, res);
      write_histogram_csv(hist, res.histogram);
      write_text_file((dir / "runs.csv").string(), runs.str());
      write_text_file((dir / "histogram.csv").string(), hist.str());
      write_text_file((dir / "summary.json").string(), to_json(res).dump(2) + "\n");
      std::cout << "mean " << detail::format_double(res.mean) << " std " << detail::format_double(res.std_dev)
                << " reference " << detail::format_double(res.reference.V_star) << '\n';
      return kOk;
    }

    if (*ten) {
      cfg.validate(false);
      CorrelationTensor t;
      if (cfg.eta < 1.0) {
        t = reference_values(cfg).tensor;
      } else if (exact) {
        if (!cfg.N) throw ConfigError("--exact needs a finite level N");
        const TmsvState state(cfg.z, cfg.n_max);
        t = correlation_tensor_exact(tmsv_ket(state), state.dim(), *cfg.N);
      } else {
        t = tmsv_tensor_analytic(cfg.z, cfg.N);
      }
      nlohmann::json j = to_json(t);
      j["z"] = cfg.z;
      j["eta"] = cfg.eta;
      emit(out, j.dump(2) + "\n");
      return kOk;
    }

    if (*maxc) {
      std::ifstream in(tensor_path);
      if (!in) throw IoError("cannot open tensor file '" + tensor_path + "'");
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("tensor file is not valid JSON: ") + e.what());
      }
      OptimizerSettings opt;
      opt.starts = starts;
      if (flags.seed) opt.seed = cfg.seed;
      emit(out, to_json(maximize_violation(tensor_from_json(j), opt)).dump(2) + "\n");
      return kOk;
    }

    if (*ver) {
      bool all = true;
      for (const auto& c : run_verification_suite(cfg.seed)) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
        all = all && c.passed;
      }
      return all ? kOk : kFailure;
    }
  } catch (const ConfigError& e) {
    return report("config", e.what(), kConfig);
  } catch (const IoError& e) {
    return report("io", e.what(), kIo);
  } catch (const std::invalid_argument& e) {
    return report("input", e.what(), kInput);
  } catch (const std::domain_error& e) {
    return report("domain", e.what(), kInput);
  } catch (const std::exception& e) {
    return report("internal", e.what(), kFailure);
  }
  return kOk;
}
