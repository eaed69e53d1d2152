// fedpower: run FedPower experiments from a JSON config.
//
//   fedpower run --config exp.json [--seed N] [--out trace.csv] [--threads N]
//   fedpower compare --config exp.json
//   fedpower privacy-sweep --config exp.json --eps 0.5,1,2,4
//   fedpower inspect-dataset --config exp.json
//
// Thread count: --threads, else FEDPOWER_THREADS, else the config value.
// Exit status is 0 only when every run completed; failures print a JSON
// object {"error": kind, "message": ...} on stderr.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedpower/error.hpp"
#include "fedpower/experiment.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_out = true) {
  cmd->add_option("-c,--config", o.config, "JSON experiment config")->required();
  cmd->add_option("--seed", o.seed, "Override the root seed");
  if (with_out) cmd->add_option("-o,--out", o.out, "Output CSV ('-' for stdout)");
  cmd->add_option("-j,--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
}

std::optional<std::size_t> env_threads() {
  const char* v = std::getenv("FEDPOWER_THREADS");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  if (*end != '\0' || n == 0) {
    throw fedpower::ConfigError("FEDPOWER_THREADS must be a positive integer, got '" +
                                std::string(v) + "'");
  }
  return n;
}

fedpower::ExperimentConfig resolve(const CommonOptions& o) {
  auto cfg = fedpower::load_config(o.config);
  if (o.seed) cfg.run.seed = *o.seed;
  if (o.out) cfg.out = *o.out;
  if (o.threads) {
    cfg.run.threads = *o.threads;
  } else if (auto env = env_threads()) {
    cfg.run.threads = *env;
  }
  return cfg;
}

template <class Write>
void emit(const std::filesystem::path& out, Write&& write) {
  if (out.empty() || out == "-") {
    write(std::cout);
    return;
  }
  std::ofstream file(out);
  if (!file) throw fedpower::IoError("cannot write " + out.string());
  write(file);
  if (!file) throw fedpower::IoError("write failed for " + out.string());
}

int fail(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated truncated SVD with the FedPower protocol"};
  app.require_subcommand(1);

  CommonOptions run_opts, cmp_opts, sweep_opts, inspect_opts;
  std::vector<double> epsilons;

  auto* run_cmd = app.add_subcommand("run", "Run FedPower and write a per-iteration trace");
  add_common(run_cmd, run_opts);
  auto* cmp_cmd = app.add_subcommand("compare", "Compare alignment rules and baselines");
  add_common(cmp_cmd, cmp_opts);
  auto* sweep_cmd = app.add_subcommand("privacy-sweep", "Error as a function of epsilon");
  add_common(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--eps", epsilons, "Comma-separated epsilon values")
      ->required()
      ->delimiter(',');
  auto* inspect_cmd = app.add_subcommand("inspect-dataset", "Print dataset statistics as JSON");
  add_common(inspect_cmd, inspect_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run_cmd) {
      const auto cfg = resolve(run_opts);
      const auto result = fedpower::run_experiment(cfg);
      emit(cfg.out, [&](std::ostream& os) { fedpower::write_trace_csv(os, result); });
      const auto& s = result.summary;
      std::cerr << "final sin_theta_k " << fedpower::format_number(s.final_mean) << " +/- "
                << fedpower::format_number(s.final_std) << " over " << cfg.repeat
                << " repeat(s)\n";
    } else if (*cmp_cmd) {
      const auto cfg = resolve(cmp_opts);
      const auto rows = fedpower::compare_baselines(cfg);
      emit(cfg.out, [&](std::ostream& os) { fedpower::write_comparison_csv(os, cfg, rows); });
    } else if (*sweep_cmd) {
      const auto cfg = resolve(sweep_opts);
      const auto entries = fedpower::privacy_sweep(cfg, epsilons);
      emit(cfg.out, [&](std::ostream& os) { fedpower::write_sweep_csv(os, cfg, entries); });
      if (!cfg.out.empty() && cfg.out != "-") {
        for (const auto& e : entries) {
          if (!e.result) continue;
          auto path = cfg.out;
          path.replace_filename(cfg.out.stem().string() + ".eps" +
                                fedpower::format_number(e.epsilon) + cfg.out.extension().string());
          emit(path, [&](std::ostream& os) { fedpower::write_trace_csv(os, *e.result); });
        }
      }
      std::size_t failed = 0;
      for (const auto& e : entries) failed += e.status != "ok";
      if (failed > 0) {
        return fail("SweepIncomplete", std::to_string(failed) + " of " +
                                           std::to_string(entries.size()) +
                                           " epsilon values failed; see the status column");
      }
    } else if (*inspect_cmd) {
      const auto cfg = resolve(inspect_opts);
      std::cout << fedpower::inspect_dataset(cfg).dump(2) << '\n';
    }
  } catch (const fedpower::Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail("InternalError", e.what());
  }
  return 0;
}
