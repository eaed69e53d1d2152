#pragma once

// Experiment runner behind the command-line tool: JSON configuration,
// seeded repeats, reproducible CSV traces and summary tables.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedpower/data.hpp"
#include "fedpower/engine.hpp"

namespace fedpower {

inline constexpr int kTraceSchemaVersion = 1;
inline constexpr int kDefaultMinWindow = 40;
inline constexpr const char* kTraceColumns =
    "t,comm_count,eps_spent,delta_spent,sin_theta_k,rho_t,eta,wall_ms";

struct DatasetSource {
  std::optional<std::filesystem::path> libsvm;
  std::optional<Index> libsvm_dim;
  std::optional<SyntheticSpec> synthetic;
  /// Max-abs column scaling into [-1, 1].
  bool scale = true;
  /// Sort rows by this column before partitioning (heterogeneous shards
  /// when combined with a contiguous partition).
  std::optional<Index> sort_by_column;
};

struct ExperimentConfig {
  DatasetSource dataset;
  std::size_t workers = 1;  // m
  PartitionMode partition = PartitionMode::shuffled;
  RunConfig run;            // run.seed is the root seed
  std::size_t repeat = 1;
  /// The minimum error is taken over records with t <= min_window
  /// (defaults to kDefaultMinWindow, capped at the horizon).
  std::optional<int> min_window;
  std::filesystem::path out;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& cfg);
/// Reads a JSON file; relative dataset paths resolve against its directory.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Loads or generates the global matrix (with scaling and sorting applied).
Matrix load_matrix(const DatasetSource& source);

/// Seed of repeat j under a root seed.
std::uint64_t repeat_seed(std::uint64_t root, std::size_t j);

struct Summary {
  double final_mean = 0.0;
  double final_std = 0.0;
  double min_mean = 0.0;
  double min_std = 0.0;
};

/// Mean and sample standard deviation (0 for a single value).
std::pair<double, double> mean_std(std::span<const double> xs);

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<std::uint64_t> seeds;
  std::vector<RunTrace> traces;
  Summary summary;
};

/// Executes cfg.repeat FedPower runs. V_k is computed once from the
/// assembled global matrix and shared by all repeats.
ExperimentResult run_experiment(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Matrix& global,
                                const OrthonormalBasis& reference);

void write_trace_csv(std::ostream& out, const ExperimentResult& result);

/// Records per repeat, read back from a trace CSV.
std::vector<std::vector<RunRecord>> parse_trace_csv(std::istream& in);

struct ComparisonRow {
  std::string algorithm;
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> errors;
};

/// FedPower with each alignment rule against UDA, WDA and DR-SVD; final
/// subspace error of each over cfg.repeat repeats.
std::vector<ComparisonRow> compare_baselines(const ExperimentConfig& cfg);
void write_comparison_csv(std::ostream& out, const ExperimentConfig& cfg,
                          std::span<const ComparisonRow> rows);

struct SweepEntry {
  double epsilon = 0.0;
  std::string status = "ok";  // "ok" or the error kind
  std::string message;
  std::optional<ExperimentResult> result;
  Leakage total;
};

/// One experiment per epsilon. With an epsilon split configured the swept
/// value is the local budget and the server budget stays fixed. Budget
/// errors are recorded per entry without aborting the sweep.
std::vector<SweepEntry> privacy_sweep(const ExperimentConfig& cfg,
                                      std::span<const double> epsilons);
void write_sweep_csv(std::ostream& out, const ExperimentConfig& cfg,
                     std::span<const SweepEntry> entries);

/// Shape, shard sizes, eta and leading spectrum of the configured dataset.
nlohmann::json inspect_dataset(const ExperimentConfig& cfg);

/// Shortest round-trip decimal form ("inf", "nan" for non-finite values).
std::string format_number(double v);

}  // namespace fedpower
