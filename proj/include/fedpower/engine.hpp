#pragma once

// FedPower simulation: workers run power iterations on their own shard and
// only communicate at scheduled rounds, where their bases are aligned to a
// baseline worker, perturbed with calibrated Gaussian noise and averaged by
// the server.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "fedpower/data.hpp"
#include "fedpower/linalg.hpp"
#include "fedpower/privacy.hpp"
#include "fedpower/rng.hpp"

namespace fedpower {

// ---------------------------------------------------------------------------
// Synchronization schedules

/// Communicate at every multiple of `period`.
struct FixedPeriod {
  int period = 1;
};
/// Communicate after period0 local steps, then period0 - 1, ... down to 1.
struct DecayingPeriod {
  int initial_period = 1;
};
struct ExplicitSteps {
  std::vector<int> steps;
};
using ScheduleKind = std::variant<FixedPeriod, DecayingPeriod, ExplicitSteps>;

/// Strictly increasing iteration indices in [1, horizon] at which the
/// workers communicate.
class SyncSchedule {
 public:
  SyncSchedule(std::vector<int> steps, int horizon);

  const std::vector<int>& steps() const noexcept { return steps_; }
  int horizon() const noexcept { return horizon_; }
  std::size_t size() const noexcept { return steps_.size(); }
  bool empty() const noexcept { return steps_.empty(); }
  bool contains(int t) const;
  /// Number of communication rounds at or before t.
  std::size_t count_through(int t) const;

 private:
  std::vector<int> steps_;
  int horizon_;
};

SyncSchedule build_schedule(const ScheduleKind& kind, int horizon);

// ---------------------------------------------------------------------------
// Run configuration and trace

struct FullParticipation {};
struct PartialParticipation {
  std::size_t participants = 1;  // K
  SamplingScheme scheme = SamplingScheme::without_replacement;
};
using Participation = std::variant<FullParticipation, PartialParticipation>;

struct RunConfig {
  Index k = 1;      // target rank
  Index r = 1;      // iteration rank, r >= k
  int iterations = 1;  // T
  ScheduleKind schedule = FixedPeriod{1};
  Alignment alignment = Alignment::sign_fix;
  /// `rounds` is filled in from the schedule.
  PrivacyConfig privacy;
  Participation participation = FullParticipation{};
  std::uint64_t seed = 0;
  /// Record metrics at every step instead of only at syncs and t = T.
  bool record_every_step = false;
  bool record_wall_time = false;
  /// Keep the output estimate of every recorded step in RunTrace::iterates.
  bool keep_iterates = false;
  /// Worker fan-out; results do not depend on it.
  std::size_t threads = 1;
  /// Local iterates on shards with fewer rows than r are rank deficient by
  /// construction, so the engine completes them by default.
  RankPolicy rank_policy = RankPolicy::complete;
};

struct WorkerState {
  std::size_t id = 0;
  Matrix shard_gram;
  Matrix z;  // d x r, orthonormal columns
};

struct RunRecord {
  int t = 0;
  std::size_t comm_count = 0;
  double eps_spent = 0.0;
  double delta_spent = 0.0;
  double sin_theta_k = 0.0;
  double rho_t = 0.0;
  double eta = 0.0;
  double wall_ms = 0.0;
};

struct RunTrace {
  std::vector<RunRecord> records;
  OrthonormalBasis z_bar;
  NoiseScales scales;
  std::size_t rounds = 0;
  /// Partial participation with no sync before T: the output aggregated
  /// every worker with uniform-scheme weights.
  bool output_used_all_workers = false;
  /// Estimates at the recorded steps, when RunConfig::keep_iterates is set.
  std::vector<Matrix> iterates;
};

// ---------------------------------------------------------------------------
// Operations

/// Top-k eigenvectors of the global M = sum_i p_i M_i.
OrthonormalBasis reference_subspace(const ShardedDataset& data, Index k);

/// Full-participation FedPower. `reference` is V_k for the error metric;
/// the overload without it computes V_k from the dataset.
RunTrace run_full(const ShardedDataset& data, const RunConfig& cfg,
                  const OrthonormalBasis& reference);
RunTrace run_full(const ShardedDataset& data, const RunConfig& cfg);

/// Partial-participation FedPower (Scheme 1 or Scheme 2 sampling).
RunTrace run_partial(const ShardedDataset& data, const RunConfig& cfg,
                     const OrthonormalBasis& reference);
RunTrace run_partial(const ShardedDataset& data, const RunConfig& cfg);

/// Dispatch on cfg.participation.
RunTrace run(const ShardedDataset& data, const RunConfig& cfg,
             const OrthonormalBasis& reference);

/// max_i ||Z_i D_i - Z_base||_2 with D_i from `rule` (identity for none).
double residual_rho(std::span<const Matrix> bases, Alignment rule, std::size_t baseline);

/// max_i ||M_i - M||_2 / ||M||_2.
double local_approx_eta(const ShardedDataset& data);

/// Full participation: argmax_i p_i, lowest index on ties.
std::size_t baseline_index(std::span<const double> weights);
/// Partial participation: lowest index among the active workers.
std::size_t baseline_index(std::span<const std::size_t> active);

/// Draw S_t. Scheme 1 returns K i.i.d. indices with P(i) = p_i (repeats
/// allowed); Scheme 2 returns K distinct uniform indices. Sorted ascending.
std::vector<std::size_t> sample_participants(std::span<const double> weights,
                                             std::size_t participants,
                                             SamplingScheme scheme, NoiseStream& stream);

/// Partial aggregation before noise: (1/K) sum over S of Y_i for Scheme 1,
/// (m/K) sum over S of p_i Y_i for Scheme 2. `sampled` counts multiplicity.
Matrix aggregate_partial(std::span<const Matrix> uploads, std::span<const double> weights,
                         std::span<const std::size_t> sampled, SamplingScheme scheme);

}  // namespace fedpower
