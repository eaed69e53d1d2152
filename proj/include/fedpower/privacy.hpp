#pragma once

// Gaussian-mechanism noise calibration and (epsilon, delta) accounting for
// the two perturbation sites of every communication round: the worker
// upload and the server broadcast.

#include <cstddef>
#include <limits>
#include <optional>
#include <span>

namespace fedpower {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Per-round budgets for the re-divided mode: every round the worker
/// upload is (local, delta)-DP and the server broadcast is (server, delta)-DP.
/// Either may be +inf to switch that site off.
struct EpsilonSplit {
  double local = kInfinity;
  double server = kInfinity;
};

struct PrivacyConfig {
  /// Total budget for each of the two sites over the whole run; +inf means
  /// noiseless.
  double epsilon = kInfinity;
  double delta = 1e-5;
  /// Number of communication rounds R the budget is spread over.
  std::size_t rounds = 0;
  std::optional<EpsilonSplit> split;

  bool noiseless() const noexcept;
};

/// Per-round Gaussian standard deviations, before the runtime
/// ||Z||_max factor is applied.
struct NoiseScales {
  double sigma_local = 0.0;          // full participation, worker upload
  double sigma_server_full = 0.0;    // full participation, server
  double sigma_local_partial = 0.0;  // partial participation, worker upload
  double sigma_server_s1 = 0.0;      // partial, sampling with replacement
  double sigma_server_s2 = 0.0;      // partial, uniform without replacement
};

enum class SamplingScheme {
  with_replacement,     // Scheme 1: K i.i.d. draws with P(i) = p_i
  without_replacement,  // Scheme 2: K uniform draws without replacement
};

/// sigma  = R / (eps min s_i) * sqrt(2 ln(1.25 R / delta))
/// sigma' = sigma * max_i p_i
NoiseScales scales_full(const PrivacyConfig& cfg, std::size_t min_shard,
                        double max_weight);

/// sigma   = R / (eps min s_i) * sqrt(2 ln(1.25 R max_i q_i / delta))
/// sigma'  = R / (K eps min s_i) * sqrt(2 ln(1.25 R / delta))
/// sigma'' = R m max_i p_i / (K eps min s_i) * sqrt(2 ln(1.25 R / delta))
/// with q_i = p_i (Scheme 1) or 1/m (Scheme 2). Throws InvalidBudget when
/// the argument of a logarithm is <= 1.
NoiseScales scales_partial(const PrivacyConfig& cfg, std::size_t min_shard,
                           std::span<const double> weights, std::size_t participants,
                           SamplingScheme scheme);

struct Leakage {
  double epsilon = 0.0;
  double delta = 0.0;
};

/// Total leakage of a complete run by basic composition: (2 eps, 2 delta),
/// or R (eps_local + eps_server, 2 delta) in split mode.
Leakage account(const PrivacyConfig& cfg);

/// Leakage after `rounds_done` of the R rounds: (2 eps r / R, 2 delta r / R).
Leakage account_after(const PrivacyConfig& cfg, std::size_t rounds_done);

/// Throws InvalidBudget on an unusable configuration.
void validate(const PrivacyConfig& cfg);

}  // namespace fedpower
