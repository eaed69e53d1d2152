#include "fedpower/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace fedpower {

// ---------------------------------------------------------------------------
// Schedules

SyncSchedule::SyncSchedule(std::vector<int> steps, int horizon)
    : steps_(std::move(steps)), horizon_(horizon) {
  if (horizon_ < 1) throw InvalidArgument("horizon T must be >= 1");
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    if (steps_[i] < 1 || steps_[i] > horizon_) {
      throw InvalidArgument("sync step " + std::to_string(steps_[i]) +
                            " outside [1, " + std::to_string(horizon_) + "]");
    }
    if (i > 0 && steps_[i] <= steps_[i - 1]) {
      throw InvalidArgument("sync steps must be strictly increasing");
    }
  }
}

bool SyncSchedule::contains(int t) const {
  return std::binary_search(steps_.begin(), steps_.end(), t);
}

std::size_t SyncSchedule::count_through(int t) const {
  return std::size_t(std::upper_bound(steps_.begin(), steps_.end(), t) - steps_.begin());
}

SyncSchedule build_schedule(const ScheduleKind& kind, int horizon) {
  if (horizon < 1) throw InvalidArgument("horizon T must be >= 1");
  std::vector<int> steps;
  if (const auto* f = std::get_if<FixedPeriod>(&kind)) {
    if (f->period < 1) throw InvalidArgument("period p must be >= 1");
    for (int t = f->period; t <= horizon; t += f->period) steps.push_back(t);
  } else if (const auto* dcy = std::get_if<DecayingPeriod>(&kind)) {
    if (dcy->initial_period < 1) throw InvalidArgument("initial period must be >= 1");
    int t = 0;
    for (int l = 0;; ++l) {
      t += std::max(dcy->initial_period - l, 1);
      if (t > horizon) break;
      steps.push_back(t);
    }
  } else {
    steps = std::get<ExplicitSteps>(kind).steps;
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  }
  return SyncSchedule(std::move(steps), horizon);
}

// ---------------------------------------------------------------------------
// Diagnostics

std::size_t baseline_index(std::span<const double> weights) {
  if (weights.empty()) throw InvalidArgument("baseline of an empty worker set");
  return std::size_t(std::max_element(weights.begin(), weights.end()) - weights.begin());
}

std::size_t baseline_index(std::span<const std::size_t> active) {
  if (active.empty()) throw InvalidArgument("baseline of an empty worker set");
  return *std::min_element(active.begin(), active.end());
}

double residual_rho(std::span<const Matrix> bases, Alignment rule, std::size_t baseline) {
  if (bases.empty()) throw InvalidArgument("residual_rho needs at least one worker");
  if (baseline >= bases.size()) throw IndexOutOfRange("baseline worker out of range");
  const Matrix& base = bases[baseline];
  double rho = 0.0;
  for (const auto& z : bases) {
    if (z == base) continue;
    const Matrix d = alignment_matrix(rule, z, base);
    rho = std::max(rho, spectral_norm(z * d - base));
  }
  return rho;
}

double local_approx_eta(const ShardedDataset& data) {
  const Matrix m = data.global_gram();
  const double norm = spectral_norm(m);
  if (norm == 0.0) throw DegenerateData("global Gram matrix is zero");
  double eta = 0.0;
  for (const auto& mi : data.local_grams()) eta = std::max(eta, spectral_norm(mi - m) / norm);
  return eta;
}

OrthonormalBasis reference_subspace(const ShardedDataset& data, Index k) {
  if (k < 1 || k > data.cols()) throw InvalidArgument("reference rank out of range");
  return svd(data.global_gram()).u.leading(k);
}

// ---------------------------------------------------------------------------
// Sampling and aggregation

std::vector<std::size_t> sample_participants(std::span<const double> weights,
                                             std::size_t participants,
                                             SamplingScheme scheme, NoiseStream& stream) {
  const std::size_t m = weights.size();
  if (participants < 1 || participants > m) {
    throw InvalidArgument("participants K must lie in [1, m]");
  }
  std::vector<std::size_t> out;
  out.reserve(participants);
  if (scheme == SamplingScheme::with_replacement) {
    std::vector<double> cumulative(m);
    std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
    for (std::size_t j = 0; j < participants; ++j) {
      const double u = stream.uniform() * cumulative.back();
      const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      out.push_back(std::min(std::size_t(it - cumulative.begin()), m - 1));
    }
  } else {
    std::vector<std::size_t> pool(m);
    std::iota(pool.begin(), pool.end(), std::size_t(0));
    for (std::size_t j = 0; j < participants; ++j) {
      std::swap(pool[j], pool[j + std::size_t(stream.below(m - j))]);
      out.push_back(pool[j]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Matrix aggregate_partial(std::span<const Matrix> uploads, std::span<const double> weights,
                         std::span<const std::size_t> sampled, SamplingScheme scheme) {
  if (sampled.empty()) throw InvalidArgument("empty participant set");
  if (uploads.size() != weights.size()) throw DimensionMismatch("uploads vs weights");
  Matrix sum = Matrix::Zero(uploads[sampled.front()].rows(), uploads[sampled.front()].cols());
  const double k = double(sampled.size());
  if (scheme == SamplingScheme::with_replacement) {
    for (std::size_t i : sampled) sum += uploads[i];
    return sum / k;
  }
  for (std::size_t i : sampled) sum += weights[i] * uploads[i];
  return sum * (double(weights.size()) / k);
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    const std::size_t count = std::min(threads, n);
    pool.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

class Simulation {
 public:
  Simulation(const ShardedDataset& data, const RunConfig& cfg,
             const OrthonormalBasis& reference)
      : data_(data),
        cfg_(cfg),
        reference_(reference),
        schedule_(build_schedule(cfg.schedule, cfg.iterations)),
        weights_(data.weights()) {
    validate();
    partial_ = std::get_if<PartialParticipation>(&cfg_.participation) != nullptr;
    if (partial_) partial_cfg_ = std::get<PartialParticipation>(cfg_.participation);

    privacy_ = cfg_.privacy;
    privacy_.rounds = schedule_.size();
    noisy_ = !privacy_.noiseless() && privacy_.rounds > 0;
    if (noisy_) {
      if (partial_) {
        scales_ = scales_partial(privacy_, data_.min_shard_rows(), weights_,
                                 partial_cfg_.participants, partial_cfg_.scheme);
        local_sigma_ = scales_.sigma_local_partial;
        server_sigma_ = partial_cfg_.scheme == SamplingScheme::with_replacement
                            ? scales_.sigma_server_s1
                            : scales_.sigma_server_s2;
      } else {
        scales_ = scales_full(privacy_, data_.min_shard_rows(), data_.max_weight());
        local_sigma_ = scales_.sigma_local;
        server_sigma_ = scales_.sigma_server_full;
      }
    } else {
      validate_budget_shape();
    }

    eta_ = local_approx_eta(data_);
    full_baseline_ = baseline_index(weights_);

    const Matrix z0 =
        orth(gaussian_matrix(data_.cols(), cfg_.r, cfg_.seed, {StreamSite::init, 0, 0}),
             cfg_.rank_policy)
            .matrix();
    const auto grams = data_.local_grams();
    workers_.reserve(grams.size());
    for (std::size_t i = 0; i < grams.size(); ++i) workers_.push_back({i, grams[i], z0});
  }

  RunTrace execute() {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t m = workers_.size();
    std::vector<Matrix> uploads(m);
    std::size_t comm = 0;
    std::vector<RunRecord> records;
    std::vector<Matrix> iterates;

    for (int t = 1; t <= cfg_.iterations; ++t) {
      parallel_for(m, cfg_.threads,
                   [&](std::size_t i) { uploads[i] = workers_[i].shard_gram * workers_[i].z; });

      if (schedule_.contains(t)) {
        ++comm;
        communicate(t, uploads);
        const Matrix z = orth(uploads.front(), cfg_.rank_policy).matrix();
        for (auto& w : workers_) w.z = z;
      } else {
        parallel_for(m, cfg_.threads, [&](std::size_t i) {
          workers_[i].z = orth(uploads[i], cfg_.rank_policy).matrix();
        });
      }

      if (cfg_.record_every_step || schedule_.contains(t) || t == cfg_.iterations) {
        RunRecord rec;
        rec.t = t;
        rec.comm_count = comm;
        const Leakage spent = account_after(privacy_, comm);
        rec.eps_spent = spent.epsilon;
        rec.delta_spent = spent.delta;
        const OrthonormalBasis est = estimate(t);
        rec.sin_theta_k = sin_theta_k(est, reference_);
        if (cfg_.keep_iterates) iterates.push_back(est.matrix());
        rec.rho_t = residual_rho(current_bases(), cfg_.alignment, current_baseline());
        rec.eta = eta_;
        if (cfg_.record_wall_time) {
          rec.wall_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start)
                            .count();
        }
        records.push_back(rec);
      }
    }

    return RunTrace{std::move(records), estimate(cfg_.iterations), scales_,
                    schedule_.size(), partial_ && last_sampled_.empty(),
                    std::move(iterates)};
  }

 private:
  void validate() const {
    const Index d = data_.cols();
    if (cfg_.k < 1 || cfg_.k > cfg_.r || cfg_.r > d) {
      throw InvalidArgument("need 1 <= k <= r <= d, got k=" + std::to_string(cfg_.k) +
                            " r=" + std::to_string(cfg_.r) + " d=" + std::to_string(d));
    }
    if (reference_.dim() != d || reference_.rank() != cfg_.k) {
      throw DimensionMismatch("reference subspace must be d x k");
    }
    if (const auto* p = std::get_if<PartialParticipation>(&cfg_.participation)) {
      if (p->participants < 1 || p->participants > data_.workers()) {
        throw InvalidArgument("participants K must lie in [1, m]");
      }
    }
  }

  // Catch malformed budgets even when no noise will be drawn.
  void validate_budget_shape() const {
    PrivacyConfig probe = privacy_;
    probe.rounds = std::max<std::size_t>(probe.rounds, 1);
    fedpower::validate(probe);
  }

  void communicate(int t, std::vector<Matrix>& uploads) {
    const std::size_t m = workers_.size();
    std::vector<std::size_t> sampled;
    if (partial_) {
      NoiseStream stream(cfg_.seed, {StreamSite::sampling, std::uint32_t(t), 0});
      sampled = sample_participants(weights_, partial_cfg_.participants, partial_cfg_.scheme,
                                    stream);
    } else {
      sampled.resize(m);
      std::iota(sampled.begin(), sampled.end(), std::size_t(0));
    }
    std::vector<std::size_t> distinct = sampled;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    const std::size_t base = partial_ ? baseline_index(std::span<const std::size_t>(sampled))
                                      : full_baseline_;
    const Matrix& z_base = workers_[base].z;

    std::vector<double> aligned_max(distinct.size(), 0.0);
    parallel_for(distinct.size(), cfg_.threads, [&](std::size_t j) {
      const std::size_t i = distinct[j];
      const Matrix& z = workers_[i].z;
      const Matrix d = alignment_matrix(cfg_.alignment, z, z_base);
      uploads[i] = uploads[i] * d;
      if (noisy_) {
        const double scale = detail::max_abs(z) * local_sigma_;
        uploads[i] += sample_noise(uploads[i].rows(), uploads[i].cols(), scale, cfg_.seed,
                                   {StreamSite::local_noise, std::uint32_t(t),
                                    std::uint32_t(i)});
        aligned_max[j] = detail::max_abs(Matrix(z * d));
      }
    });

    Matrix aggregate;
    if (partial_) {
      aggregate = aggregate_partial(uploads, weights_, sampled, partial_cfg_.scheme);
    } else {
      aggregate = Matrix::Zero(uploads.front().rows(), uploads.front().cols());
      for (std::size_t i = 0; i < m; ++i) aggregate += weights_[i] * uploads[i];
    }
    if (noisy_) {
      const double scale = *std::max_element(aligned_max.begin(), aligned_max.end()) *
                           server_sigma_;
      aggregate += sample_noise(aggregate.rows(), aggregate.cols(), scale, cfg_.seed,
                                {StreamSite::server_noise, std::uint32_t(t), 0});
    }
    for (auto& u : uploads) u = aggregate;
    last_sampled_ = std::move(sampled);
  }

  std::vector<Matrix> current_bases() const {
    std::vector<Matrix> out;
    out.reserve(workers_.size());
    for (const auto& w : workers_) out.push_back(w.z);
    return out;
  }

  std::size_t current_baseline() const {
    if (!partial_) return full_baseline_;
    return last_sampled_.empty() ? 0 : baseline_index(std::span<const std::size_t>(last_sampled_));
  }

  // The output estimator evaluated at step t (before the final orth).
  OrthonormalBasis estimate(int t) const {
    const bool synced = schedule_.contains(t);
    const std::size_t m = workers_.size();
    const Index d = data_.cols();

    std::vector<std::size_t> members;
    SamplingScheme scheme = SamplingScheme::without_replacement;
    if (partial_ && !last_sampled_.empty()) {
      members = last_sampled_;
      scheme = partial_cfg_.scheme;
    } else {
      members.resize(m);
      std::iota(members.begin(), members.end(), std::size_t(0));
    }
    const std::size_t base = current_baseline();

    std::vector<Matrix> terms(m);
    for (std::size_t i : members) {
      if (!terms[i].size()) {
        terms[i] = synced ? workers_[i].z
                          : Matrix(workers_[i].z *
                                   alignment_matrix(cfg_.alignment, workers_[i].z,
                                                    workers_[base].z));
      }
    }
    Matrix sum = Matrix::Zero(d, cfg_.r);
    if (!partial_) {
      for (std::size_t i = 0; i < m; ++i) sum += weights_[i] * terms[i];
    } else {
      sum = aggregate_partial(terms, weights_, members, scheme);
    }
    return orth(sum, cfg_.rank_policy);
  }

  const ShardedDataset& data_;
  RunConfig cfg_;
  const OrthonormalBasis& reference_;
  SyncSchedule schedule_;
  std::vector<double> weights_;
  bool partial_ = false;
  PartialParticipation partial_cfg_;
  PrivacyConfig privacy_;
  bool noisy_ = false;
  NoiseScales scales_;
  double local_sigma_ = 0.0;
  double server_sigma_ = 0.0;
  double eta_ = 0.0;
  std::size_t full_baseline_ = 0;
  std::vector<WorkerState> workers_;
  std::vector<std::size_t> last_sampled_;
};

}  // namespace

RunTrace run_full(const ShardedDataset& data, const RunConfig& cfg,
                  const OrthonormalBasis& reference) {
  if (!std::holds_alternative<FullParticipation>(cfg.participation)) {
    throw InvalidArgument("run_full needs full participation");
  }
  return Simulation(data, cfg, reference).execute();
}

RunTrace run_full(const ShardedDataset& data, const RunConfig& cfg) {
  return run_full(data, cfg, reference_subspace(data, cfg.k));
}

RunTrace run_partial(const ShardedDataset& data, const RunConfig& cfg,
                     const OrthonormalBasis& reference) {
  if (!std::holds_alternative<PartialParticipation>(cfg.participation)) {
    throw InvalidArgument("run_partial needs partial participation");
  }
  return Simulation(data, cfg, reference).execute();
}

RunTrace run_partial(const ShardedDataset& data, const RunConfig& cfg) {
  return run_partial(data, cfg, reference_subspace(data, cfg.k));
}

RunTrace run(const ShardedDataset& data, const RunConfig& cfg,
             const OrthonormalBasis& reference) {
  return Simulation(data, cfg, reference).execute();
}

}  // namespace fedpower
