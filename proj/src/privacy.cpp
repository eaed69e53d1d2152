#include "fedpower/privacy.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "fedpower/error.hpp"

namespace fedpower {

namespace {

// sqrt(2 ln(arg)); the Gaussian mechanism needs arg > 1.
double log_factor(double arg, const char* site) {
  if (!(arg > 1.0)) {
    std::ostringstream os;
    os << site << ": Gaussian mechanism needs 1.25 R q / delta > 1, got " << arg;
    throw InvalidBudget(os.str());
  }
  return std::sqrt(2.0 * std::log(arg));
}

void check_epsilon(double eps, const char* what) {
  if (std::isnan(eps) || !(eps > 0.0)) {
    std::ostringstream os;
    os << what << " must be > 0 (or +inf), got " << eps;
    throw InvalidBudget(os.str());
  }
}

// Noise multiplier for one site: rounds * weight / (eps * min_shard) scaled
// by the log factor; zero when the site's budget is infinite.
double site_scale(double rounds, double weight, double eps, double min_shard,
                  double log_arg, const char* site) {
  if (std::isinf(eps)) return 0.0;
  return rounds * weight / (eps * min_shard) * log_factor(log_arg, site);
}

}  // namespace

bool PrivacyConfig::noiseless() const noexcept {
  if (split) return std::isinf(split->local) && std::isinf(split->server);
  return std::isinf(epsilon);
}

void validate(const PrivacyConfig& cfg) {
  if (cfg.split) {
    check_epsilon(cfg.split->local, "epsilon_local");
    check_epsilon(cfg.split->server, "epsilon_server");
  } else {
    check_epsilon(cfg.epsilon, "epsilon");
  }
  if (cfg.noiseless()) return;
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) {
    std::ostringstream os;
    os << "delta must lie in (0, 1), got " << cfg.delta;
    throw InvalidBudget(os.str());
  }
  if (cfg.rounds < 1) throw InvalidBudget("noise enabled but no communication rounds");
}

NoiseScales scales_full(const PrivacyConfig& cfg, std::size_t min_shard,
                        double max_weight) {
  validate(cfg);
  if (min_shard < 1) throw InvalidArgument("min_shard must be >= 1");
  if (!(max_weight > 0.0 && max_weight <= 1.0)) {
    throw InvalidArgument("max_weight must lie in (0, 1]");
  }
  NoiseScales out;
  if (cfg.noiseless()) return out;
  const double s = double(min_shard);
  if (cfg.split) {
    const double arg = 1.25 / cfg.delta;
    out.sigma_local = site_scale(1.0, 1.0, cfg.split->local, s, arg, "local");
    out.sigma_server_full = site_scale(1.0, max_weight, cfg.split->server, s, arg, "server");
    return out;
  }
  const double r = double(cfg.rounds);
  const double arg = 1.25 * r / cfg.delta;
  out.sigma_local = site_scale(r, 1.0, cfg.epsilon, s, arg, "local");
  out.sigma_server_full = out.sigma_local * max_weight;
  return out;
}

NoiseScales scales_partial(const PrivacyConfig& cfg, std::size_t min_shard,
                           std::span<const double> weights, std::size_t participants,
                           SamplingScheme scheme) {
  validate(cfg);
  const std::size_t m = weights.size();
  if (min_shard < 1) throw InvalidArgument("min_shard must be >= 1");
  if (m == 0) throw InvalidArgument("no workers");
  if (participants < 1 || participants > m) {
    throw InvalidArgument("participants K must lie in [1, m]");
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("weights must sum to 1");

  NoiseScales out;
  if (cfg.noiseless()) return out;

  double p_max = 0.0;
  for (double p : weights) p_max = std::max(p_max, p);
  const double q_max =
      scheme == SamplingScheme::with_replacement ? p_max : 1.0 / double(m);
  const double s = double(min_shard);
  const double k = double(participants);
  const double md = double(m);

  if (cfg.split) {
    const double arg = 1.25 / cfg.delta;
    out.sigma_local_partial =
        site_scale(1.0, 1.0, cfg.split->local, s, 1.25 * q_max / cfg.delta, "local");
    out.sigma_server_s1 = site_scale(1.0, 1.0 / k, cfg.split->server, s, arg, "server");
    out.sigma_server_s2 =
        site_scale(1.0, md * p_max / k, cfg.split->server, s, arg, "server");
    return out;
  }
  const double r = double(cfg.rounds);
  const double arg = 1.25 * r / cfg.delta;
  out.sigma_local_partial =
      site_scale(r, 1.0, cfg.epsilon, s, 1.25 * r * q_max / cfg.delta, "local");
  out.sigma_server_s1 = site_scale(r, 1.0 / k, cfg.epsilon, s, arg, "server");
  out.sigma_server_s2 = site_scale(r, md * p_max / k, cfg.epsilon, s, arg, "server");
  return out;
}

Leakage account(const PrivacyConfig& cfg) { return account_after(cfg, cfg.rounds); }

Leakage account_after(const PrivacyConfig& cfg, std::size_t rounds_done) {
  if (rounds_done == 0) return {};
  if (cfg.noiseless()) return {kInfinity, 0.0};
  const double r = double(rounds_done);
  if (cfg.split) {
    return {r * (cfg.split->local + cfg.split->server), 2.0 * r * cfg.delta};
  }
  if (rounds_done >= cfg.rounds) return {2.0 * cfg.epsilon, 2.0 * cfg.delta};
  const double frac = r / double(cfg.rounds);
  return {2.0 * cfg.epsilon * frac, 2.0 * cfg.delta * frac};
}

}  // namespace fedpower
