#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "fedpower/error.hpp"
#include "fedpower/privacy.hpp"
#include "fedpower/rng.hpp"
#include "oracles.hpp"

using namespace fedpower;

namespace {

PrivacyConfig budget(double eps, double delta, std::size_t rounds) {
  PrivacyConfig cfg;
  cfg.epsilon = eps;
  cfg.delta = delta;
  cfg.rounds = rounds;
  return cfg;
}

// Straight transcription of the calibration formulas, kept separate from
// the library code.
double sigma_formula(double rounds, double eps, double min_s, double log_arg) {
  return rounds / (eps * min_s) * std::sqrt(2.0 * std::log(log_arg));
}

}  // namespace

TEST_SUITE("philox") {
  TEST_CASE("known-answer vectors") {
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) ==
          A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                        {0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                        {0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
  }
}

TEST_SUITE("noise streams") {
  TEST_CASE("stream ids pack without overlap") {
    std::set<std::uint64_t> seen;
    for (auto site : {StreamSite::init, StreamSite::local_noise, StreamSite::server_noise,
                      StreamSite::sampling})
      for (std::uint32_t t = 0; t < 5; ++t)
        for (std::uint32_t w = 0; w < 5; ++w) seen.insert(StreamId{site, t, w}.packed());
    CHECK(seen.size() == 4 * 5 * 5);
    CHECK(!stream_derivation_note().empty());
  }

  TEST_CASE("scale zero yields exact zeros") {
    CHECK(sample_noise(4, 3, 0.0, 1, {StreamSite::local_noise, 1, 0}) == Matrix::Zero(4, 3));
  }

  TEST_CASE("negative scale rejected") {
    CHECK_THROWS_AS(sample_noise(1, 1, -1.0, 1, {}), InvalidArgument);
  }

  TEST_CASE("same seed and stream are bit-identical") {
    const StreamId id{StreamSite::local_noise, 3, 7};
    CHECK(sample_noise(5, 4, 1.5, 42, id) == sample_noise(5, 4, 1.5, 42, id));
    CHECK(sample_noise(5, 4, 1.5, 42, id) != sample_noise(5, 4, 1.5, 43, id));
    CHECK(sample_noise(5, 4, 1.5, 42, id) !=
          sample_noise(5, 4, 1.5, 42, {StreamSite::local_noise, 3, 8}));
  }

  TEST_CASE("uniform stays inside the open unit interval") {
    NoiseStream s(5, {});
    for (int i = 0; i < 100000; ++i) {
      const double u = s.uniform();
      REQUIRE(u > 0.0);
      REQUIRE(u < 1.0);
    }
  }

  TEST_CASE("below is unbiased over a small range") {
    NoiseStream s(6, {});
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) ++counts[s.below(7)];
    for (int c : counts) CHECK(std::abs(c - n / 7.0) <= 4.0 * std::sqrt(n / 7.0));
  }

  TEST_CASE("empirical std over a million draws sits in the 3-sigma band") {
    const Matrix x = sample_noise(1000, 1000, 1.0, 2024, {StreamSite::local_noise, 1, 0});
    const double n = double(x.size());
    const double mean = x.mean();
    const double std = std::sqrt((x.array() - mean).square().sum() / (n - 1));
    CHECK(std >= 0.9986);
    CHECK(std <= 1.0014);
    CHECK(std::abs(mean) <= 3.0 / std::sqrt(n));
  }

  TEST_CASE("scaled draws pass a Kolmogorov-Smirnov test") {
    for (double scale : {1.0, 0.37, 12.5}) {
      const Matrix x = sample_noise(100000, 1, scale, 77, {StreamSite::server_noise, 2, 0});
      std::vector<double> xs(x.data(), x.data() + x.size());
      CHECK(oracle::ks_statistic(xs, scale) <= oracle::ks_critical(1e-3, xs.size()));
    }
  }

  TEST_CASE("distinct streams are uncorrelated") {
    const Index n = 100000;
    const Matrix a = sample_noise(n, 1, 1.0, 9, {StreamSite::local_noise, 1, 0});
    const Matrix b = sample_noise(n, 1, 1.0, 9, {StreamSite::local_noise, 1, 1});
    const Matrix c = sample_noise(n, 1, 1.0, 9, {StreamSite::local_noise, 2, 0});
    const double bound = 4.0 / std::sqrt(double(n));
    CHECK(std::abs(a.col(0).dot(b.col(0)) / double(n)) <= bound);
    CHECK(std::abs(a.col(0).dot(c.col(0)) / double(n)) <= bound);
  }
}

TEST_SUITE("noise calibration") {
  TEST_CASE("full participation hand value") {
    const NoiseScales s = scales_full(budget(1.0, 1.25 / std::numbers::e, 1), 1, 0.25);
    CHECK(std::abs(s.sigma_local - std::numbers::sqrt2) <= 1e-12);
    CHECK(std::abs(s.sigma_server_full - 0.25 * std::numbers::sqrt2) <= 1e-12);
  }

  TEST_CASE("full participation matches the formula") {
    const NoiseScales s = scales_full(budget(0.7, 1e-5, 12), 40, 0.1);
    const double expect = sigma_formula(12, 0.7, 40, 1.25 * 12 / 1e-5);
    CHECK(std::abs(s.sigma_local - expect) <= 1e-12);
    CHECK(std::abs(s.sigma_server_full - 0.1 * expect) <= 1e-12);
  }

  TEST_CASE("doubling epsilon halves both scales") {
    const NoiseScales a = scales_full(budget(1.0, 1e-3, 4), 5, 0.3);
    const NoiseScales b = scales_full(budget(2.0, 1e-3, 4), 5, 0.3);
    CHECK(std::abs(b.sigma_local - a.sigma_local / 2) <= 1e-15);
    CHECK(std::abs(b.sigma_server_full - a.sigma_server_full / 2) <= 1e-15);
  }

  TEST_CASE("infinite epsilon switches noise off") {
    const NoiseScales s = scales_full(budget(kInfinity, 1e-5, 3), 5, 0.5);
    CHECK(s.sigma_local == 0.0);
    CHECK(s.sigma_server_full == 0.0);
    const std::vector<double> w{0.5, 0.5};
    const NoiseScales p =
        scales_partial(budget(kInfinity, 1e-5, 3), 5, w, 1, SamplingScheme::with_replacement);
    CHECK(p.sigma_local_partial == 0.0);
    CHECK(p.sigma_server_s1 == 0.0);
    CHECK(p.sigma_server_s2 == 0.0);
  }

  TEST_CASE("formula inversion") {
    for (std::size_t rounds : {1u, 3u, 40u}) {
      for (double eps : {0.1, 1.0, 8.0}) {
        const double delta = 1e-4;
        const NoiseScales s = scales_full(budget(eps, delta, rounds), 7, 0.2);
        const double lhs = s.sigma_local * eps * 7.0 / double(rounds);
        CHECK(std::abs(lhs - std::sqrt(2 * std::log(1.25 * double(rounds) / delta))) <= 1e-12);
      }
    }
  }

  TEST_CASE("partial participation hand value") {
    const std::vector<double> w{0.5, 0.25, 0.25};
    const NoiseScales s =
        scales_partial(budget(1.0, 0.01, 2), 10, w, 2, SamplingScheme::with_replacement);
    CHECK(std::abs(s.sigma_local_partial - 0.621502292018448) <= 1e-12);
    CHECK(std::abs(s.sigma_local_partial - sigma_formula(2, 1.0, 10, 1.25 * 2 * 0.5 / 0.01)) <=
          1e-12);
    CHECK(std::abs(s.sigma_server_s1 - sigma_formula(2, 1.0, 10, 1.25 * 2 / 0.01) / 2) <= 1e-12);
    CHECK(std::abs(s.sigma_server_s2 - sigma_formula(2, 1.0, 10, 1.25 * 2 / 0.01) * 3 * 0.5 / 2) <=
          1e-12);
  }

  TEST_CASE("uniform scheme with K = m reduces to the full server scale") {
    const std::vector<double> w(4, 0.25);
    const PrivacyConfig cfg = budget(2.0, 1e-3, 3);
    const NoiseScales p = scales_partial(cfg, 5, w, 4, SamplingScheme::without_replacement);
    const NoiseScales f = scales_full(cfg, 5, 0.25);
    CHECK(std::abs(p.sigma_server_s2 - f.sigma_server_full) <= 1e-12);
    CHECK(std::abs(p.sigma_server_s2 - 0.30427290396673534) <= 1e-12);
  }

  TEST_CASE("log argument at or below one is an invalid budget") {
    const std::vector<double> w(100, 0.01);
    // 1.25 * 1 * (1/100) / 0.5 = 0.025 < 1
    CHECK_THROWS_AS(
        scales_partial(budget(1.0, 0.5, 1), 5, w, 10, SamplingScheme::without_replacement),
        InvalidBudget);
  }

  TEST_CASE("invalid inputs") {
    CHECK_THROWS_AS(scales_full(budget(-1.0, 1e-5, 1), 1, 0.5), InvalidBudget);
    CHECK_THROWS_AS(scales_full(budget(0.0, 1e-5, 1), 1, 0.5), InvalidBudget);
    CHECK_THROWS_AS(scales_full(budget(1.0, 1.0, 1), 1, 0.5), InvalidBudget);
    CHECK_THROWS_AS(scales_full(budget(1.0, 1e-5, 1), 0, 0.5), InvalidArgument);
    const std::vector<double> w{0.5, 0.5};
    CHECK_THROWS_AS(scales_partial(budget(1.0, 1e-5, 1), 1, w, 3,
                                   SamplingScheme::without_replacement),
                    InvalidArgument);
    CHECK_THROWS_AS(validate(budget(1.0, 1e-5, 0)), InvalidBudget);
    CHECK_NOTHROW(validate(budget(kInfinity, 1e-5, 0)));
  }

  TEST_CASE("scales grow with rounds and with 1/epsilon") {
    double prev = 0.0;
    for (std::size_t r = 1; r <= 50; ++r) {
      const double s = scales_full(budget(1.0, 1e-5, r), 3, 0.5).sigma_local;
      CHECK(s >= prev);
      prev = s;
    }
    prev = 0.0;
    for (double eps = 10.0; eps >= 0.05; eps /= 1.5) {
      const double s = scales_full(budget(eps, 1e-5, 5), 3, 0.5).sigma_local;
      CHECK(s >= prev);
      prev = s;
    }
  }

  TEST_CASE("split budgets calibrate each site per round") {
    PrivacyConfig cfg = budget(kInfinity, 1e-3, 6);
    cfg.split = EpsilonSplit{0.5, 2.0};
    const NoiseScales s = scales_full(cfg, 4, 0.25);
    const double unit = std::sqrt(2 * std::log(1.25 / 1e-3)) / 4.0;
    CHECK(std::abs(s.sigma_local - unit / 0.5) <= 1e-12);
    CHECK(std::abs(s.sigma_server_full - 0.25 * unit / 2.0) <= 1e-12);
    const Leakage total = account(cfg);
    CHECK(total.epsilon == doctest::Approx(6 * 2.5));
    CHECK(total.delta == doctest::Approx(12e-3));
  }
}

TEST_SUITE("accounting") {
  TEST_CASE("full run spends (2 eps, 2 delta)") {
    const Leakage l = account(budget(0.8, 1e-5, 7));
    CHECK(l.epsilon == 1.6);
    CHECK(l.delta == 2e-5);
  }

  TEST_CASE("partial runs") {
    const PrivacyConfig cfg = budget(1.5, 1e-4, 10);
    CHECK(account_after(cfg, 0).epsilon == 0.0);
    CHECK(account_after(cfg, 0).delta == 0.0);
    CHECK(account_after(cfg, 5).epsilon == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(account_after(cfg, 5).delta == doctest::Approx(1e-4).epsilon(1e-15));
  }

  TEST_CASE("additive and monotone in rounds") {
    const PrivacyConfig cfg = budget(2.0, 1e-5, 12);
    const Leakage per = account_after(cfg, 1);
    double prev = 0.0;
    for (std::size_t r = 1; r <= 12; ++r) {
      const Leakage l = account_after(cfg, r);
      CHECK(l.epsilon >= prev);
      CHECK(l.epsilon == doctest::Approx(double(r) * per.epsilon).epsilon(1e-14));
      prev = l.epsilon;
    }
    CHECK(account_after(cfg, 12).epsilon == account(cfg).epsilon);
  }

  TEST_CASE("noiseless runs leak without bound") {
    CHECK(std::isinf(account(budget(kInfinity, 1e-5, 4)).epsilon));
  }
}
