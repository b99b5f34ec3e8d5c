#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "doctest.h"
#include "privstream/errors.hpp"
#include "privstream/randomized_response.hpp"

using namespace privstream;

namespace {

RandomizationParams params(double p, double q, double p_min = kDefaultPMin) {
  return RandomizationParams{p, q, p_min};
}

}  // namespace

TEST_CASE("parameter domains are enforced") {
  CHECK_NOTHROW(params(0.5, 0.5).ensure_valid());
  CHECK_NOTHROW(params(1.0, 0.0).ensure_valid());
  CHECK_NOTHROW(params(1.0, 1.0).ensure_valid());
  CHECK_THROWS_AS(params(0.0, 0.5).ensure_valid(), ParameterError);
  CHECK_THROWS_AS(params(-0.1, 0.5).ensure_valid(), ParameterError);
  CHECK_THROWS_AS(params(1.1, 0.5).ensure_valid(), ParameterError);
  CHECK_THROWS_AS(params(0.5, -0.1).ensure_valid(), ParameterError);
  CHECK_THROWS_AS(params(0.5, 1.1).ensure_valid(), ParameterError);
  CHECK_THROWS_AS(params(0.01, 0.5).ensure_valid(), ParameterError);  // below floor
  CHECK_THROWS_AS(params(0.5, 0.5, 0.0).ensure_valid(), ParameterError);
  CHECK_NOTHROW(params(0.01, 0.5, 0.01).ensure_valid());  // floor is configurable
}

TEST_CASE("debiased estimate recovers the worked count") {
  const EstimateResult r = estimate_true_count(650, 1000, params(0.5, 0.5));
  CHECK(r.y_raw == 800.0);
  CHECK(r.y_clamped == 800.0);
  CHECK(r.n_answers == 1000);
  CHECK(r.stddev == estimator_stddev(1000, 800.0, params(0.5, 0.5)));
}

TEST_CASE("debiased estimate clamps but reports the raw value") {
  const EstimateResult r = estimate_true_count(0, 1000, params(0.5, 0.5));
  CHECK(r.y_raw == -500.0);
  CHECK(r.y_clamped == 0.0);

  const EstimateResult high = estimate_true_count(1000, 1000, params(0.5, 0.5));
  CHECK(high.y_raw == 1500.0);
  CHECK(high.y_clamped == 1000.0);
}

TEST_CASE("estimate guards impossible inputs") {
  CHECK_THROWS_AS(estimate_true_count(1001, 1000, params(0.5, 0.5)), DomainError);
  CHECK_THROWS_AS(estimate_true_count(1, 10, params(0.0, 0.5)), ParameterError);
}

TEST_CASE("estimate of an empty batch is exactly zero") {
  const EstimateResult r = estimate_true_count(0, 0, params(0.5, 0.5));
  CHECK(r.y_raw == 0.0);
  CHECK(r.y_clamped == 0.0);
  CHECK(r.stddev == 0.0);
}

TEST_CASE("relative error follows the definition and rejects zero truth") {
  CHECK(relative_error(800.0, 804.0) == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(relative_error(800.0, -500.0) == 1.625);
  CHECK(relative_error(800.0, 800.0) == 0.0);
  CHECK_THROWS_AS(relative_error(0.0, 5.0), UndefinedMetricError);
}

TEST_CASE("privacy cost spot values") {
  const PrivacyCost fair = epsilon_of(params(0.5, 0.5));
  CHECK(fair.epsilon_per_bit == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK(fair.epsilon_per_query == doctest::Approx(2.0 * std::log(3.0)).epsilon(1e-15));

  // The zero-output ratio 0.625/0.125 = 5 dominates the one-output 7/3.
  const PrivacyCost skew = epsilon_of(params(0.5, 0.75));
  CHECK(skew.epsilon_per_bit == doctest::Approx(std::log(5.0)).epsilon(1e-15));
}

TEST_CASE("privacy cost is infinite when an output is impossible") {
  CHECK(epsilon_of(params(1.0, 0.5)).epsilon_per_bit ==
        std::numeric_limits<double>::infinity());
  CHECK(epsilon_of(params(0.5, 0.0)).epsilon_per_bit ==
        std::numeric_limits<double>::infinity());
  CHECK(epsilon_of(params(0.5, 1.0)).epsilon_per_bit ==
        std::numeric_limits<double>::infinity());
  CHECK(epsilon_of(params(1.0, 0.5)).epsilon_per_query ==
        std::numeric_limits<double>::infinity());
}

TEST_CASE("privacy cost matches brute-force likelihood ratios") {
  for (int pi = 1; pi <= 19; ++pi) {
    for (int qi = 1; qi <= 19; ++qi) {
      const double p = pi / 20.0;
      const double q = qi / 20.0;
      const RandomizationParams prm = params(p, q);
      const double r1 = prm.prob_report_one(true);
      const double r0 = prm.prob_report_one(false);
      double expected = 0.0;
      expected = std::max(expected, std::abs(std::log(r1 / r0)));
      expected = std::max(expected, std::abs(std::log((1.0 - r1) / (1.0 - r0))));
      CHECK(epsilon_of(prm).epsilon_per_bit ==
            doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("parameter search inverts the privacy cost") {
  const RandomizationParams hit = params_for_target(std::log(3.0), 0.5);
  CHECK(hit.p == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(epsilon_of(hit).epsilon_per_bit <= std::log(3.0) + 1e-9);

  // A huge budget pushes p against 1 without ever exceeding the target.
  const RandomizationParams loose = params_for_target(50.0, 0.5);
  CHECK(loose.p > 1.0 - 2e-9);
  CHECK(epsilon_of(loose).epsilon_per_bit <= 50.0);

  CHECK_THROWS_AS(params_for_target(0.1, 0.5), InfeasibleError);
  CHECK_THROWS_AS(params_for_target(0.01, 0.5), InfeasibleError);
  CHECK_THROWS_AS(params_for_target(1.0, 0.0), ParameterError);
  CHECK_THROWS_AS(params_for_target(-1.0, 0.5), ParameterError);
}

TEST_CASE("parameter search respects a custom floor") {
  for (double target : {0.5, 1.0, 2.0}) {
    const RandomizationParams r = params_for_target(target, 0.5, 0.001);
    CHECK(r.p >= 0.001);
    CHECK(epsilon_of(r).epsilon_per_bit <= target + 1e-9);
    // one bisection step above p would overshoot
    const double above = std::min(1.0 - 1e-12, r.p + 4e-9);
    CHECK(epsilon_of(params(above, 0.5, 0.001)).epsilon_per_bit >= target - 1e-6);
  }
}

TEST_CASE("estimator stddev follows the variance sum") {
  const double sd = estimator_stddev(100000, 80000.0, params(0.75, 0.5));
  // r1 = 0.875, r0 = 0.125, both with variance 0.109375 per answer
  CHECK(sd == doctest::Approx(std::sqrt(100000.0 * 0.109375) / 0.75).epsilon(1e-15));
  CHECK(sd == doctest::Approx(139.4433).epsilon(1e-6));

  CHECK(estimator_stddev(0, 0.0, params(0.5, 0.5)) == 0.0);
  // p = 1, q = 0: reports are exact, zero spread
  CHECK(estimator_stddev(1000, 400.0, params(1.0, 0.0)) == 0.0);
  CHECK_THROWS_AS(estimator_stddev(10, 11.0, params(0.5, 0.5)), ParameterError);
  CHECK_THROWS_AS(estimator_stddev(10, -1.0, params(0.5, 0.5)), ParameterError);
}

TEST_CASE("randomize_bit is a passthrough at p = 1") {
  RandomSource rng = RandomSource::seeded(3);
  for (int i = 0; i < 100; ++i) {
    CHECK(randomize_bit(true, params(1.0, 0.5), rng) == true);
    CHECK(randomize_bit(false, params(1.0, 0.5), rng) == false);
  }
}

TEST_CASE("randomize_answer keeps length and bit domain, deterministically") {
  const std::vector<std::uint8_t> truth = {0, 1, 0, 0, 1, 0, 0, 0, 0, 1};
  RandomSource a = RandomSource::seeded(12);
  RandomSource b = RandomSource::seeded(12);
  const auto out_a = randomize_answer(truth, params(0.5, 0.5), a);
  const auto out_b = randomize_answer(truth, params(0.5, 0.5), b);
  CHECK(out_a == out_b);
  CHECK(out_a.size() == truth.size());
  for (std::uint8_t bit : out_a) CHECK(bit <= 1);

  std::vector<std::uint8_t> wrong_size(truth.size() + 1);
  RandomSource c = RandomSource::seeded(12);
  CHECK_THROWS_AS(
      randomize_answer_into(truth, params(0.5, 0.5), c, wrong_size),
      EncodingError);
}

TEST_CASE("scripted coins expose the two-coin order") {
  // First draw >= p forces the second coin; second draw < q reports 1.
  RandomSource forced = RandomSource::scripted({0.99, 0.3});
  CHECK(randomize_bit(false, params(0.5, 0.5), forced) == true);
  // First draw < p reports the truth and consumes one draw only.
  RandomSource trusty = RandomSource::scripted({0.1, 0.1});
  CHECK(randomize_bit(false, params(0.5, 0.5), trusty) == false);
  CHECK(randomize_bit(true, params(0.5, 0.5), trusty) == true);
}

TEST_CASE("raw estimate is strictly increasing in the reported count") {
  const RandomizationParams prm = params(0.25, 0.7);
  double prev = -std::numeric_limits<double>::infinity();
  for (std::uint64_t y = 0; y <= 200; ++y) {
    const double cur = estimate_true_count(y, 200, prm).y_raw;
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("estimate inverts the expected report map") {
  for (double p : {0.05, 0.25, 0.5, 0.75, 0.99}) {
    const RandomizationParams prm = params(p, 0.4);
    for (std::uint64_t y_r : {0ULL, 17ULL, 500ULL, 1000ULL}) {
      const double y_raw = estimate_true_count(y_r, 1000, prm).y_raw;
      const double forward = y_raw * prm.p + (1.0 - prm.p) * prm.q * 1000.0;
      CHECK(forward == doctest::Approx(static_cast<double>(y_r)).epsilon(1e-9));
    }
  }
}

TEST_CASE("monte carlo mean of the raw estimate centres on the truth") {
  const RandomizationParams prm = params(0.5, 0.5);
  const std::uint64_t n = 1000;
  const std::uint64_t y_true = 800;
  const int trials = 2000;
  RandomSource rng = RandomSource::seeded(20240811);
  double sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    std::uint64_t ones = 0;
    for (std::uint64_t d = 0; d < n; ++d) {
      ones += randomize_bit(d < y_true, prm, rng) ? 1 : 0;
    }
    sum += estimate_true_count(ones, n, prm).y_raw;
  }
  const double mean = sum / trials;
  const double se = estimator_stddev(n, static_cast<double>(y_true), prm) /
                    std::sqrt(static_cast<double>(trials));
  CHECK(std::abs(mean - static_cast<double>(y_true)) < 4.0 * se);
}

TEST_CASE("report frequencies match the conditionals") {
  const RandomizationParams prm = params(0.5, 0.5);
  RandomSource rng = RandomSource::seeded(77);
  const int draws = 100000;
  int ones = 0;
  for (int i = 0; i < draws; ++i) ones += randomize_bit(true, prm, rng) ? 1 : 0;
  const double frac = static_cast<double>(ones) / draws;
  const double expect = prm.prob_report_one(true);  // 0.75
  const double sd = std::sqrt(expect * (1.0 - expect) / draws);
  CHECK(std::abs(frac - expect) < 4.0 * sd);
}
