#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "privstream/errors.hpp"
#include "privstream/random.hpp"

namespace privstream {

// Floor on the first-coin probability. Debiasing divides by p, so very small
// values amplify noise without bound; the floor is configurable per use.
inline constexpr double kDefaultPMin = 0.05;

// Two-coin randomized response parameters. The first coin comes up heads with
// probability p (report the truth); on tails the second coin is flipped and
// its outcome (heads probability q) is reported instead.
struct RandomizationParams {
  double p = 0.0;
  double q = 0.0;
  double p_min = kDefaultPMin;

  bool valid() const {
    return p > 0.0 && p <= 1.0 && p >= p_min && q >= 0.0 && q <= 1.0 &&
           p_min > 0.0 && p_min <= 1.0;
  }

  void ensure_valid() const;

  // P(report 1 | truth).
  double prob_report_one(bool truth) const {
    return (truth ? p : 0.0) + (1.0 - p) * q;
  }
  bool operator==(const RandomizationParams&) const = default;
};

// Worst-case log likelihood ratio an observer gains about one bit from one
// privatized report, plus the per-query composition. A one-hot answer vector
// flips exactly two bits when the truthful value changes, so the per-query
// cost is twice the per-bit cost. Values are +infinity when some output is
// possible under one truth but impossible under the other.
struct PrivacyCost {
  double epsilon_per_bit = 0.0;
  double epsilon_per_query = 0.0;
};

struct EstimateResult {
  double y_raw = 0.0;           // unclamped debiased count, may be negative
  double y_clamped = 0.0;       // y_raw clamped into [0, n_answers]
  std::uint64_t n_answers = 0;
  double stddev = 0.0;          // estimator stddev under the clamped count
};

// One privatized bit.
inline bool randomize_bit(bool truth, const RandomizationParams& params,
                          RandomSource& rng) {
  params.ensure_valid();
  if (rng.uniform01() < params.p) return truth;
  return rng.uniform01() < params.q;
}

// Per-index randomization of an answer vector. Every index gets independent
// coin flips; the output need not be one-hot. Draw order is fixed (index 0
// upward) so a given seed always yields the same output.
void randomize_answer_into(std::span<const std::uint8_t> truthful,
                           const RandomizationParams& params, RandomSource& rng,
                           std::span<std::uint8_t> out);

std::vector<std::uint8_t> randomize_answer(std::span<const std::uint8_t> truthful,
                                           const RandomizationParams& params,
                                           RandomSource& rng);

// Debiased estimate of the number of truthful ones among n reports of which
// y_reported_ones came back 1:  (y_r - (1-p)*q*n) / p.
EstimateResult estimate_true_count(std::uint64_t y_reported_ones, std::uint64_t n_answers,
                                   const RandomizationParams& params);

// |y_true - y_est| / |y_true|. Undefined (throws) when y_true is zero.
double relative_error(double y_true, double y_est);

// Privacy cost of one report under the given parameters.
PrivacyCost epsilon_of(const RandomizationParams& params);

// Largest p with per-bit cost <= epsilon_target at the given q, found by
// bisection to 1e-9 absolute tolerance in p. Throws InfeasibleError when even
// p_min exceeds the target.
RandomizationParams params_for_target(double epsilon_target, double q,
                                      double p_min = kDefaultPMin);

// Standard deviation of the debiased count assuming y_true_hypothesis of the
// n answers are truthfully 1: sqrt(sum of reported-bit variances) / p.
double estimator_stddev(std::uint64_t n_answers, double y_true_hypothesis,
                        const RandomizationParams& params);

}  // namespace privstream
