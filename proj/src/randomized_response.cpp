#include "privstream/randomized_response.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace privstream {

namespace {

std::string param_summary(const RandomizationParams& params) {
  return "p=" + std::to_string(params.p) + " q=" + std::to_string(params.q) +
         " p_min=" + std::to_string(params.p_min);
}

}  // namespace

void RandomizationParams::ensure_valid() const {
  if (!(p_min > 0.0 && p_min <= 1.0))
    throw ParameterError("p_min must lie in (0, 1], got " + std::to_string(p_min));
  if (!(p > 0.0 && p <= 1.0))
    throw ParameterError("first-coin probability p must lie in (0, 1], got " +
                         std::to_string(p));
  if (p < p_min)
    throw ParameterError("first-coin probability p below floor: " + param_summary(*this));
  if (!(q >= 0.0 && q <= 1.0))
    throw ParameterError("second-coin probability q must lie in [0, 1], got " +
                         std::to_string(q));
}

void randomize_answer_into(std::span<const std::uint8_t> truthful,
                           const RandomizationParams& params, RandomSource& rng,
                           std::span<std::uint8_t> out) {
  params.ensure_valid();
  if (out.size() != truthful.size())
    throw EncodingError("output length " + std::to_string(out.size()) +
                        " does not match answer length " + std::to_string(truthful.size()));
  for (std::size_t i = 0; i < truthful.size(); ++i) {
    bool reported;
    if (rng.uniform01() < params.p) {
      reported = truthful[i] != 0;
    } else {
      reported = rng.uniform01() < params.q;
    }
    out[i] = reported ? 1 : 0;
  }
}

std::vector<std::uint8_t> randomize_answer(std::span<const std::uint8_t> truthful,
                                           const RandomizationParams& params,
                                           RandomSource& rng) {
  std::vector<std::uint8_t> out(truthful.size());
  randomize_answer_into(truthful, params, rng, out);
  return out;
}

EstimateResult estimate_true_count(std::uint64_t y_reported_ones, std::uint64_t n_answers,
                                   const RandomizationParams& params) {
  params.ensure_valid();
  if (y_reported_ones > n_answers)
    throw DomainError("received ones count " + std::to_string(y_reported_ones) +
                      " exceeds answer count " + std::to_string(n_answers));
  const double n = static_cast<double>(n_answers);
  EstimateResult result;
  result.n_answers = n_answers;
  result.y_raw =
      (static_cast<double>(y_reported_ones) - (1.0 - params.p) * params.q * n) / params.p;
  result.y_clamped = std::clamp(result.y_raw, 0.0, n);
  result.stddev = estimator_stddev(n_answers, result.y_clamped, params);
  return result;
}

double relative_error(double y_true, double y_est) {
  if (y_true == 0.0)
    throw UndefinedMetricError("relative error is undefined for a zero true count");
  return std::abs(y_true - y_est) / std::abs(y_true);
}

PrivacyCost epsilon_of(const RandomizationParams& params) {
  params.ensure_valid();
  const double report_one[2] = {params.prob_report_one(false), params.prob_report_one(true)};
  double eps = 0.0;
  for (int output = 0; output <= 1; ++output) {
    const double under_truth_one = output == 1 ? report_one[1] : 1.0 - report_one[1];
    const double under_truth_zero = output == 1 ? report_one[0] : 1.0 - report_one[0];
    if (under_truth_one == 0.0 && under_truth_zero == 0.0) continue;
    if (under_truth_one == 0.0 || under_truth_zero == 0.0) {
      eps = std::numeric_limits<double>::infinity();
      break;
    }
    eps = std::max(eps, std::abs(std::log(under_truth_one / under_truth_zero)));
  }
  return PrivacyCost{eps, 2.0 * eps};
}

RandomizationParams params_for_target(double epsilon_target, double q, double p_min) {
  if (!(epsilon_target > 0.0))
    throw ParameterError("epsilon target must be positive, got " + std::to_string(epsilon_target));
  if (!(q > 0.0 && q < 1.0))
    throw ParameterError("q must lie strictly inside (0, 1) to invert, got " + std::to_string(q));
  if (!(p_min > 0.0 && p_min < 1.0))
    throw ParameterError("p_min must lie in (0, 1), got " + std::to_string(p_min));

  const auto eps_at = [&](double p) {
    return epsilon_of(RandomizationParams{p, q, p_min}).epsilon_per_bit;
  };
  if (eps_at(p_min) > epsilon_target)
    throw InfeasibleError("no p >= " + std::to_string(p_min) + " meets per-bit epsilon " +
                          std::to_string(epsilon_target) + " at q=" + std::to_string(q));

  // eps is strictly increasing in p for fixed q in (0,1), and +infinity at
  // p=1, so the invariant eps(lo) <= target < eps(hi) pins the answer.
  double lo = p_min;
  double hi = 1.0;
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    if (eps_at(mid) <= epsilon_target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return RandomizationParams{lo, q, p_min};
}

double estimator_stddev(std::uint64_t n_answers, double y_true_hypothesis,
                        const RandomizationParams& params) {
  params.ensure_valid();
  const double n = static_cast<double>(n_answers);
  if (!(y_true_hypothesis >= 0.0 && y_true_hypothesis <= n))
    throw ParameterError("hypothesised true count " + std::to_string(y_true_hypothesis) +
                         " outside [0, " + std::to_string(n_answers) + "]");
  const double r1 = params.prob_report_one(true);
  const double r0 = params.prob_report_one(false);
  const double variance_sum =
      y_true_hypothesis * r1 * (1.0 - r1) + (n - y_true_hypothesis) * r0 * (1.0 - r0);
  return std::sqrt(variance_sum) / params.p;
}

}  // namespace privstream
