#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "doctest.h"
#include "privstream/device.hpp"
#include "privstream/errors.hpp"
#include "privstream/query.hpp"
#include "privstream/randomized_response.hpp"

using namespace privstream;

namespace {

constexpr TimestampMs kT0 = 1600000000000;

std::shared_ptr<Query> speed_query(double p, double q,
                                   DurationMs lifetime_ms = 86'400'000,
                                   std::string id = "speed-histogram") {
  auto query = std::make_shared<Query>();
  query->query_id = std::move(id);
  query->analyst_id = "bench";
  query->sensor = "speed";
  query->buckets = {{0.0, 1.0}, {1.0, 11.0}, {11.0, 21.0}, {21.0, std::nullopt}};
  query->params = {p, q};
  query->epoch_seconds = 10.0;
  query->t_start = kT0;
  query->t_end = kT0 + lifetime_ms;
  query->signature = "sig";
  return query;
}

std::shared_ptr<const DevicePolicy> default_policy() {
  return std::make_shared<DevicePolicy>();
}

// p = 1 passes the truth through but costs infinite epsilon, so tests that
// want deterministic bits must lift the privacy threshold.
std::shared_ptr<const DevicePolicy> permissive_policy() {
  auto policy = std::make_shared<DevicePolicy>();
  policy->epsilon_threshold_per_query = std::numeric_limits<double>::infinity();
  return policy;
}

DeviceAgent make_agent(std::shared_ptr<const DevicePolicy> policy,
                       std::uint64_t seed = 1, std::string token = "token-0") {
  return DeviceAgent("device-0", std::move(token), std::move(policy),
                     RandomSource::seeded(seed));
}

}  // namespace

TEST_CASE("policy field domains") {
  DevicePolicy policy;
  CHECK_NOTHROW(policy.ensure_valid());
  policy.epsilon_threshold_per_query = 0.0;
  CHECK_THROWS_AS(policy.ensure_valid(), ParameterError);
  policy.epsilon_threshold_per_query = 3.0;
  policy.cumulative_budget_per_analyst = -1.0;
  CHECK_THROWS_AS(policy.ensure_valid(), ParameterError);
}

TEST_CASE("sanity check accepts a mild query and prices it") {
  DevicePolicy policy;  // threshold 3.0
  const auto query = speed_query(0.5, 0.5);
  const SanityResult r = sanity_check(*query, policy, kT0);
  CHECK(r.accepted);
  CHECK(r.reason == SanityReason::none);
  CHECK(r.epsilon_per_query == doctest::Approx(2.0 * std::log(3.0)).epsilon(1e-12));
  // 86,400 s at 10 s per epoch: 8640 epochs of lifetime cost
  CHECK(r.lifetime_cost ==
        doctest::Approx(8640.0 * 2.0 * std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("sanity check rejects on privacy cost") {
  DevicePolicy policy;
  const auto query = speed_query(0.99, 0.5);  // per query: 2 ln 199, far over 3
  const SanityResult r = sanity_check(*query, policy, kT0);
  CHECK(!r.accepted);
  CHECK(r.reason == SanityReason::privacy_cost);
  CHECK(r.epsilon_per_query == doctest::Approx(2.0 * std::log(199.0)).epsilon(1e-9));
}

TEST_CASE("sanity check enforces blacklists") {
  const auto query = speed_query(0.5, 0.5);
  DevicePolicy by_sensor;
  by_sensor.sensor_blacklist = {"microphone", "speed"};
  CHECK(sanity_check(*query, by_sensor, kT0).reason ==
        SanityReason::sensor_blacklisted);

  DevicePolicy by_analyst;
  by_analyst.analyst_blacklist = {"bench"};
  CHECK(sanity_check(*query, by_analyst, kT0).reason ==
        SanityReason::analyst_blacklisted);
}

TEST_CASE("sanity check consults the signature hook") {
  const auto query = speed_query(0.5, 0.5);
  DevicePolicy policy;
  policy.verify_signature = [](const Query& q) { return q.signature == "valid"; };
  CHECK(sanity_check(*query, policy, kT0).reason == SanityReason::bad_signature);

  Query signed_copy = *query;
  signed_copy.signature = "valid";
  CHECK(sanity_check(signed_copy, policy, kT0).accepted);
}

TEST_CASE("sanity check reserves the whole remaining lifetime") {
  // 100 s of 10 s epochs: 10 epochs, lifetime 20 ln 3 = 21.97
  const auto query = speed_query(0.5, 0.5, 100'000);
  DevicePolicy policy;
  policy.cumulative_budget_per_analyst = 22.0;
  CHECK(sanity_check(*query, policy, kT0).accepted);

  policy.cumulative_budget_per_analyst = 20.0;
  CHECK(sanity_check(*query, policy, kT0).reason == SanityReason::budget_exceeded);

  // Joining halfway through reserves only the remaining epochs.
  policy.cumulative_budget_per_analyst = 12.0;
  const SanityResult late = sanity_check(*query, policy, kT0 + 50'000);
  CHECK(late.accepted);
  CHECK(late.lifetime_cost == doctest::Approx(10.0 * std::log(3.0)).epsilon(1e-12));

  // Prior spending for the analyst counts against the limit.
  policy.cumulative_budget_per_analyst = 22.0;
  CHECK(sanity_check(*query, policy, kT0, 1.0).reason ==
        SanityReason::budget_exceeded);
}

TEST_CASE("sample store keeps only the newest value per sensor") {
  DeviceAgent agent = make_agent(default_policy());
  CHECK(agent.ingest_sample("speed", 15.0, kT0));
  CHECK(agent.latest_value("speed") == 15.0);
  CHECK(agent.ingest_sample("speed", 20.0, kT0 + 1));
  CHECK(agent.latest_value("speed") == 20.0);
  CHECK(!agent.ingest_sample("speed", 18.0, kT0 - 1));
  CHECK(agent.latest_value("speed") == 20.0);
  CHECK(agent.dropped_samples() == 1);
  CHECK(!agent.latest_value("fuel").has_value());
  // equal timestamps overwrite rather than drop
  CHECK(agent.ingest_sample("speed", 21.0, kT0 + 1));
  CHECK(agent.latest_value("speed") == 21.0);
}

TEST_CASE("accepting a query reserves budget exactly once") {
  auto policy = std::make_shared<DevicePolicy>();
  policy->cumulative_budget_per_analyst = 50.0;
  DeviceAgent agent = make_agent(policy);
  const auto query = speed_query(0.5, 0.5, 100'000);  // lifetime 21.97

  const SanityResult first = agent.consider_query(query, kT0);
  CHECK(first.accepted);
  CHECK(agent.subscribed("speed-histogram"));
  CHECK(agent.spent_budget("bench") == doctest::Approx(first.lifetime_cost));

  const SanityResult again = agent.consider_query(query, kT0);
  CHECK(again.accepted);
  CHECK(agent.spent_budget("bench") == doctest::Approx(first.lifetime_cost));

  // A second query for the same analyst stacks until the budget runs out.
  const SanityResult second =
      agent.consider_query(speed_query(0.5, 0.5, 100'000, "speed-2"), kT0);
  CHECK(second.accepted);
  CHECK(agent.spent_budget("bench") ==
        doctest::Approx(2 * first.lifetime_cost));
  const SanityResult third =
      agent.consider_query(speed_query(0.5, 0.5, 100'000, "speed-3"), kT0);
  CHECK(!third.accepted);
  CHECK(third.reason == SanityReason::budget_exceeded);
  CHECK(!agent.subscribed("speed-3"));
  CHECK(agent.spent_budget("bench") <= 50.0);
}

TEST_CASE("a rejected query leaves no subscription") {
  auto policy = std::make_shared<DevicePolicy>();
  policy->sensor_blacklist = {"speed"};
  DeviceAgent agent = make_agent(policy);
  const SanityResult r = agent.consider_query(speed_query(0.5, 0.5), kT0);
  CHECK(r.reason == SanityReason::sensor_blacklisted);
  CHECK(!agent.subscribed("speed-histogram"));
  CHECK(agent.execute_epoch("speed-histogram", kT0).outcome ==
        EpochOutcome::not_subscribed);
}

TEST_CASE("epoch execution passes the truth through at p = 1") {
  DeviceAgent agent = make_agent(permissive_policy());
  const auto query = speed_query(1.0, 0.5);
  agent.ingest_sample("speed", 15.0, kT0);
  REQUIRE(agent.consider_query(query, kT0).accepted);

  const EpochResult r = agent.execute_epoch("speed-histogram", kT0 + 5'000);
  REQUIRE(r.outcome == EpochOutcome::submitted);
  REQUIRE(r.submission.has_value());
  CHECK(r.submission->query_id == "speed-histogram");
  CHECK(r.submission->epoch_index == 0);
  CHECK(r.submission->bits == std::vector<std::uint8_t>{0, 0, 1, 0});
  CHECK(r.submission->sent_at == kT0 + 5'000);
  CHECK(r.submission->pseudonym ==
        pseudonym_for_epoch("token-0", "speed-histogram", 0));
}

TEST_CASE("at most one submission per epoch, even under reordered calls") {
  DeviceAgent agent = make_agent(default_policy());
  agent.ingest_sample("speed", 15.0, kT0);
  REQUIRE(agent.consider_query(speed_query(0.5, 0.5), kT0).accepted);

  CHECK(agent.execute_epoch("speed-histogram", kT0 + 1'000).outcome ==
        EpochOutcome::submitted);
  CHECK(agent.execute_epoch("speed-histogram", kT0 + 2'000).outcome ==
        EpochOutcome::already_submitted);

  // jump ahead two epochs, then try to go back in time
  CHECK(agent.execute_epoch("speed-histogram", kT0 + 25'000).outcome ==
        EpochOutcome::submitted);
  CHECK(agent.execute_epoch("speed-histogram", kT0 + 15'000).outcome ==
        EpochOutcome::already_submitted);

  // the skipped-over epoch 1 is also refused now
  CHECK(agent.execute_epoch("speed-histogram", kT0 + 11'000).outcome ==
        EpochOutcome::already_submitted);

  // but the next fresh epoch is fine
  CHECK(agent.execute_epoch("speed-histogram", kT0 + 35'000).outcome ==
        EpochOutcome::submitted);
}

TEST_CASE("expiry unsubscribes the device") {
  DeviceAgent agent = make_agent(default_policy());
  agent.ingest_sample("speed", 15.0, kT0);
  REQUIRE(agent.consider_query(speed_query(0.5, 0.5, 30'000), kT0).accepted);

  CHECK(agent.execute_epoch("speed-histogram", kT0 + 30'000).outcome ==
        EpochOutcome::expired);
  CHECK(!agent.subscribed("speed-histogram"));
  CHECK(agent.execute_epoch("speed-histogram", kT0 + 40'000).outcome ==
        EpochOutcome::not_subscribed);
}

TEST_CASE("missing samples follow the policy") {
  SUBCASE("submit an all-zeros answer by default") {
    DeviceAgent agent = make_agent(permissive_policy());
    REQUIRE(agent.consider_query(speed_query(1.0, 0.5), kT0).accepted);
    const EpochResult r = agent.execute_epoch("speed-histogram", kT0 + 1'000);
    REQUIRE(r.outcome == EpochOutcome::submitted);
    CHECK(r.submission->bits == std::vector<std::uint8_t>{0, 0, 0, 0});
  }
  SUBCASE("skip when configured to") {
    auto policy = std::make_shared<DevicePolicy>();
    policy->epsilon_threshold_per_query =
        std::numeric_limits<double>::infinity();
    policy->submit_when_no_sample = false;
    DeviceAgent agent = make_agent(policy);
    REQUIRE(agent.consider_query(speed_query(1.0, 0.5), kT0).accepted);
    const EpochResult r = agent.execute_epoch("speed-histogram", kT0 + 1'000);
    CHECK(r.outcome == EpochOutcome::no_sample_skipped);
    CHECK(!r.submission.has_value());
    // the epoch stays open: a sample arriving later in it still submits
    agent.ingest_sample("speed", 15.0, kT0 + 2'000);
    CHECK(agent.execute_epoch("speed-histogram", kT0 + 3'000).outcome ==
          EpochOutcome::submitted);
  }
}

TEST_CASE("out-of-range readings submit as all zeros, preserving batch size") {
  DeviceAgent agent = make_agent(permissive_policy());
  agent.ingest_sample("speed", -40.0, kT0);
  REQUIRE(agent.consider_query(speed_query(1.0, 0.5), kT0).accepted);
  const EpochResult r = agent.execute_epoch("speed-histogram", kT0 + 1'000);
  REQUIRE(r.outcome == EpochOutcome::submitted);
  CHECK(r.submission->bits == std::vector<std::uint8_t>{0, 0, 0, 0});
}

TEST_CASE("pseudonyms are deterministic and input-sensitive") {
  const std::string a = pseudonym_for_epoch("tok", "q", 5);
  CHECK(a == pseudonym_for_epoch("tok", "q", 5));
  CHECK(a.size() == 32);
  CHECK(a != pseudonym_for_epoch("tok", "q", 6));
  CHECK(a != pseudonym_for_epoch("tok2", "q", 5));
  CHECK(a != pseudonym_for_epoch("tok", "q2", 5));

  const auto key = pseudonym_key("tok", "q");
  CHECK(pseudonym_from_key(key, 5) == a);
}

TEST_CASE("one million pseudonym derivations collide zero times") {
  std::unordered_set<std::string> seen;
  seen.reserve(1 << 21);
  for (int t = 0; t < 1000; ++t) {
    const auto key = pseudonym_key("token-" + std::to_string(t), "q");
    for (std::int64_t e = 0; e < 1000; ++e) {
      seen.insert(pseudonym_from_key(key, e));
    }
  }
  CHECK(seen.size() == 1'000'000);
}

TEST_CASE("submissions depend on the truth only through the randomizer") {
  // Force the second coin on every bit: the first draw (0.99) always exceeds
  // p = 0.5, the second decides the report. Two devices holding different
  // truthful readings must then emit byte-identical submissions.
  const auto query = speed_query(0.5, 0.5);
  for (double second_draw : {0.3, 0.7}) {
    DeviceAgent a("device-a", "tok", default_policy(),
                  RandomSource::scripted({0.99, second_draw}));
    DeviceAgent b("device-b", "tok", default_policy(),
                  RandomSource::scripted({0.99, second_draw}));
    a.ingest_sample("speed", 15.0, kT0);   // bucket 2
    b.ingest_sample("speed", 0.5, kT0);    // bucket 0
    REQUIRE(a.consider_query(query, kT0).accepted);
    REQUIRE(b.consider_query(query, kT0).accepted);
    const EpochResult ra = a.execute_epoch("speed-histogram", kT0 + 1'000);
    const EpochResult rb = b.execute_epoch("speed-histogram", kT0 + 1'000);
    REQUIRE(ra.outcome == EpochOutcome::submitted);
    REQUIRE(rb.outcome == EpochOutcome::submitted);
    CHECK(*ra.submission == *rb.submission);
    const std::uint8_t expected_bit = second_draw < 0.5 ? 1 : 0;
    for (std::uint8_t bit : ra.submission->bits) CHECK(bit == expected_bit);
  }
}
