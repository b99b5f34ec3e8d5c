#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "privstream/query.hpp"
#include "privstream/random.hpp"
#include "privstream/types.hpp"
#include "privstream/wire.hpp"

namespace privstream {

// Per-device acceptance policy. Budgets are in units of per-query epsilon.
struct DevicePolicy {
  double epsilon_threshold_per_query = 3.0;
  std::vector<std::string> sensor_blacklist;
  std::vector<std::string> analyst_blacklist;
  std::optional<double> cumulative_budget_per_analyst;
  // Missing-sample epochs submit a randomized all-zeros vector by default so
  // the batch size does not leak which devices had readings.
  bool submit_when_no_sample = true;
  // Optional analyst-signature hook; empty means accept every signature.
  std::function<bool(const Query&)> verify_signature;

  void ensure_valid() const;  // throws ParameterError
};

enum class SanityReason : std::uint8_t {
  none = 0,
  privacy_cost,
  sensor_blacklisted,
  analyst_blacklisted,
  budget_exceeded,
  bad_signature,
};

const char* to_string(SanityReason reason);

struct SanityResult {
  bool accepted = false;
  SanityReason reason = SanityReason::none;
  double epsilon_per_query = 0.0;
  // Reserved at acceptance: epochs remaining times per-query epsilon.
  double lifetime_cost = 0.0;
};

// Pure decision: no state change. `already_spent_for_analyst` is the budget
// the device has previously reserved for this query's analyst.
SanityResult sanity_check(const Query& query, const DevicePolicy& policy,
                          TimestampMs now,
                          double already_spent_for_analyst = 0.0);

// Keyed pseudonym derivation. The per-query subkey is computed once per
// subscription; per-epoch pseudonyms hash the subkey with the epoch index.
// Without the auth token, pseudonyms from different epochs are unlinkable.
std::array<std::uint8_t, 32> pseudonym_key(std::string_view auth_token,
                                           std::string_view query_id);
std::string pseudonym_from_key(const std::array<std::uint8_t, 32>& key,
                               std::int64_t epoch_index);
std::string pseudonym_for_epoch(std::string_view auth_token,
                                std::string_view query_id,
                                std::int64_t epoch_index);

enum class EpochOutcome : std::uint8_t {
  submitted = 0,
  already_submitted,
  no_sample_skipped,
  not_subscribed,
  expired,
};

const char* to_string(EpochOutcome outcome);

struct EpochResult {
  EpochOutcome outcome = EpochOutcome::not_subscribed;
  std::optional<Submission> submission;
};

// The data-owner side. Owns its latest samples, accepted subscriptions,
// spent budgets, and random source. Single-threaded with respect to itself.
class DeviceAgent {
 public:
  DeviceAgent(std::string device_id, std::string auth_token,
              std::shared_ptr<const DevicePolicy> policy, RandomSource rng);

  const std::string& device_id() const { return device_id_; }

  // Runs sanity_check against this device's state; reserves budget and
  // derives the pseudonym subkey on acceptance. Idempotent per query id.
  SanityResult consider_query(std::shared_ptr<const Query> query,
                              TimestampMs now);

  // Keeps only the latest value per sensor. Returns false and counts a drop
  // when the timestamp is older than the stored one.
  bool ingest_sample(std::string_view sensor, double value, TimestampMs at);
  std::uint64_t dropped_samples() const { return dropped_; }
  std::optional<double> latest_value(std::string_view sensor) const;

  // At most one submission per (query, epoch). Expired queries unsubscribe.
  EpochResult execute_epoch(const std::string& query_id, TimestampMs now);

  bool subscribed(const std::string& query_id) const;
  double spent_budget(const std::string& analyst_id) const;
  RandomSource& rng() { return rng_; }

 private:
  struct SensorSlot {
    std::string sensor;
    double value = 0.0;
    TimestampMs at = 0;
  };
  struct Subscription {
    std::shared_ptr<const Query> query;
    std::array<std::uint8_t, 32> pseud_key{};
    std::int64_t last_epoch = -1;
    bool active = true;
  };

  Subscription* find_subscription(std::string_view query_id);

  std::string device_id_;
  std::string auth_token_;
  std::shared_ptr<const DevicePolicy> policy_;
  RandomSource rng_;
  std::vector<SensorSlot> samples_;
  std::vector<Subscription> subs_;
  std::vector<std::pair<std::string, double>> spent_;
  std::uint64_t dropped_ = 0;
};

}  // namespace privstream
