#include "privstream/device.hpp"

#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/params.h>

#include <algorithm>
#include <cstring>

#include "privstream/errors.hpp"
#include "privstream/randomized_response.hpp"

namespace privstream {

namespace {

bool contains(const std::vector<std::string>& names, std::string_view name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::string hex_prefix(const unsigned char* digest, std::size_t n_bytes) {
  static const char kHex[] = "0123456789abcdef";
  std::string out(n_bytes * 2, '\0');
  for (std::size_t i = 0; i < n_bytes; ++i) {
    out[2 * i] = kHex[digest[i] >> 4];
    out[2 * i + 1] = kHex[digest[i] & 0xf];
  }
  return out;
}

}  // namespace

void DevicePolicy::ensure_valid() const {
  if (!(epsilon_threshold_per_query > 0.0)) {
    throw ParameterError("epsilon_threshold_per_query must be positive");
  }
  if (cumulative_budget_per_analyst && !(*cumulative_budget_per_analyst > 0.0)) {
    throw ParameterError("cumulative_budget_per_analyst must be positive");
  }
}

const char* to_string(SanityReason reason) {
  switch (reason) {
    case SanityReason::none:
      return "none";
    case SanityReason::privacy_cost:
      return "privacy_cost";
    case SanityReason::sensor_blacklisted:
      return "sensor_blacklisted";
    case SanityReason::analyst_blacklisted:
      return "analyst_blacklisted";
    case SanityReason::budget_exceeded:
      return "budget_exceeded";
    case SanityReason::bad_signature:
      return "bad_signature";
  }
  return "unknown";
}

const char* to_string(EpochOutcome outcome) {
  switch (outcome) {
    case EpochOutcome::submitted:
      return "submitted";
    case EpochOutcome::already_submitted:
      return "already_submitted";
    case EpochOutcome::no_sample_skipped:
      return "no_sample_skipped";
    case EpochOutcome::not_subscribed:
      return "not_subscribed";
    case EpochOutcome::expired:
      return "expired";
  }
  return "unknown";
}

SanityResult sanity_check(const Query& query, const DevicePolicy& policy,
                          TimestampMs now, double already_spent_for_analyst) {
  policy.ensure_valid();
  SanityResult result;
  const PrivacyCost cost = epsilon_of(query.params);
  result.epsilon_per_query = cost.epsilon_per_query;
  const std::int64_t epochs =
      epochs_remaining(now, query.t_start, query.t_end, query.epoch_ms());
  result.lifetime_cost = static_cast<double>(epochs) * cost.epsilon_per_query;
  if (cost.epsilon_per_query > policy.epsilon_threshold_per_query) {
    result.reason = SanityReason::privacy_cost;
    return result;
  }
  if (contains(policy.sensor_blacklist, query.sensor)) {
    result.reason = SanityReason::sensor_blacklisted;
    return result;
  }
  if (contains(policy.analyst_blacklist, query.analyst_id)) {
    result.reason = SanityReason::analyst_blacklisted;
    return result;
  }
  if (policy.verify_signature && !policy.verify_signature(query)) {
    result.reason = SanityReason::bad_signature;
    return result;
  }
  if (policy.cumulative_budget_per_analyst &&
      already_spent_for_analyst + result.lifetime_cost >
          *policy.cumulative_budget_per_analyst) {
    result.reason = SanityReason::budget_exceeded;
    return result;
  }
  result.accepted = true;
  return result;
}

std::array<std::uint8_t, 32> pseudonym_key(std::string_view auth_token,
                                           std::string_view query_id) {
  static EVP_MAC* mac = EVP_MAC_fetch(nullptr, "HMAC", nullptr);
  if (mac == nullptr) throw Error("HMAC implementation unavailable");
  EVP_MAC_CTX* ctx = EVP_MAC_CTX_new(mac);
  if (ctx == nullptr) throw Error("HMAC context allocation failed");
  char digest_name[] = "SHA256";
  OSSL_PARAM params[] = {
      OSSL_PARAM_construct_utf8_string(OSSL_MAC_PARAM_DIGEST, digest_name, 0),
      OSSL_PARAM_construct_end()};
  std::array<std::uint8_t, 32> out{};
  std::size_t out_len = 0;
  static const char kLabel[] = "pseudonym-subkey|";
  const bool ok =
      EVP_MAC_init(ctx,
                   reinterpret_cast<const unsigned char*>(auth_token.data()),
                   auth_token.size(), params) == 1 &&
      EVP_MAC_update(ctx, reinterpret_cast<const unsigned char*>(kLabel),
                     sizeof(kLabel) - 1) == 1 &&
      EVP_MAC_update(ctx,
                     reinterpret_cast<const unsigned char*>(query_id.data()),
                     query_id.size()) == 1 &&
      EVP_MAC_final(ctx, out.data(), &out_len, out.size()) == 1;
  EVP_MAC_CTX_free(ctx);
  if (!ok || out_len != out.size()) throw Error("pseudonym key derivation failed");
  return out;
}

std::string pseudonym_from_key(const std::array<std::uint8_t, 32>& key,
                               std::int64_t epoch_index) {
  // Hot path: one hash per submission. The context is reused per thread.
  thread_local EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw Error("digest context allocation failed");
  unsigned char buf[40];
  std::memcpy(buf, key.data(), key.size());
  const auto e = static_cast<std::uint64_t>(epoch_index);
  for (int i = 0; i < 8; ++i) {
    buf[32 + i] = static_cast<unsigned char>((e >> (8 * i)) & 0xff);
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  if (EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, buf, sizeof(buf)) != 1 ||
      EVP_DigestFinal_ex(ctx, digest, &digest_len) != 1 || digest_len < 16) {
    throw Error("pseudonym digest failed");
  }
  return hex_prefix(digest, 16);
}

std::string pseudonym_for_epoch(std::string_view auth_token,
                                std::string_view query_id,
                                std::int64_t epoch_index) {
  return pseudonym_from_key(pseudonym_key(auth_token, query_id), epoch_index);
}

DeviceAgent::DeviceAgent(std::string device_id, std::string auth_token,
                         std::shared_ptr<const DevicePolicy> policy,
                         RandomSource rng)
    : device_id_(std::move(device_id)),
      auth_token_(std::move(auth_token)),
      policy_(std::move(policy)),
      rng_(std::move(rng)) {
  if (!policy_) throw ParameterError("device policy must not be null");
  policy_->ensure_valid();
}

SanityResult DeviceAgent::consider_query(std::shared_ptr<const Query> query,
                                         TimestampMs now) {
  if (!query) throw ParameterError("query must not be null");
  if (Subscription* existing = find_subscription(query->query_id);
      existing != nullptr && existing->active) {
    SanityResult repeat;
    repeat.accepted = true;
    repeat.epsilon_per_query = epsilon_of(query->params).epsilon_per_query;
    return repeat;  // already reserved; nothing further to charge
  }
  SanityResult result =
      sanity_check(*query, *policy_, now, spent_budget(query->analyst_id));
  if (!result.accepted) return result;
  Subscription sub;
  sub.pseud_key = pseudonym_key(auth_token_, query->query_id);
  sub.query = std::move(query);
  const std::string& analyst = sub.query->analyst_id;
  bool charged = false;
  for (auto& [name, amount] : spent_) {
    if (name == analyst) {
      amount += result.lifetime_cost;
      charged = true;
      break;
    }
  }
  if (!charged) spent_.emplace_back(analyst, result.lifetime_cost);
  subs_.push_back(std::move(sub));
  return result;
}

bool DeviceAgent::ingest_sample(std::string_view sensor, double value,
                                TimestampMs at) {
  for (SensorSlot& slot : samples_) {
    if (slot.sensor == sensor) {
      if (at < slot.at) {
        ++dropped_;
        return false;
      }
      slot.value = value;
      slot.at = at;
      return true;
    }
  }
  samples_.push_back(SensorSlot{std::string(sensor), value, at});
  return true;
}

std::optional<double> DeviceAgent::latest_value(std::string_view sensor) const {
  for (const SensorSlot& slot : samples_) {
    if (slot.sensor == sensor) return slot.value;
  }
  return std::nullopt;
}

EpochResult DeviceAgent::execute_epoch(const std::string& query_id,
                                       TimestampMs now) {
  Subscription* sub = find_subscription(query_id);
  if (sub == nullptr || !sub->active) {
    return {EpochOutcome::not_subscribed, std::nullopt};
  }
  const Query& query = *sub->query;
  if (now >= query.t_end) {
    sub->active = false;
    return {EpochOutcome::expired, std::nullopt};
  }
  const std::int64_t epoch = epoch_index_at(now, query.t_start, query.epoch_ms());
  if (epoch <= sub->last_epoch) {
    return {EpochOutcome::already_submitted, std::nullopt};
  }
  std::vector<std::uint8_t> truth;
  if (std::optional<double> value = latest_value(query.sensor)) {
    truth = encode_value(*value, query, epoch).bits;
  } else if (policy_->submit_when_no_sample) {
    truth.assign(query.n(), 0);
  } else {
    return {EpochOutcome::no_sample_skipped, std::nullopt};
  }
  Submission submission;
  submission.query_id = query.query_id;
  submission.epoch_index = epoch;
  submission.pseudonym = pseudonym_from_key(sub->pseud_key, epoch);
  submission.bits = randomize_answer(truth, query.params, rng_);
  submission.sent_at = now;
  sub->last_epoch = epoch;
  return {EpochOutcome::submitted, std::move(submission)};
}

bool DeviceAgent::subscribed(const std::string& query_id) const {
  for (const Subscription& sub : subs_) {
    if (sub.active && sub.query->query_id == query_id) return true;
  }
  return false;
}

double DeviceAgent::spent_budget(const std::string& analyst_id) const {
  for (const auto& [name, amount] : spent_) {
    if (name == analyst_id) return amount;
  }
  return 0.0;
}

DeviceAgent::Subscription* DeviceAgent::find_subscription(
    std::string_view query_id) {
  for (Subscription& sub : subs_) {
    if (sub.query->query_id == query_id) return &sub;
  }
  return nullptr;
}

}  // namespace privstream
