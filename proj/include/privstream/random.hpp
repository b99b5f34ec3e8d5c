#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "privstream/errors.hpp"

namespace privstream {

// splitmix64 step: advances the state and returns the next output word.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stable sub-seed derivation so that every device / shard / repetition owns an
// independent stream determined only by (master, stream, substream).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t substream = 0) {
  std::uint64_t h = master;
  h = splitmix64_next(h);
  h ^= 0x9e3779b97f4a7c15ULL * (stream + 1);
  h = splitmix64_next(h);
  h ^= 0xd1b54a32d192ed03ULL * (substream + 1);
  return splitmix64_next(h);
}

// Uniform random source. Three modes:
//   - seeded: deterministic splitmix64 stream (default for simulation/tests)
//   - entropy: seeded once from the OS entropy pool
//   - scripted: replays a fixed sequence of uniform01 draws (test hook)
//
// The state is 8 bytes so that million-device fleets can give every device
// its own source.
class RandomSource {
 public:
  static RandomSource seeded(std::uint64_t seed) { return RandomSource(seed); }

  static RandomSource from_entropy();

  static RandomSource scripted(std::vector<double> draws) {
    RandomSource src(0);
    src.script_ = std::move(draws);
    if (src.script_.empty()) throw ParameterError("scripted source needs at least one draw");
    return src;
  }

  std::uint64_t next_u64() {
    if (!script_.empty()) throw Error("scripted random source only provides uniform01 draws");
    return splitmix64_next(state_);
  }

  // Uniform in [0, 1), 53 bits of precision.
  double uniform01() {
    if (!script_.empty()) {
      double v = script_[script_pos_ % script_.size()];
      ++script_pos_;
      return v;
    }
    return static_cast<double>(splitmix64_next(state_) >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double heads_probability) { return uniform01() < heads_probability; }

  // Uniform integer in [0, bound). bound must be positive.
  std::uint64_t uniform_below(std::uint64_t bound) {
    if (bound == 0) throw ParameterError("uniform_below needs a positive bound");
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

 private:
  explicit RandomSource(std::uint64_t seed) : state_(seed) {}

  std::uint64_t state_;
  std::vector<double> script_;
  std::size_t script_pos_ = 0;
};

}  // namespace privstream
