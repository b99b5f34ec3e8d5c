#include "privstream/random.hpp"

#include <random>

namespace privstream {

RandomSource RandomSource::from_entropy() {
  std::random_device dev;
  const std::uint64_t seed =
      (static_cast<std::uint64_t>(dev()) << 32) ^ static_cast<std::uint64_t>(dev());
  return RandomSource::seeded(seed);
}

}  // namespace privstream
