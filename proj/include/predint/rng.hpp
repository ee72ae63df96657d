#pragma once

// Counter-based random streams.
//
// Every stochastic computation draws from a substream identified by
// (master_seed, index, purpose). The substream seed is a SplitMix64 hash of
// those three values, so the draws of replicate b never depend on how many
// other replicates ran before it or on which thread executed it.

#include <array>
#include <bit>
#include <cstdint>

namespace predint {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// xoshiro256** generator. Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) {
    std::uint64_t s = seed;
    for (auto& word : state_) {
      s += 0x9E3779B97F4A7C15ULL;
      word = splitmix64(s);
    }
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    const std::uint64_t result = std::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = std::rotl(state_[3], 45);
    return result;
  }

  /// Uniform on the open interval (0, 1); never returns 0 or 1.
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::array<std::uint64_t, 4> state_{};
};

/// Purposes keep streams for different roles within one replicate apart.
enum class StreamPurpose : std::uint64_t {
  data = 1,
  bootstrap_sample = 2,
  bootstrap_predictand = 3,
  predictand = 4,
  method = 5,
  fiducial = 6,
  randomization = 7,
};

struct RngPolicy {
  std::uint64_t master_seed = 0;

  std::uint64_t substream_seed(std::uint64_t index, StreamPurpose purpose) const {
    std::uint64_t h = splitmix64(master_seed ^ 0x5851F42D4C957F2DULL);
    h = splitmix64(h ^ splitmix64(index + 0x14057B7EF767814FULL));
    h = splitmix64(h ^ (static_cast<std::uint64_t>(purpose) * 0xD6E8FEB86659FD93ULL));
    return h;
  }

  Rng substream(std::uint64_t index, StreamPurpose purpose) const {
    return Rng(substream_seed(index, purpose));
  }

  /// Independent policy for nested Monte Carlo inside replicate `index`.
  RngPolicy child(std::uint64_t index) const {
    return RngPolicy{substream_seed(index, StreamPurpose::method)};
  }
};

}  // namespace predint
