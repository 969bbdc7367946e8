#ifndef NODALFLOW_RNG_HPP
#define NODALFLOW_RNG_HPP

#include <cstdint>

namespace nodalflow {

// Counter-based generator: output n is mix(key + n * gamma), the SplitMix64
// finalizer over a Weyl sequence. Substreams re-key through the same mixer so
// trajectory i of a dataset never depends on how many draws trajectory i-1
// consumed.
class Rng {
public:
  explicit constexpr Rng(std::uint64_t seed = 0) : seed_(seed), key_(mix(seed ^ kSeedSalt)) {}

  constexpr std::uint64_t seed() const { return seed_; }
  constexpr std::uint64_t counter() const { return counter_; }

  constexpr std::uint64_t next_u64() {
    ++counter_;
    return mix(key_ + counter_ * kGamma);
  }

  /// Uniform in [0, 1) from the top 53 bits.
  constexpr double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  constexpr double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n) by Lemire's multiply-shift (no rejection).
  std::uint64_t below(std::uint64_t n) {
    const unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  /// Independent stream `index`, a pure function of (seed, index).
  constexpr Rng substream(std::uint64_t index) const {
    return Rng(mix(seed_ ^ mix(index + kStreamSalt)));
  }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static constexpr std::uint64_t kSeedSalt = 0x6a09e667f3bcc909ULL;
  static constexpr std::uint64_t kStreamSalt = 0xbb67ae8584caa73bULL;

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace nodalflow

#endif
