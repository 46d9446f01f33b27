#ifndef VRLAB_RNG_HPP
#define VRLAB_RNG_HPP

#include <cmath>
#include <cstdint>

namespace vrlab::rng {

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer. Bijective on 64-bit words.
inline constexpr std::uint64_t mix(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

// Counter-based split: the value at position `index` of the stream keyed by
// `seed`. split(seed, i) does not depend on how many other indices are ever
// queried, so tables built for different lengths agree on their common prefix.
inline constexpr std::uint64_t split(std::uint64_t seed, std::uint64_t index) {
  return mix(seed + (index + 1) * kGamma);
}

// Sequential deterministic stream over the same construction. All derived
// draws (unit doubles, bounded ints, normals) are computed from raw bits with
// fixed arithmetic, so results are identical across standard libraries.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() { return split(seed_, counter_++); }

  // Uniform double in [0, 1), 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). n must be nonzero.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller; draws two units per pair.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_unit();
    double u2 = next_unit();
    // Guard against log(0).
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace vrlab::rng

#endif  // VRLAB_RNG_HPP
