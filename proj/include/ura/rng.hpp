#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ura {

namespace detail {

// splitmix64 finalizer; used to turn (seed, key...) tuples into well-mixed
// substream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Deterministic random stream. Wraps mt19937_64 but generates normal
/// deviates with an explicit polar transform, so that identical seeds give
/// bitwise-identical draws regardless of the standard library in use
/// (std::normal_distribution's algorithm is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : seed_(seed), gen_(detail::mix64(seed)) {}

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal deviate (Marsaglia polar method, spare cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

  /// Child stream derived from this stream's seed and two keys. Independent
  /// of how much has been drawn from the parent, so concurrent consumers
  /// (e.g. one per candidate) stay deterministic regardless of scheduling.
  Rng substream(std::uint64_t key1, std::uint64_t key2) const {
    std::uint64_t s = detail::mix64(seed_ ^ detail::mix64(key1));
    s = detail::mix64(s ^ detail::mix64(key2));
    return Rng(s);
  }

  /// One raw 64-bit draw; consumed by callers that need a fresh nonce.
  std::uint64_t next_u64() { return gen_(); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ura
