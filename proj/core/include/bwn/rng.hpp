#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace bwn {

namespace detail {
// splitmix64 step; used to decorrelate (seed, epoch) pairs.
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Deterministic RNG with self-contained distributions, so trajectories are
/// reproducible independent of the standard library's distribution
/// implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Stream for one epoch of one run; mixes the two values so neighboring
  /// (seed, epoch) pairs do not collide.
  static Rng for_epoch(std::uint64_t run_seed, std::uint64_t epoch) {
    std::uint64_t s = run_seed;
    std::uint64_t a = detail::splitmix64(s);
    s ^= epoch * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL;
    std::uint64_t b = detail::splitmix64(s);
    return Rng(a ^ (b + 0x9e3779b97f4a7c15ULL));
  }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; keeps the spare draw.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Uniform index in [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n) {
    // rejection sampling on the top bits keeps the distribution exact
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return static_cast<std::size_t>(v % n);
  }

  /// Fisher-Yates shuffle.
  template <typename It>
  void shuffle(It first, It last) {
    auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(first[i - 1], first[j]);
    }
  }

private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace bwn
