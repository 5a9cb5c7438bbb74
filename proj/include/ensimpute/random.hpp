#pragma once

// Explicit random streams and a splittable seed derivation scheme.
//
// Every stochastic operation in the library takes a RandomStream& so that a
// result is a pure function of its inputs and the stream's seed. Seeds for
// independent work units are derived by hashing a parent seed together with
// the unit's coordinates (dataset, ratio, repetition, fold, member, ...), so
// results never depend on execution order.
//
// Only the raw 64-bit output of std::mt19937_64 is used; it is fully
// specified by the standard, and the conversions to doubles and normal
// variates below are our own, so streams are reproducible across standard
// library implementations.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <stdexcept>
#include <string_view>

namespace ensimpute {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a, used to fold names into seed derivations.
inline constexpr std::uint64_t hash_name(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Combine a parent seed with a sequence of coordinates.
inline constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                           std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = splitmix64(parent ^ 0x5851f42d4c957f2dULL);
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

/// Ratios enter seed derivations as integer parts-per-million.
inline std::uint64_t ratio_key(double ratio) noexcept {
  return static_cast<std::uint64_t>(std::llround(ratio * 1e6));
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (lo, hi).
  double uniform(double lo, double hi) {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return lo + (hi - lo) * u;
  }

  /// Uniform integer in [0, n), unbiased.
  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("RandomStream::index: empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return static_cast<std::size_t>(r % bound);
  }

  /// Standard normal variate (Marsaglia polar method).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  /// Standard normal truncated to [-bound, bound], by rejection.
  /// Acceptance is >= 68% for any bound >= 1; smaller bounds fall back to
  /// Robert's uniform proposal.
  double truncated_normal(double bound) {
    if (!(bound > 0.0)) throw std::invalid_argument("truncated_normal: bound must be positive");
    if (bound >= 1.0) {
      for (;;) {
        const double z = normal();
        if (std::abs(z) <= bound) return z;
      }
    }
    for (;;) {
      const double z = -bound + 2.0 * bound * uniform();
      if (uniform() < std::exp(-0.5 * z * z)) return z;
    }
  }

  /// A child stream for a sub-task, independent of this stream's position.
  RandomStream fork(std::initializer_list<std::uint64_t> parts) const {
    return RandomStream(derive_seed(seed_, parts));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ensimpute
