#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "pointscan/core/error.hpp"

namespace pointscan {

// splitmix64 finalizer. Bijective on 64-bit words, used both as the hash that
// derives stream keys and as the output function of the counter-based stream.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Counter-based random stream. Output i is a pure function of (key, i), so a
// stream replays identically regardless of platform, thread, or call site.
// Streams are derived from a root seed plus a purpose string and up to two
// integer qualifiers (epoch, step, parameter name hash, ...), which keeps
// every consumer of randomness on its own independent sequence.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  RngStream(std::uint64_t seed, std::string_view purpose, std::uint64_t a = 0,
            std::uint64_t b = 0)
      : key_(mix64(seed ^ mix64(fnv1a(purpose) ^ mix64(a ^ mix64(b))))) {}

  std::uint64_t next_u64() {
    counter_ += 1;
    return mix64(key_ + 0x9e3779b97f4a7c15ULL * counter_);
  }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Marsaglia polar method. Uses only sqrt/log so the values are stable
  // across libm implementations. The spare variate is kept for the next call.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    for (;;) {
      double u = 2.0 * uniform() - 1.0;
      double v = 2.0 * uniform() - 1.0;
      double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) {
        double r = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * r;
        has_spare_ = true;
        return u * r;
      }
    }
  }

  // Unbiased uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ArgError("RngStream::below: n must be positive");
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r < limit) return r % n;
    }
  }

  // Fisher-Yates from the back; consumes exactly size-1 draws.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pointscan
