#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wan {

// Thrown whenever a documented precondition or invariant is violated.
class ContractViolation : public std::runtime_error {
 public:
  explicit ContractViolation(const std::string& what) : std::runtime_error(what) {}
};

// unreadable or unwritable files, as opposed to well-read files with bad content
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

constexpr uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic RNG. All randomness in the project flows through this class so
// results are bit-identical across platforms; the uniform mapping avoids
// std::uniform_real_distribution, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  // Derives an independent substream seed from a base seed and a purpose tag.
  static uint64_t substream(uint64_t seed, std::string_view tag) {
    return splitmix64(seed ^ fnv1a64(tag));
  }

  uint64_t next_bits() { return eng_(); }

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased draw from [0, n).
  int64_t uniform_int(int64_t n) {
    check(n > 0, "Rng::uniform_int: n must be positive");
    const uint64_t un = static_cast<uint64_t>(n);
    while (true) {
      const uint64_t v = eng_();
      const uint64_t r = v % un;
      if (v - r <= UINT64_MAX - (un - 1)) return static_cast<int64_t>(r);
    }
  }

  int64_t poisson(double mean) {
    check(mean >= 0.0, "Rng::poisson: mean must be non-negative");
    if (mean == 0.0) return 0;
    const double limit = std::exp(-mean);
    int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

 private:
  std::mt19937_64 eng_;
};

// Worker count for the parallel kernels, read once from WAN_THREADS (default 1).
int thread_count();

}  // namespace wan
