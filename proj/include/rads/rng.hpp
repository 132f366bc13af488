#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <string_view>

namespace rads {

// Deterministic draws on top of mt19937_64. The distribution transforms are
// implemented here rather than with std::*_distribution so that a given seed
// produces the same sequence on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; one spare is cached.
  double normal01() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] keeps the log finite.
    double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection-free modulo is fine here; n is tiny compared to 2^64.
    return gen_() % n;
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// FNV-1a over a byte string, used for seed derivation and content checksums.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Stable per-stream seed: same base seed and identity give the same value
// regardless of what other streams exist.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view a, std::string_view b = {},
                                 std::uint64_t extra = 0) {
  char buf[sizeof(std::uint64_t)];
  std::memcpy(buf, &base, sizeof buf);
  std::uint64_t h = fnv1a64(std::string_view(buf, sizeof buf));
  h = fnv1a64(a, h);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(b, h);
  std::memcpy(buf, &extra, sizeof buf);
  h = fnv1a64(std::string_view(buf, sizeof buf), h);
  return h;
}

}  // namespace rads
