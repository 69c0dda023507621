#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace fairalloc {

// Counter-based splittable PRNG. A stream is (key, counter); child streams
// are derived by hashing a tag into the key, so (base_seed, replication, role)
// tuples give independent streams regardless of draw order elsewhere.
// Uniform doubles are built from the top 53 bits, so integer-exact and
// platform-independent.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : key_(mix(seed + kGolden)) {}

  SplitRng split(std::uint64_t tag) const {
    return SplitRng(Raw{}, mix(key_ ^ mix(tag * kGolden + 0x94D049BB133111EBull)));
  }

  SplitRng split(std::string_view tag) const { return split(fnv1a(tag)); }

  std::uint64_t next_u64() {
    ctr_ += kGolden;
    return mix(key_ + ctr_);
  }

  // Uniform in [0, 1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1].
  double next_unit_open_low() { return 1.0 - next_unit(); }

  // Uniform in [lo, hi).
  double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Uniform integer in [0, bound). Bound must be > 0.
  std::uint64_t next_below(std::uint64_t bound) {
    // 128-bit multiply-shift; bias is < 2^-64 per draw, irrelevant at our scales.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  // Standard normal via Box-Muller (pair cached).
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_unit_open_low();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Beta(a, b) with small integer shape parameters, via order statistics:
  // the a'th smallest of a+b-1 uniforms. Fixed draw count keeps streams aligned.
  double next_beta(int a, int b) {
    double v[15];
    const int m = a + b - 1;
    for (int i = 0; i < m; ++i) v[i] = next_unit();
    // insertion sort; m <= 15
    for (int i = 1; i < m; ++i) {
      const double x = v[i];
      int j = i - 1;
      for (; j >= 0 && v[j] > x; --j) v[j + 1] = v[j];
      v[j + 1] = x;
    }
    return v[a - 1];
  }

 private:
  struct Raw {};
  SplitRng(Raw, std::uint64_t key) : key_(key) {}

  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

  // SplitMix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (const char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ull;
    }
    return h;
  }

  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fairalloc
