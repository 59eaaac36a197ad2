#pragma once

#include <cstdint>
#include <random>

namespace cvl {

/// Seeded generator whose output is identical on every standard library:
/// mt19937_64's sequence is fixed by the standard, the conversions below are ours.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  /// Independent stream for a (seed, index) pair.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
    return mix(mix(seed) ^ (index * 0xd1342543de82ef95ull + 1));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cvl
