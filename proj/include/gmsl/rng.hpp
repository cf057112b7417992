#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace gmsl {

// Seeded generator with fully specified transforms so that draws are
// bit-identical on every platform: the engine is the standard 64-bit
// Mersenne Twister (mt19937_64), whose output sequence the C++ standard
// pins down, and every transform below is written out explicitly instead of
// delegating to implementation-defined <random> distributions.
class PortableRng {
 public:
  explicit PortableRng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1): the top 53 bits of one engine draw.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  // Standard normal by the trigonometric (Box-Muller) transform, cosine
  // branch only: consumes exactly two uniforms per draw, no cached state.
  double normal01() {
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps the log finite
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // Uniform integer on the inclusive range [lo, hi].
  int uniform_int(int lo, int hi) {
    const double span = static_cast<double>(hi - lo + 1);
    const int offset = static_cast<int>(uniform01() * span);
    return lo + std::min(offset, hi - lo);
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  std::mt19937_64 engine_;
};

} // namespace gmsl
