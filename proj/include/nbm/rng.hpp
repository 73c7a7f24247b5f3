// Deterministic random streams. All sampling in the project goes through
// this wrapper so that a 64-bit seed reproduces every parameter bit-exactly
// across platforms (std::distributions are implementation-defined, so the
// transforms are written out explicitly).
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "nbm/common.hpp"

namespace nbm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derive an independent stream seed from a base seed and a tag.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Box-Muller; caches the spare deviate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform direction on the unit sphere in R^d.
  Vector unit_vector(int d) {
    Vector w(d);
    double n2 = 0.0;
    do {
      for (int i = 0; i < d; ++i) w[i] = normal();
      n2 = w.squaredNorm();
    } while (n2 < 1e-24);
    return w / std::sqrt(n2);
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace nbm
