#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bartm {

// splitmix64; used to derive independent seed streams from a base seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seedable generator with self-contained sampling routines. The standard
// library distributions are implementation-defined, so all transforms are
// spelled out here: identical seeds give identical draws on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(mix_seed(seed, 0)) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform on [0, 1)
  double u01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // uniform on {0, ..., n-1}
  int uniform_int(int n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return static_cast<int>(v % bound);
  }

  bool bernoulli(double p) { return u01() < p; }

  // Box-Muller without caching: one value per call, fixed draw count.
  double normal() {
    const double u1 = 1.0 - u01();  // (0, 1]
    const double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Marsaglia-Tsang; unit scale.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = 1.0 - u01();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = 1.0 - u01();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
  }

  // density proportional to x^(-shape-1) * exp(-scale/x)
  double inv_gamma(double shape, double scale) { return scale / gamma(shape); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace bartm
