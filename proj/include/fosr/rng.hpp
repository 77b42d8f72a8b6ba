#pragma once

#include <cstdint>
#include <random>

namespace fosr::rng {

// splitmix64; used to derive decorrelated stream seeds from (seed, index).
inline std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
  return mix(seed ^ mix(index + 1));
}

inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(derive(seed, index));
}

// Uniform on [0,1). Hand-rolled so results do not depend on the standard
// library's distribution implementation.
inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * uniform01(g);
}

// Unbiased integer on {lo, ..., hi} via rejection.
inline int uniform_int(std::mt19937_64& g, int lo, int hi) {
  const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t x;
  do {
    x = g();
  } while (x >= limit);
  return lo + static_cast<int>(x % range);
}

// Standard normal via Marsaglia polar; deterministic given the stream.
class Normal {
 public:
  double operator()(std::mt19937_64& g) {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01(g) - 1.0;
      v = 2.0 * uniform01(g) - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

 private:
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fosr::rng
