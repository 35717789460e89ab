#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace dwsec {

/// Uniform on [0,1) with 53 random mantissa bits.
inline double to_unit_interval(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

/// Marsaglia polar method. The second variate of each accepted pair is
/// discarded so one call consumes a whole number of rejection rounds.
template <typename UniformFn>
double polar_normal(UniformFn&& uniform) {
  for (;;) {
    const double u = 2.0 * uniform() - 1.0;
    const double v = 2.0 * uniform() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
}

/// Sequential Gaussian source for process and measurement noise.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return to_unit_interval(engine_()); }
  double standard_normal() {
    return polar_normal([this] { return uniform(); });
  }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 stream. Used for watermark draws that are keyed by
/// (seed, counter) so both channel endpoints can reproduce draw k
/// without sharing state.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  double uniform() { return to_unit_interval(next()); }

  static SplitMix64 keyed(std::uint64_t seed, std::uint64_t counter) {
    SplitMix64 mix(seed);
    const std::uint64_t a = mix.next();
    return SplitMix64(a ^ (counter * 0xD1B54A32D192ED03ULL));
  }

 private:
  std::uint64_t state_;
};

}  // namespace dwsec
