#pragma once

#include <cstdint>
#include <random>

namespace rocl {

// Seeded random stream. Each simulator concern (odometry noise, radio events,
// trajectory shuffling, ...) owns its own stream so that draw order -- and
// with it every produced artifact -- is reproducible for a given seed.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) : engine_(seed) {}

  // Zero-mean Gaussian draw with standard deviation sigma >= 0. Always
  // consumes exactly one draw, so call sequences stay aligned across
  // configurations that differ only in noise levels.
  double gaussian(double sigma);

  // Uniform draw in [lo, hi).
  double uniform(double lo, double hi);

  // Bernoulli event with probability p in [0, 1].
  bool chance(double p);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> unit_normal_{0.0, 1.0};
};

// value + N(0, sigma^2) drawn from the stream. sigma must be >= 0; sigma == 0
// returns the value unchanged (one draw is still consumed).
double corrupt(double value, double sigma, NoiseStream& rng);

}  // namespace rocl
