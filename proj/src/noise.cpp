#include "rocl/noise.hpp"

#include <stdexcept>

namespace rocl {

double NoiseStream::gaussian(double sigma) {
  if (sigma < 0.0) {
    throw std::invalid_argument("NoiseStream::gaussian: sigma must be >= 0");
  }
  return sigma * unit_normal_(engine_);
}

double NoiseStream::uniform(double lo, double hi) {
  if (!(lo < hi)) {
    throw std::invalid_argument("NoiseStream::uniform: lo must be < hi");
  }
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

bool NoiseStream::chance(double p) {
  if (p < 0.0 || p > 1.0) {
    throw std::invalid_argument("NoiseStream::chance: p must be in [0, 1]");
  }
  return std::uniform_real_distribution<double>(0.0, 1.0)(engine_) < p;
}

double corrupt(double value, double sigma, NoiseStream& rng) {
  return value + rng.gaussian(sigma);
}

}  // namespace rocl
