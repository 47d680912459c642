#include "ertl/rng.hpp"

#include <cmath>

namespace ertl {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  // Reject the tail that would bias the modulus.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller on two fresh uniforms; u clamped away from 0 for the log.
  double u = uniform01();
  if (u <= 0.0) u = 0x1.0p-53;
  const double v = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u));
  const double theta = 6.283185307179586476925286766559 * v;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

}  // namespace ertl
