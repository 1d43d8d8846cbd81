#include "chromadiff/rng.hpp"

#include <cmath>
#include <numbers>

namespace chromadiff {

double CounterRng::normal(std::uint64_t index) const noexcept {
  const std::uint64_t pair = index >> 1;
  const double u1 = uniform(2 * pair);
  const double u2 = uniform(2 * pair + 1);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return (index & 1U) ? radius * std::sin(angle) : radius * std::cos(angle);
}

}  // namespace chromadiff
