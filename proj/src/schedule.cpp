#include "chromadiff/schedule.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "chromadiff/errors.hpp"

namespace chromadiff {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw ConfigError("noise schedule needs at least one step");
  alphas_.reserve(betas_.size());
  alpha_bars_.reserve(betas_.size());
  double running = 1.0;
  for (std::size_t t = 0; t < betas_.size(); ++t) {
    const double b = betas_[t];
    if (!std::isfinite(b) || b <= 0.0 || b >= 1.0) {
      throw ConfigError("beta[" + std::to_string(t) + "] = " + std::to_string(b) +
                        " is outside (0, 1)");
    }
    alphas_.push_back(1.0 - b);
    running *= alphas_.back();
    // Samplers divide by sqrt(alpha_bar); keep it a normal double.
    if (running < std::numeric_limits<double>::min()) {
      throw ConfigError("alpha_bar underflows at step " + std::to_string(t) +
                        "; shorten the schedule or lower the betas");
    }
    alpha_bars_.push_back(running);
  }
}

double NoiseSchedule::posterior_variance(int t) const {
  check_step(t);
  if (t == 0) return 0.0;
  return beta(t) * (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t));
}

void NoiseSchedule::check_step(int t) const {
  if (t < 0 || t >= steps()) {
    throw ContractError("step index " + std::to_string(t) + " outside [0, " +
                        std::to_string(steps()) + ")");
  }
}

std::size_t NoiseSchedule::index(int t) const {
  check_step(t);
  return static_cast<std::size_t>(t);
}

NoiseSchedule build_linear_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ConfigError("schedule steps must be >= 1, got " + std::to_string(steps));
  if (!std::isfinite(beta_start) || !std::isfinite(beta_end)) {
    throw ConfigError("schedule betas must be finite");
  }
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    std::ostringstream msg;
    msg << "schedule requires 0 < beta_start <= beta_end < 1, got beta_start=" << beta_start
        << " beta_end=" << beta_end;
    throw ConfigError(msg.str());
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  if (steps == 1) {
    betas[0] = beta_start;
  } else {
    const double span = beta_end - beta_start;
    for (int t = 0; t < steps; ++t) {
      betas[t] = beta_start + span * (static_cast<double>(t) / static_cast<double>(steps - 1));
    }
    betas.back() = beta_end;
  }
  return NoiseSchedule(std::move(betas));
}

ImageTensor forward_marginal(const NoiseSchedule& schedule, const ImageTensor& x0, int t,
                             const ImageTensor& eps) {
  require_same_shape(x0, eps, "forward_marginal");
  const double ab = schedule.alpha_bar(t);
  const double signal = std::sqrt(ab);
  const double noise = std::sqrt(1.0 - ab);
  ImageTensor out(x0.height(), x0.width());
  auto o = out.values();
  auto x = x0.values();
  auto e = eps.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = signal * x[i] + noise * e[i];
  return out;
}

ImageTensor forward_step(const NoiseSchedule& schedule, const ImageTensor& x_prev, int t,
                         const ImageTensor& eps) {
  require_same_shape(x_prev, eps, "forward_step");
  const double keep = std::sqrt(schedule.alpha(t));
  const double noise = std::sqrt(schedule.beta(t));
  ImageTensor out(x_prev.height(), x_prev.width());
  auto o = out.values();
  auto x = x_prev.values();
  auto e = eps.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = keep * x[i] + noise * e[i];
  return out;
}

}  // namespace chromadiff
