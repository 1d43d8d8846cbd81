#pragma once

#include <cstddef>
#include <vector>

#include "chromadiff/tensor.hpp"

namespace chromadiff {

/// Per-step coefficients of a T-step variance-preserving diffusion. Step
/// indices are 0-based; t = T-1 is the noisiest. Immutable after
/// construction.
class NoiseSchedule {
 public:
  /// Builds from explicit betas; each must lie in (0, 1).
  explicit NoiseSchedule(std::vector<double> betas);

  int steps() const noexcept { return static_cast<int>(betas_.size()); }
  double beta(int t) const { return betas_.at(index(t)); }
  double alpha(int t) const { return alphas_.at(index(t)); }
  double alpha_bar(int t) const { return alpha_bars_.at(index(t)); }
  /// alpha_bar at t-1, with alpha_bar(-1) = 1.
  double alpha_bar_prev(int t) const { return t == 0 ? 1.0 : alpha_bar(t - 1); }
  /// Posterior variance of q(x_{t-1} | x_t, x_0); zero at t = 0.
  double posterior_variance(int t) const;

  const std::vector<double>& betas() const noexcept { return betas_; }
  const std::vector<double>& alphas() const noexcept { return alphas_; }
  const std::vector<double>& alpha_bars() const noexcept { return alpha_bars_; }

  /// Throws ContractError unless 0 <= t < T.
  void check_step(int t) const;

 private:
  std::size_t index(int t) const;

  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
};

struct ScheduleParams {
  int steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

/// Betas linearly spaced from beta_start to beta_end inclusive.
NoiseSchedule build_linear_schedule(int steps, double beta_start, double beta_end);
inline NoiseSchedule build_linear_schedule(const ScheduleParams& p) {
  return build_linear_schedule(p.steps, p.beta_start, p.beta_end);
}

/// x_t = sqrt(alpha_bar[t]) x0 + sqrt(1 - alpha_bar[t]) eps.
ImageTensor forward_marginal(const NoiseSchedule& schedule, const ImageTensor& x0, int t,
                             const ImageTensor& eps);

/// x_t = sqrt(alpha[t]) x_{t-1} + sqrt(beta[t]) eps.
ImageTensor forward_step(const NoiseSchedule& schedule, const ImageTensor& x_prev, int t,
                         const ImageTensor& eps);

}  // namespace chromadiff
