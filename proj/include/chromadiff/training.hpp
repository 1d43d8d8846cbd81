#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "chromadiff/eps_net.hpp"
#include "chromadiff/schedule.hpp"
#include "chromadiff/toy_data.hpp"

namespace chromadiff {

enum class Optimizer { kSgd, kAdam };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  std::size_t steps = 5000;
  Optimizer optimizer = Optimizer::kAdam;
  std::uint64_t seed = 0;

  /// Throws ConfigError. A learning rate of 0 is accepted (frozen run).
  void validate() const;
};

struct TrainResult {
  SmallEpsNet net;
  std::vector<double> loss_history;  // one mean-squared error per step
};

/// Mean squared epsilon-prediction error over one batch and its gradient.
/// Sample b of the batch uses data index, time step and noise drawn from
/// counter streams keyed on (seed, step, b).
struct BatchDraw {
  std::vector<ImageTensor> x0;
  std::vector<int> t;
  std::vector<ImageTensor> eps;
};
BatchDraw draw_batch(const Dataset& data, const NoiseSchedule& schedule, std::uint64_t seed,
                     std::size_t step, std::size_t batch_size);

/// Loss = mean over batch and pixels of (net(x_t, t) - eps)^2 where
/// x_t = forward_marginal(x0, t, eps). Overwrites `grad` with dLoss/dparams.
double batch_loss_and_gradient(const SmallEpsNet& net, const NoiseSchedule& schedule,
                               const BatchDraw& batch, std::span<double> grad);
double batch_loss(const SmallEpsNet& net, const NoiseSchedule& schedule, const BatchDraw& batch);

/// Trains with the epsilon-prediction objective, t uniform over [0, T).
/// Throws NumericalFault (index = step) if the loss becomes non-finite.
TrainResult train_denoiser(SmallEpsNet net, const Dataset& data, const NoiseSchedule& schedule,
                           const TrainConfig& cfg);

/// Trailing moving average with the given window (shorter at the start).
std::vector<double> smooth_losses(const std::vector<double>& losses, std::size_t window);

/// Two-column CSV "step,loss" with round-trippable decimals.
void write_loss_csv(const std::vector<double>& losses, const std::filesystem::path& path);

}  // namespace chromadiff
