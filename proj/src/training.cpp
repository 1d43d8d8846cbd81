#include "chromadiff/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "chromadiff/errors.hpp"
#include "chromadiff/rng.hpp"

namespace chromadiff {
namespace {

constexpr std::uint64_t kIndexStream = 1;
constexpr std::uint64_t kTimeStream = 2;
constexpr std::uint64_t kNoiseStream = 3;

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be finite and >= 0");
  }
  if (batch_size == 0) throw ConfigError("batch size must be > 0");
  if (steps == 0) throw ConfigError("training steps must be > 0");
}

BatchDraw draw_batch(const Dataset& data, const NoiseSchedule& schedule, std::uint64_t seed,
                     std::size_t step, std::size_t batch_size) {
  const CounterRng index_rng(seed, kIndexStream);
  const CounterRng time_rng(seed, kTimeStream);
  const CounterRng noise_rng(seed, kNoiseStream);
  const auto size = data.size();
  const std::size_t pixels = ImageTensor::kChannels * data.height() * data.width();

  BatchDraw batch;
  for (std::size_t b = 0; b < batch_size; ++b) {
    const std::uint64_t slot = static_cast<std::uint64_t>(step) * batch_size + b;
    const std::uint64_t bits = index_rng.bits(slot);
    batch.x0.push_back(data.sample(size ? bits % *size : bits));
    batch.t.push_back(static_cast<int>(time_rng.bits(slot) % static_cast<std::uint64_t>(schedule.steps())));
    ImageTensor eps(data.height(), data.width());
    kernels::serial::fill_normal(noise_rng, slot * pixels, eps.values());
    batch.eps.push_back(std::move(eps));
  }
  return batch;
}

double batch_loss_and_gradient(const SmallEpsNet& net, const NoiseSchedule& schedule,
                               const BatchDraw& batch, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const double count = static_cast<double>(batch.x0.size() * batch.x0.front().size());
  SmallEpsNet::Workspace ws;
  double sse = 0.0;
  for (std::size_t b = 0; b < batch.x0.size(); ++b) {
    const ImageTensor x_t = forward_marginal(schedule, batch.x0[b], batch.t[b], batch.eps[b]);
    sse += net.accumulate_gradient(x_t, batch.t[b], batch.eps[b], 1.0 / count, grad, ws);
  }
  return sse / count;
}

double batch_loss(const SmallEpsNet& net, const NoiseSchedule& schedule, const BatchDraw& batch) {
  double sse = 0.0;
  double count = 0.0;
  for (std::size_t b = 0; b < batch.x0.size(); ++b) {
    const ImageTensor x_t = forward_marginal(schedule, batch.x0[b], batch.t[b], batch.eps[b]);
    const ImageTensor pred = net.predict_epsilon(x_t, batch.t[b]);
    auto p = pred.values();
    auto e = batch.eps[b].values();
    for (std::size_t i = 0; i < p.size(); ++i) sse += (p[i] - e[i]) * (p[i] - e[i]);
    count += static_cast<double>(p.size());
  }
  return sse / count;
}

TrainResult train_denoiser(SmallEpsNet net, const Dataset& data, const NoiseSchedule& schedule,
                           const TrainConfig& cfg) {
  cfg.validate();
  if (data.size() && *data.size() == 0) throw ConfigError("training dataset is empty");
  if (data.height() != net.shape().height || data.width() != net.shape().width) {
    throw ConfigError("dataset image size does not match the network input");
  }
  if (schedule.steps() != net.shape().steps) {
    throw ConfigError("schedule length does not match the network's time embedding");
  }

  const std::size_t n = net.parameter_count();
  std::vector<double> grad(n);
  std::vector<double> m;
  std::vector<double> v;
  if (cfg.optimizer == Optimizer::kAdam) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
  }

  TrainResult result{std::move(net), {}};
  result.loss_history.reserve(cfg.steps);
  auto params = result.net.parameters();
  double beta1_pow = 1.0;
  double beta2_pow = 1.0;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const BatchDraw batch = draw_batch(data, schedule, cfg.seed, step, cfg.batch_size);
    double loss = 0.0;
    try {
      loss = batch_loss_and_gradient(result.net, schedule, batch, grad);
    } catch (const NumericalFault& e) {
      throw NumericalFault("training step " + std::to_string(step), static_cast<long>(step),
                           std::string("training diverged: ") + e.what());
    }
    if (!std::isfinite(loss)) {
      throw NumericalFault("training step " + std::to_string(step), static_cast<long>(step),
                           "training loss became non-finite at step " + std::to_string(step));
    }
    result.loss_history.push_back(loss);

    if (cfg.learning_rate == 0.0) continue;
    if (cfg.optimizer == Optimizer::kSgd) {
      for (std::size_t i = 0; i < n; ++i) params[i] -= cfg.learning_rate * grad[i];
    } else {
      beta1_pow *= kAdamBeta1;
      beta2_pow *= kAdamBeta2;
      const double c1 = 1.0 / (1.0 - beta1_pow);
      const double c2 = 1.0 / (1.0 - beta2_pow);
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * grad[i];
        v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
        params[i] -= cfg.learning_rate * (m[i] * c1) / (std::sqrt(v[i] * c2) + kAdamEps);
      }
    }
  }
  return result;
}

std::vector<double> smooth_losses(const std::vector<double>& losses, std::size_t window) {
  if (window == 0) throw ConfigError("smoothing window must be > 0");
  std::vector<double> out(losses.size());
  double running = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    running += losses[i];
    if (i >= window) running -= losses[i - window];
    out[i] = running / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

void write_loss_csv(const std::vector<double>& losses, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError(path.string(), "cannot open loss history for writing");
  os << "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, losses[i]);
    os << buf;
  }
  if (!os) throw IoError(path.string(), "failed writing loss history");
}

}  // namespace chromadiff
