#include "chromadiff/sampler.hpp"

#include <cmath>
#include <string>

#include "chromadiff/errors.hpp"
#include "chromadiff/kernels.hpp"
#include "chromadiff/rng.hpp"

namespace chromadiff {

void ColorMask::validate() const {
  for (std::size_t c = 0; c < 3; ++c) {
    if (!(rgb[c] >= 0.0 && rgb[c] <= 1.0)) {
      throw ConfigError("mask component " + std::to_string(c) + " = " + std::to_string(rgb[c]) +
                        " is outside [0, 1]");
    }
  }
}

ImageTensor ColorMask::materialize(std::size_t height, std::size_t width) const {
  return ImageTensor::constant(height, width, rgb);
}

void InjectionConfig::validate(int total_steps) const {
  if (!(s_noise >= 0.0) || !std::isfinite(s_noise)) {
    throw ConfigError("s_noise must be finite and >= 0");
  }
  mask.validate();
  if (window_first < 1 || window_first > window_last || window_last > total_steps) {
    throw ConfigError("injection window [" + std::to_string(window_first) + ", " +
                      std::to_string(window_last) + "] must satisfy 1 <= first <= last <= " +
                      std::to_string(total_steps));
  }
}

ImageTensor NoiseStream::initial(std::size_t height, std::size_t width) const {
  ImageTensor out(height, width);
  kernels::serial::fill_normal(CounterRng(seed_, 0), 0, out.values());
  return out;
}

ImageTensor NoiseStream::step_noise(int t, std::size_t height, std::size_t width) const {
  ImageTensor out(height, width);
  kernels::serial::fill_normal(CounterRng(seed_, 1 + static_cast<std::uint64_t>(t)), 0,
                               out.values());
  return out;
}

namespace {

void require_finite(const ImageTensor& x, int t) {
  if (!x.all_finite()) {
    throw NumericalFault("reverse step t=" + std::to_string(t), t,
                         "non-finite value in reverse step at t=" + std::to_string(t));
  }
}

void check_denoiser_shape(const Denoiser& d, const ImageTensor& x) {
  if (d.image_height() != x.height() || d.image_width() != x.width()) {
    throw ContractError("sampler: latent shape does not match the denoiser");
  }
}

// Shared reverse loop. `inj == nullptr` runs with no injection code at all.
template <typename StepFn>
ImageTensor run_chain(const NoiseSchedule& s, ImageTensor x, const InjectionConfig* inj,
                      StepFn&& step) {
  const int total = s.steps();
  ImageTensor scaled_mask;
  if (inj != nullptr) {
    inj->validate(total);
    scaled_mask = inj->s_noise * inj->mask.materialize(x.height(), x.width());
  }
  for (int t = total - 1; t >= 0; --t) {
    const int j = total - t;  // 1-based denoising step
    const bool inject = inj != nullptr && inj->active_at(j);
    if (inject && inj->placement == InjectionPlacement::kBeforeDenoiser) x += scaled_mask;
    x = step(x, t);
    if (inject && inj->placement == InjectionPlacement::kAfterStep) x += scaled_mask;
  }
  return x;
}

}  // namespace

ImageTensor ancestral_step(const Denoiser& d, const NoiseSchedule& s, const ImageTensor& x_t,
                           int t, const ImageTensor& z) {
  s.check_step(t);
  require_same_shape(x_t, z, "ancestral_step");
  const ImageTensor eps = d.predict_epsilon(x_t, t);
  require_same_shape(x_t, eps, "ancestral_step denoiser output");
  const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha(t));
  const double eps_coef = s.beta(t) / std::sqrt(1.0 - s.alpha_bar(t));
  ImageTensor out(x_t.height(), x_t.width());
  auto o = out.values();
  auto x = x_t.values();
  auto e = eps.values();
  if (t == 0) {
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = inv_sqrt_alpha * (x[i] - eps_coef * e[i]);
  } else {
    const double sigma = std::sqrt(s.posterior_variance(t));
    auto zv = z.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
      o[i] = inv_sqrt_alpha * (x[i] - eps_coef * e[i]) + sigma * zv[i];
    }
  }
  require_finite(out, t);
  return out;
}

ImageTensor ddim_step(const Denoiser& d, const NoiseSchedule& s, const ImageTensor& x_t, int t) {
  s.check_step(t);
  const ImageTensor eps = d.predict_epsilon(x_t, t);
  require_same_shape(x_t, eps, "ddim_step denoiser output");
  const double ab = s.alpha_bar(t);
  const double ab_prev = s.alpha_bar_prev(t);
  const double sqrt_ab = std::sqrt(ab);
  const double sqrt_1mab = std::sqrt(1.0 - ab);
  const double sqrt_ab_prev = std::sqrt(ab_prev);
  const double sqrt_1mab_prev = std::sqrt(1.0 - ab_prev);
  ImageTensor out(x_t.height(), x_t.width());
  auto o = out.values();
  auto x = x_t.values();
  auto e = eps.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double x0_hat = (x[i] - sqrt_1mab * e[i]) / sqrt_ab;
    o[i] = sqrt_ab_prev * x0_hat + sqrt_1mab_prev * e[i];
  }
  require_finite(out, t);
  return out;
}

ImageTensor sample(const Denoiser& d, const NoiseSchedule& s, const NoiseStream& stream,
                   const InjectionConfig& inj) {
  const std::size_t h = d.image_height();
  const std::size_t w = d.image_width();
  return run_chain(s, stream.initial(h, w), &inj, [&](const ImageTensor& x, int t) {
    return ancestral_step(d, s, x, t, stream.step_noise(t, h, w));
  });
}

ImageTensor sample(const Denoiser& d, const NoiseSchedule& s, const NoiseStream& stream) {
  const std::size_t h = d.image_height();
  const std::size_t w = d.image_width();
  return run_chain(s, stream.initial(h, w), nullptr, [&](const ImageTensor& x, int t) {
    return ancestral_step(d, s, x, t, stream.step_noise(t, h, w));
  });
}

ImageTensor ddim_sample(const Denoiser& d, const NoiseSchedule& s, const ImageTensor& initial,
                        const InjectionConfig& inj) {
  check_denoiser_shape(d, initial);
  return run_chain(s, initial, &inj,
                   [&](const ImageTensor& x, int t) { return ddim_step(d, s, x, t); });
}

ImageTensor ddim_sample(const Denoiser& d, const NoiseSchedule& s, const ImageTensor& initial) {
  check_denoiser_shape(d, initial);
  return run_chain(s, initial, nullptr,
                   [&](const ImageTensor& x, int t) { return ddim_step(d, s, x, t); });
}

}  // namespace chromadiff
