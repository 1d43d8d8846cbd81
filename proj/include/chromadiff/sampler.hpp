#pragma once

#include <cstddef>
#include <cstdint>

#include "chromadiff/denoiser.hpp"
#include "chromadiff/schedule.hpp"
#include "chromadiff/tensor.hpp"

namespace chromadiff {

/// Constant per-channel color; plane c of the materialized mask is rgb[c].
struct ColorMask {
  Rgb rgb{0.0, 0.0, 0.0};

  /// Throws ConfigError unless every component is in [0, 1].
  void validate() const;
  ImageTensor materialize(std::size_t height, std::size_t width) const;

  friend bool operator==(const ColorMask&, const ColorMask&) = default;
};

enum class InjectionPlacement {
  kBeforeDenoiser,  // added to x_t before the denoiser sees it
  kAfterStep,       // added to the step output x_{t-1}
};

/// Adds s_noise * mask during 1-based denoising steps
/// [window_first, window_last]; step j = 1 is the one at t = T - 1.
struct InjectionConfig {
  double s_noise = 0.01;
  ColorMask mask;
  int window_first = 1;
  int window_last = 10;
  InjectionPlacement placement = InjectionPlacement::kBeforeDenoiser;

  void validate(int total_steps) const;
  bool active_at(int denoising_step) const noexcept {
    return s_noise != 0.0 && denoising_step >= window_first && denoising_step <= window_last;
  }
};

/// Seeded source of the initial noise and the per-step ancestral noise.
/// Every tensor is a pure function of (seed, role, step).
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) noexcept : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  ImageTensor initial(std::size_t height, std::size_t width) const;
  /// z used by the reverse step at index t.
  ImageTensor step_noise(int t, std::size_t height, std::size_t width) const;

 private:
  std::uint64_t seed_;
};

/// x_{t-1} = (x_t - beta_t / sqrt(1 - alpha_bar_t) eps_hat) / sqrt(alpha_t)
///           + sqrt(beta_tilde_t) z,   with the z term dropped at t = 0.
ImageTensor ancestral_step(const Denoiser& d, const NoiseSchedule& s, const ImageTensor& x_t,
                           int t, const ImageTensor& z);

/// Zero-extra-noise update:
/// x_{t-1} = sqrt(alpha_bar_{t-1}) x0_hat + sqrt(1 - alpha_bar_{t-1}) eps_hat.
ImageTensor ddim_step(const Denoiser& d, const NoiseSchedule& s, const ImageTensor& x_t, int t);

/// Ancestral sampling from t = T-1 down to 0 with color injection.
ImageTensor sample(const Denoiser& d, const NoiseSchedule& s, const NoiseStream& stream,
                   const InjectionConfig& inj);
/// Ancestral sampling without any injection logic.
ImageTensor sample(const Denoiser& d, const NoiseSchedule& s, const NoiseStream& stream);

ImageTensor ddim_sample(const Denoiser& d, const NoiseSchedule& s, const ImageTensor& initial,
                        const InjectionConfig& inj);
ImageTensor ddim_sample(const Denoiser& d, const NoiseSchedule& s, const ImageTensor& initial);

}  // namespace chromadiff
