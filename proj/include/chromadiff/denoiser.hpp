#pragma once

#include <cstddef>

#include "chromadiff/schedule.hpp"
#include "chromadiff/tensor.hpp"

namespace chromadiff {

/// Epsilon-prediction model driving the reverse process. Implementations
/// are pure given fixed parameters and safe for concurrent callers.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual ImageTensor predict_epsilon(const ImageTensor& x_t, int t) const = 0;
  virtual std::size_t image_height() const = 0;
  virtual std::size_t image_width() const = 0;
};

/// Bayes-optimal epsilon predictor when the data distribution is
/// N(mu0, sigma0^2 I). Affine in x_t for every fixed t.
class GaussianOracleDenoiser final : public Denoiser {
 public:
  GaussianOracleDenoiser(ImageTensor mu0, double sigma0, NoiseSchedule schedule);

  ImageTensor predict_epsilon(const ImageTensor& x_t, int t) const override;
  std::size_t image_height() const override { return mu0_.height(); }
  std::size_t image_width() const override { return mu0_.width(); }

  /// E[x0 | x_t].
  ImageTensor posterior_mean(const ImageTensor& x_t, int t) const;
  /// d eps_hat / d x_t, identical for every pixel.
  double epsilon_slope(int t) const;

  const ImageTensor& mu0() const noexcept { return mu0_; }
  double sigma0() const noexcept { return sigma0_; }
  const NoiseSchedule& schedule() const noexcept { return schedule_; }

 private:
  double posterior_gain(int t) const;

  ImageTensor mu0_;
  double sigma0_;
  NoiseSchedule schedule_;
};

}  // namespace chromadiff
