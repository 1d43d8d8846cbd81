#include "chromadiff/denoiser.hpp"

#include <cmath>
#include <string>

#include "chromadiff/errors.hpp"

namespace chromadiff {

GaussianOracleDenoiser::GaussianOracleDenoiser(ImageTensor mu0, double sigma0,
                                               NoiseSchedule schedule)
    : mu0_(std::move(mu0)), sigma0_(sigma0), schedule_(std::move(schedule)) {
  if (!(sigma0_ > 0.0) || !std::isfinite(sigma0_)) {
    throw ConfigError("oracle sigma0 must be a positive finite value, got " +
                      std::to_string(sigma0_));
  }
  if (mu0_.empty()) throw ConfigError("oracle mean image is empty");
  if (!mu0_.all_finite()) throw ConfigError("oracle mean image has non-finite values");
}

// With a = sqrt(alpha_bar): E[x0 | x_t] = mu0 + gain * (x_t - a mu0),
// gain = a sigma0^2 / (a^2 sigma0^2 + 1 - a^2).
double GaussianOracleDenoiser::posterior_gain(int t) const {
  const double ab = schedule_.alpha_bar(t);
  const double a = std::sqrt(ab);
  const double var = sigma0_ * sigma0_;
  return a * var / (ab * var + (1.0 - ab));
}

double GaussianOracleDenoiser::epsilon_slope(int t) const {
  const double ab = schedule_.alpha_bar(t);
  return (1.0 - std::sqrt(ab) * posterior_gain(t)) / std::sqrt(1.0 - ab);
}

ImageTensor GaussianOracleDenoiser::posterior_mean(const ImageTensor& x_t, int t) const {
  require_same_shape(x_t, mu0_, "oracle posterior_mean");
  const double a = std::sqrt(schedule_.alpha_bar(t));
  const double gain = posterior_gain(t);
  ImageTensor out(x_t.height(), x_t.width());
  auto o = out.values();
  auto x = x_t.values();
  auto m = mu0_.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = m[i] + gain * (x[i] - a * m[i]);
  return out;
}

ImageTensor GaussianOracleDenoiser::predict_epsilon(const ImageTensor& x_t, int t) const {
  const double ab = schedule_.alpha_bar(t);
  const double a = std::sqrt(ab);
  const double inv_noise = 1.0 / std::sqrt(1.0 - ab);
  ImageTensor out = posterior_mean(x_t, t);
  auto o = out.values();
  auto x = x_t.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (x[i] - a * o[i]) * inv_noise;
  return out;
}

}  // namespace chromadiff
