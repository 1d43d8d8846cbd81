#include "chromadiff/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "chromadiff/errors.hpp"

namespace chromadiff {

Rgb mean_color(const Rgb8Image& img) {
  Rgb sum{0.0, 0.0, 0.0};
  const std::size_t pixels = img.width * img.height;
  if (pixels == 0) return sum;
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::size_t c = 0; c < 3; ++c) sum[c] += img.bytes[3 * p + c];
  }
  for (double& s : sum) s /= 255.0 * static_cast<double>(pixels);
  return sum;
}

Rgb mean_color(const ImageTensor& img) { return mean_color(to_rgb8(img)); }

std::vector<double> continuity_profile(const std::vector<ImageTensor>& images) {
  if (images.size() < 2) throw ContractError("continuity_profile needs at least 2 frames");
  std::vector<double> out;
  out.reserve(images.size() - 1);
  for (std::size_t i = 1; i < images.size(); ++i) {
    out.push_back(rms_distance(images[i - 1], images[i]));
  }
  return out;
}

std::vector<double> continuity_profile(const std::vector<FrameRecord>& frames) {
  if (frames.size() < 2) throw ContractError("continuity_profile needs at least 2 frames");
  std::vector<double> out;
  out.reserve(frames.size() - 1);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    out.push_back(rms_distance(frames[i - 1].image, frames[i].image));
  }
  return out;
}

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) throw ContractError("pearson: size mismatch");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::array<std::optional<double>, 3> color_correlation(const std::vector<FrameRecord>& frames) {
  if (frames.size() < 3) throw ContractError("color_correlation needs at least 3 frames");
  std::array<std::optional<double>, 3> out;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> injected, observed;
    for (const auto& f : frames) {
      injected.push_back(f.injected[c]);
      observed.push_back(f.mean_rgb[c]);
    }
    out[c] = pearson(injected, observed);
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractError("median of an empty sequence");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace chromadiff
