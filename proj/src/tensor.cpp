#include "chromadiff/tensor.hpp"

#include <cmath>
#include <string>

#include "chromadiff/errors.hpp"

namespace chromadiff {

ImageTensor::ImageTensor(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), values_(kChannels * height * width, fill) {}

ImageTensor ImageTensor::constant(std::size_t height, std::size_t width, const Rgb& rgb) {
  ImageTensor out(height, width);
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (double& v : out.plane(c)) v = rgb[c];
  }
  return out;
}

std::span<double> ImageTensor::plane(std::size_t c) {
  return std::span<double>(values_).subspan(c * plane_size(), plane_size());
}

std::span<const double> ImageTensor::plane(std::size_t c) const {
  return std::span<const double>(values_).subspan(c * plane_size(), plane_size());
}

bool ImageTensor::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

ImageTensor& ImageTensor::operator+=(const ImageTensor& other) {
  require_same_shape(*this, other, "tensor addition");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

ImageTensor& ImageTensor::operator-=(const ImageTensor& other) {
  require_same_shape(*this, other, "tensor subtraction");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

ImageTensor& ImageTensor::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

ImageTensor operator+(ImageTensor a, const ImageTensor& b) { return a += b; }
ImageTensor operator-(ImageTensor a, const ImageTensor& b) { return a -= b; }
ImageTensor operator*(double s, ImageTensor a) { return a *= s; }

void require_same_shape(const ImageTensor& a, const ImageTensor& b, std::string_view what) {
  if (!a.same_shape(b)) {
    throw ContractError(std::string(what) + ": shape mismatch (3x" + std::to_string(a.height()) +
                        "x" + std::to_string(a.width()) + " vs 3x" + std::to_string(b.height()) +
                        "x" + std::to_string(b.width()) + ")");
  }
}

double l2_norm(const ImageTensor& a) {
  double sum = 0.0;
  for (double v : a.values()) sum += v * v;
  return std::sqrt(sum);
}

double rms_distance(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "rms_distance");
  if (a.empty()) return 0.0;
  double sum = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(av.size()));
}

}  // namespace chromadiff
