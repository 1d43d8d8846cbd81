#include "chromadiff/toy_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "chromadiff/errors.hpp"
#include "chromadiff/image_io.hpp"
#include "chromadiff/rng.hpp"

namespace chromadiff {

GaussianDataset::GaussianDataset(ImageTensor mu0, double sigma0, std::uint64_t seed)
    : mu0_(std::move(mu0)), sigma0_(sigma0), seed_(seed) {
  if (!(sigma0_ > 0.0) || !std::isfinite(sigma0_)) {
    throw ConfigError("gaussian dataset sigma0 must be positive, got " + std::to_string(sigma0_));
  }
  if (mu0_.empty()) throw ConfigError("gaussian dataset mean image is empty");
}

ImageTensor GaussianDataset::sample(std::uint64_t index) const {
  const CounterRng rng(seed_, index);
  ImageTensor out = mu0_;
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += sigma0_ * rng.normal(i);
  return out;
}

BlobFaceDataset::BlobFaceDataset(std::size_t height, std::size_t width, std::uint64_t seed,
                                 double jitter)
    : height_(height), width_(width), seed_(seed), jitter_(jitter) {
  if (height_ < 8 || width_ < 8) {
    throw ConfigError("blob-face canvas must be at least 8x8, got " + std::to_string(height_) +
                      "x" + std::to_string(width_));
  }
  if (!(jitter_ >= 0.0) || !std::isfinite(jitter_)) {
    throw ConfigError("blob-face jitter must be >= 0");
  }
}

namespace {

// Smooth coverage in [0, 1]: 1 well inside (signed distance > 0), 0 outside.
double coverage(double signed_distance, double softness) {
  return 1.0 / (1.0 + std::exp(-signed_distance / softness));
}

void blend(Rgb& pixel, const Rgb& color, double weight) {
  for (std::size_t c = 0; c < 3; ++c) pixel[c] += weight * (color[c] - pixel[c]);
}

}  // namespace

ImageTensor BlobFaceDataset::sample(std::uint64_t index) const {
  const CounterRng rng(seed_, index);
  std::uint64_t draw = 0;
  auto jit = [&](double scale) { return jitter_ * scale * rng.normal(draw++); };

  const Rgb background{-0.70 + jit(0.08), -0.72 + jit(0.08), -0.55 + jit(0.08)};
  const double tone = jit(0.12);
  const Rgb skin{0.70 + tone + jit(0.05), 0.30 + tone + jit(0.05), 0.05 + tone + jit(0.05)};
  const Rgb eye_color{-0.85 + jit(0.05), -0.80 + jit(0.05), -0.60 + jit(0.08)};
  const Rgb mouth_color{0.25 + jit(0.08), -0.65 + jit(0.05), -0.55 + jit(0.05)};

  const double cx = 0.5 + jit(0.03);
  const double cy = 0.5 + jit(0.03);
  const double face_r = 0.36 + jit(0.025);
  const double eye_y = cy - 0.09 + jit(0.015);
  const double left_eye_x = cx - (0.13 + jit(0.015));
  const double right_eye_x = cx + (0.13 + jit(0.015));
  const double eye_r = 0.055 + jit(0.008);
  const double mouth_r = 0.17 + jit(0.015);
  const double mouth_cy = cy + jit(0.015);
  const double mouth_half_width = 0.022;

  const double softness = 0.5 / static_cast<double>(std::min(height_, width_));
  ImageTensor out(height_, width_);
  for (std::size_t y = 0; y < height_; ++y) {
    const double py = (static_cast<double>(y) + 0.5) / static_cast<double>(height_);
    for (std::size_t x = 0; x < width_; ++x) {
      const double px = (static_cast<double>(x) + 0.5) / static_cast<double>(width_);
      Rgb pixel = background;
      blend(pixel, skin, coverage(face_r - std::hypot(px - cx, py - cy), softness));
      blend(pixel, eye_color,
            coverage(eye_r - std::hypot(px - left_eye_x, py - eye_y), softness));
      blend(pixel, eye_color,
            coverage(eye_r - std::hypot(px - right_eye_x, py - eye_y), softness));
      // Lower arc of a circle, restricted to below the mouth centre line.
      const double ring = mouth_half_width - std::abs(std::hypot(px - cx, py - mouth_cy) - mouth_r);
      const double lower = coverage(py - (mouth_cy + 0.08), softness);
      blend(pixel, mouth_color, coverage(ring, softness) * lower);
      for (std::size_t c = 0; c < 3; ++c) out.at(c, y, x) = std::clamp(pixel[c], -1.0, 1.0);
    }
  }
  return out;
}

TensorDataset::TensorDataset(std::vector<ImageTensor> images) : images_(std::move(images)) {
  if (images_.empty()) throw ConfigError("tensor dataset is empty");
  for (const auto& img : images_) require_same_shape(img, images_.front(), "tensor dataset");
}

ImageTensor TensorDataset::sample(std::uint64_t index) const {
  return images_[index % images_.size()];
}

GaussianDataset gaussian_dataset(ImageTensor mu0, double sigma0, std::uint64_t seed) {
  return GaussianDataset(std::move(mu0), sigma0, seed);
}

BlobFaceDataset blob_faces(std::size_t height, std::size_t width, std::uint64_t seed,
                           double jitter) {
  return BlobFaceDataset(height, width, seed, jitter);
}

void dump_dataset(const Dataset& data, std::size_t count, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory");
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%04zu.ppm", i);
    write_ppm(data.sample(i), dir / name);
  }
}

}  // namespace chromadiff
