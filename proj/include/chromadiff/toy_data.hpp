#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "chromadiff/tensor.hpp"

namespace chromadiff {

/// Seed-deterministic source of equally-shaped images in model space.
class Dataset {
 public:
  virtual ~Dataset() = default;

  virtual ImageTensor sample(std::uint64_t index) const = 0;
  virtual std::size_t height() const = 0;
  virtual std::size_t width() const = 0;
  /// Number of distinct samples, or nullopt for an unbounded generator.
  virtual std::optional<std::size_t> size() const = 0;
};

/// i.i.d. draws mu0 + sigma0 * N(0, I); draw `index` is a pure function of
/// (seed, index).
class GaussianDataset final : public Dataset {
 public:
  GaussianDataset(ImageTensor mu0, double sigma0, std::uint64_t seed);

  ImageTensor sample(std::uint64_t index) const override;
  std::size_t height() const override { return mu0_.height(); }
  std::size_t width() const override { return mu0_.width(); }
  std::optional<std::size_t> size() const override { return std::nullopt; }

 private:
  ImageTensor mu0_;
  double sigma0_;
  std::uint64_t seed_;
};

/// Procedural face-like images: a skin-tone disc on a dark background, two
/// eye blobs and a mouth arc, with soft edges. Geometry and colors are
/// jittered per sample; jitter = 0 makes every sample identical.
class BlobFaceDataset final : public Dataset {
 public:
  BlobFaceDataset(std::size_t height, std::size_t width, std::uint64_t seed, double jitter = 1.0);

  ImageTensor sample(std::uint64_t index) const override;
  std::size_t height() const override { return height_; }
  std::size_t width() const override { return width_; }
  std::optional<std::size_t> size() const override { return std::nullopt; }

 private:
  std::size_t height_;
  std::size_t width_;
  std::uint64_t seed_;
  double jitter_;
};

/// A fixed, finite list of images (index taken modulo the count).
class TensorDataset final : public Dataset {
 public:
  explicit TensorDataset(std::vector<ImageTensor> images);

  ImageTensor sample(std::uint64_t index) const override;
  std::size_t height() const override { return images_.front().height(); }
  std::size_t width() const override { return images_.front().width(); }
  std::optional<std::size_t> size() const override { return images_.size(); }

 private:
  std::vector<ImageTensor> images_;
};

GaussianDataset gaussian_dataset(ImageTensor mu0, double sigma0, std::uint64_t seed = 0);
BlobFaceDataset blob_faces(std::size_t height, std::size_t width, std::uint64_t seed,
                           double jitter = 1.0);

/// Writes samples 0..count-1 as sample_NNNN.ppm into `dir`.
void dump_dataset(const Dataset& data, std::size_t count, const std::filesystem::path& dir);

}  // namespace chromadiff
