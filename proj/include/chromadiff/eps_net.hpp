#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "chromadiff/denoiser.hpp"
#include "chromadiff/kernels.hpp"

namespace chromadiff {

struct EpsNetShape {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t time_width = 8;
  std::vector<std::size_t> hidden{128, 128};
  int steps = 1000;  // T; the time feature is built from t / T

  std::size_t image_size() const noexcept { return ImageTensor::kChannels * height * width; }
  std::size_t input_size() const noexcept { return image_size() + time_width; }
  friend bool operator==(const EpsNetShape&, const EpsNetShape&) = default;
};

/// Fully-connected epsilon predictor:
///
///   h_0 = [x_t, emb(t)]
///   h_k = silu(W_k h_{k-1} + b_k)          for each hidden layer
///   eps = W_out h_L + b_out + g(t) * x_t,  g(t) = v . [emb(t), 1]
///
/// The gate g(t) is a learned scalar skip connection so the network can pass
/// x_t through at high noise levels without squeezing it through the hidden
/// bottleneck. All parameters live in one flat vector: each layer's weights
/// (row-major, out x in) followed by its biases, then the gate vector.
class SmallEpsNet final : public Denoiser {
 public:
  /// All parameters zero.
  explicit SmallEpsNet(EpsNetShape shape);
  /// LeCun-normal weights from a seeded counter stream, zero biases and gate.
  static SmallEpsNet initialized(EpsNetShape shape, std::uint64_t seed);

  ImageTensor predict_epsilon(const ImageTensor& x_t, int t) const override;
  std::size_t image_height() const override { return shape_.height; }
  std::size_t image_width() const override { return shape_.width; }

  const EpsNetShape& shape() const noexcept { return shape_; }
  /// [input, hidden..., output].
  std::vector<std::size_t> layer_sizes() const;
  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  std::vector<double> time_embedding(int t) const;

  void set_backend(Backend be) noexcept { backend_ = be; }
  Backend backend() const noexcept { return backend_; }

  /// Scratch buffers for one forward/backward pass.
  struct Workspace {
    std::vector<std::vector<double>> pre;   // pre-activations per layer
    std::vector<std::vector<double>> post;  // layer inputs (h_0 .. h_L)
    std::vector<double> out;
    std::vector<double> delta;
    std::vector<double> delta_next;
  };

  /// Adds weight * d/dparams sum_i (eps_hat_i - eps_i)^2 into `grad` and
  /// returns the un-weighted sum of squared errors.
  double accumulate_gradient(const ImageTensor& x_t, int t, const ImageTensor& eps,
                             double weight, std::span<double> grad, Workspace& ws) const;

  void save(const std::filesystem::path& path) const;
  static SmallEpsNet load(const std::filesystem::path& path);

 private:
  struct LayerView {
    std::size_t in;
    std::size_t out;
    std::size_t weight_offset;
    std::size_t bias_offset;
  };

  void forward(const ImageTensor& x_t, int t, Workspace& ws) const;
  void check_input(const ImageTensor& x_t, int t) const;

  EpsNetShape shape_;
  std::vector<LayerView> layers_;
  std::size_t gate_offset_ = 0;
  std::vector<double> params_;
  Backend backend_ = default_backend();
};

}  // namespace chromadiff
