#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "chromadiff/image_io.hpp"
#include "chromadiff/tensor.hpp"

namespace chromadiff {

struct FrameRecord {
  std::size_t index = 0;
  Rgb injected{};
  ImageTensor image;
  Rgb mean_rgb{};
  std::optional<double> distance_to_previous;  // empty for frame 0
};

/// Per-channel mean in display space, scaled to [0, 1].
Rgb mean_color(const ImageTensor& img);
Rgb mean_color(const Rgb8Image& img);

/// Model-space RMS distance between each adjacent pair of frames.
std::vector<double> continuity_profile(const std::vector<FrameRecord>& frames);
std::vector<double> continuity_profile(const std::vector<ImageTensor>& images);

/// Pearson correlation between injected channel value and mean output
/// channel value. A channel whose injected or output values do not vary is
/// reported as nullopt.
std::array<std::optional<double>, 3> color_correlation(const std::vector<FrameRecord>& frames);

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);
double median(std::vector<double> values);

}  // namespace chromadiff
