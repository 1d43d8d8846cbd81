#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "chromadiff/tensor.hpp"

namespace chromadiff {

/// 8-bit interleaved RGB image in display space.
struct Rgb8Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bytes;  // height * width * 3, row-major, RGB

  friend bool operator==(const Rgb8Image&, const Rgb8Image&) = default;
};

/// Model value v in [-1, 1] to round(255 (v + 1) / 2), clamped to 0..255.
std::uint8_t to_display(double v) noexcept;
/// Inverse of to_display on its range: 2 b / 255 - 1.
double from_display(std::uint8_t b) noexcept;

Rgb8Image to_rgb8(const ImageTensor& img);
ImageTensor from_rgb8(const Rgb8Image& img);

/// Binary PPM: "P6\n<W> <H>\n255\n" followed by W*H RGB triples.
std::vector<std::uint8_t> encode_ppm(const Rgb8Image& img);
Rgb8Image decode_ppm(const std::vector<std::uint8_t>& bytes);

void write_ppm(const ImageTensor& img, const std::filesystem::path& path);
Rgb8Image read_ppm(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace chromadiff
