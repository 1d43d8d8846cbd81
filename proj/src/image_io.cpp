#include "chromadiff/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "chromadiff/errors.hpp"

namespace chromadiff {

std::uint8_t to_display(double v) noexcept {
  if (std::isnan(v)) return 0;
  const double scaled = std::round(255.0 * (v + 1.0) / 2.0);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

double from_display(std::uint8_t b) noexcept { return 2.0 * static_cast<double>(b) / 255.0 - 1.0; }

Rgb8Image to_rgb8(const ImageTensor& img) {
  Rgb8Image out{img.height(), img.width(), {}};
  out.bytes.resize(img.size());
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        out.bytes[(y * img.width() + x) * 3 + c] = to_display(img.at(c, y, x));
      }
    }
  }
  return out;
}

ImageTensor from_rgb8(const Rgb8Image& img) {
  ImageTensor out(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        out.at(c, y, x) = from_display(img.bytes[(y * img.width + x) * 3 + c]);
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_ppm(const Rgb8Image& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.bytes.begin(), img.bytes.end());
  return out;
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::vector<std::uint8_t>& b, std::size_t& pos) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < b.size() && !std::isspace(b[pos])) tok.push_back(static_cast<char>(b[pos++]));
  return tok;
}

}  // namespace

Rgb8Image decode_ppm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P6") throw IoError("<buffer>", "not a binary PPM (P6)");
  Rgb8Image img;
  try {
    img.width = std::stoul(next_token(bytes, pos));
    img.height = std::stoul(next_token(bytes, pos));
    if (std::stoul(next_token(bytes, pos)) != 255) {
      throw IoError("<buffer>", "only maxval 255 PPM files are supported");
    }
  } catch (const std::logic_error&) {
    throw IoError("<buffer>", "malformed PPM header");
  }
  ++pos;  // single whitespace byte after maxval
  const std::size_t n = img.width * img.height * 3;
  if (pos + n != bytes.size()) throw IoError("<buffer>", "PPM pixel data has wrong length");
  img.bytes.assign(bytes.begin() + static_cast<long>(pos), bytes.end());
  return img;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string(), "cannot open file for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(is), {});
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(path.string(), "cannot open file for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError(path.string(), "write failed");
}

void write_ppm(const ImageTensor& img, const std::filesystem::path& path) {
  if (!img.all_finite()) throw ContractError("write_ppm: image has non-finite values");
  write_file_bytes(path, encode_ppm(to_rgb8(img)));
}

Rgb8Image read_ppm(const std::filesystem::path& path) {
  try {
    return decode_ppm(read_file_bytes(path));
  } catch (const IoError& e) {
    if (e.path() == "<buffer>") throw IoError(path.string(), e.what());
    throw;
  }
}

}  // namespace chromadiff
