#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chromadiff/color_paths.hpp"
#include "chromadiff/sampler.hpp"
#include "chromadiff/schedule.hpp"
#include "chromadiff/training.hpp"

namespace chromadiff {

/// Flat key = value text with [section] headers. Keys are addressed as
/// "section.key". '#' starts a comment; blank lines are ignored. Entry order
/// is preserved.
class ConfigFile {
 public:
  static ConfigFile parse(std::string_view text);
  static ConfigFile load(const std::filesystem::path& path);

  /// Sectioned text; parse(serialize()) reproduces every entry exactly.
  std::string serialize() const;
  /// One "section.key = value" line per entry.
  std::string serialize_flat() const;

  void set(const std::string& dotted_key, const std::string& value);
  /// Applies "section.key=value".
  void apply_override(std::string_view assignment);
  bool contains(const std::string& dotted_key) const;
  std::optional<std::string> get(const std::string& dotted_key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept {
    return entries_;
  }

  friend bool operator==(const ConfigFile&, const ConfigFile&) = default;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Typed reads over a ConfigFile that remember which keys were consumed, so
/// misspelled keys can be rejected.
class ConfigReader {
 public:
  explicit ConfigReader(const ConfigFile& file) : file_(file) {}

  std::string text(const std::string& key, const std::string& fallback);
  double real(const std::string& key, double fallback);
  long long integer(const std::string& key, long long fallback);
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback);
  /// Non-negative integer.
  std::size_t count(const std::string& key, std::size_t fallback);
  bool boolean(const std::string& key, bool fallback);
  Rgb rgb(const std::string& key, const Rgb& fallback);
  std::vector<std::size_t> size_list(const std::string& key, const std::vector<std::size_t>& fallback);

  /// Throws ConfigError naming any key that was never read.
  void reject_unknown() const;

 private:
  std::optional<std::string> take(const std::string& key);

  const ConfigFile& file_;
  std::set<std::string> used_;
};

std::string format_real(double v);
std::string format_rgb(const Rgb& v);

enum class DenoiserKind { kOracle, kCheckpoint };
enum class SamplerMode { kAncestral, kDeterministic };

/// Everything `generate` needs; validated as a whole before any work.
struct RunConfig {
  ScheduleParams schedule;
  DenoiserKind denoiser = DenoiserKind::kOracle;
  std::string checkpoint;
  Rgb oracle_mean{0.0, 0.0, 0.0};
  double oracle_sigma = 0.5;
  std::size_t height = 32;  // oracle only; a checkpoint fixes its own size
  std::size_t width = 32;
  PathSpec path;
  double path_dt = 1e-3;
  std::size_t frames = 120;
  InjectionConfig injection;  // mask is replaced per frame
  SamplerMode mode = SamplerMode::kAncestral;
  std::uint64_t seed = 0;
  std::string output_dir = "frames";
  bool parallel = true;

  void validate() const;
  ConfigFile to_config() const;
  static RunConfig from_config(const ConfigFile& file);
};

/// Everything `train` needs.
struct TrainRunConfig {
  ScheduleParams schedule;
  std::string data_kind = "blob_faces";  // blob_faces | gaussian
  std::size_t height = 32;
  std::size_t width = 32;
  std::uint64_t data_seed = 0;
  double jitter = 1.0;
  Rgb gaussian_mean{0.0, 0.0, 0.0};
  double gaussian_sigma = 0.5;
  std::vector<std::size_t> hidden{128, 128};
  std::size_t time_width = 8;
  std::uint64_t init_seed = 0;
  TrainConfig train;
  std::string checkpoint = "model.bin";
  std::string loss_csv = "loss.csv";

  void validate() const;
  ConfigFile to_config() const;
  static TrainRunConfig from_config(const ConfigFile& file);
};

}  // namespace chromadiff
