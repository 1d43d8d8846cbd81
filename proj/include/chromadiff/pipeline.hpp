#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chromadiff/analysis.hpp"
#include "chromadiff/config.hpp"
#include "chromadiff/denoiser.hpp"
#include "chromadiff/kernels.hpp"

namespace chromadiff {

/// Builds the denoiser selected by the run configuration.
std::unique_ptr<Denoiser> make_denoiser(const RunConfig& cfg, const NoiseSchedule& schedule);

/// The injection colors for a run: the path sampled at cfg.frames points
/// (a single frame uses the path start).
std::vector<Rgb> sweep_colors(const RunConfig& cfg);

/// Renders one frame per color with a common noise stream; only the mask
/// differs between frames. Frames are independent and may be computed on
/// several threads; results are ordered by index either way.
std::vector<FrameRecord> render_sequence(const Denoiser& d, const NoiseSchedule& s,
                                         const std::vector<Rgb>& colors,
                                         const InjectionConfig& injection, SamplerMode mode,
                                         std::uint64_t seed, Backend backend);

/// In-memory generation (no files).
std::vector<FrameRecord> generate_sequence(const RunConfig& cfg);

std::string frame_file_name(std::size_t index);
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);

struct ManifestFrame {
  std::size_t index = 0;
  Rgb injected{};
  Rgb mean_rgb{};
  std::optional<double> distance_to_previous;
  std::string sha256;
  std::string file;
};

struct Manifest {
  std::string timestamp;
  bool complete = true;
  std::optional<std::size_t> failed_frame;
  std::size_t frames_expected = 0;
  ConfigFile config;
  std::vector<ManifestFrame> frames;
};

inline constexpr const char* kManifestHeader = "chromadiff-manifest 1";
inline constexpr const char* kManifestName = "manifest.txt";

/// Frame rows carry model-space images only in memory; the manifest stores
/// the file hash of each written PPM.
void write_manifest(const RunConfig& cfg, const std::vector<ManifestFrame>& frames,
                    const std::filesystem::path& path, bool complete = true,
                    std::optional<std::size_t> failed_frame = std::nullopt);
Manifest read_manifest(const std::filesystem::path& path);

struct GenerateResult {
  std::vector<FrameRecord> frames;
  std::filesystem::path manifest;
};

/// Full `generate` run: renders, writes frame_NNNN.ppm files and the
/// manifest into cfg.output_dir. If a frame fails, frames before it are
/// kept, the manifest is marked incomplete, and the fault is rethrown.
GenerateResult run_generate(const RunConfig& cfg);

struct AnalysisReport {
  std::vector<Rgb> injected;
  std::vector<Rgb> mean_rgb;
  std::vector<double> continuity;
  std::array<std::optional<double>, 3> correlation;
  bool hashes_match = true;
  std::vector<std::string> mismatched_files;
};

/// Recomputes metrics from the PPM files listed in a frames directory's
/// manifest.
AnalysisReport analyze_directory(const std::filesystem::path& dir);
std::string format_report(const AnalysisReport& report);

}  // namespace chromadiff
