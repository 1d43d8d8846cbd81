#include "chromadiff/pipeline.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <sstream>

#include "chromadiff/color_paths.hpp"
#include "chromadiff/errors.hpp"
#include "chromadiff/eps_net.hpp"
#include "chromadiff/image_io.hpp"
#include "chromadiff/sampler.hpp"

namespace chromadiff {

std::unique_ptr<Denoiser> make_denoiser(const RunConfig& cfg, const NoiseSchedule& schedule) {
  if (cfg.denoiser == DenoiserKind::kOracle) {
    return std::make_unique<GaussianOracleDenoiser>(
        ImageTensor::constant(cfg.height, cfg.width, cfg.oracle_mean), cfg.oracle_sigma, schedule);
  }
  auto net = std::make_unique<SmallEpsNet>(SmallEpsNet::load(cfg.checkpoint));
  if (net->shape().steps != schedule.steps()) {
    throw ConfigError("checkpoint was trained for T=" + std::to_string(net->shape().steps) +
                      " but schedule.T=" + std::to_string(schedule.steps()));
  }
  return net;
}

std::vector<Rgb> sweep_colors(const RunConfig& cfg) {
  if (cfg.frames == 1) return {cfg.path.start};
  return sample_path(build_path(cfg.path, cfg.path_dt), cfg.frames);
}

namespace {

struct RenderOutcome {
  std::vector<FrameRecord> frames;  // contiguous prefix that succeeded
  std::optional<std::size_t> failed;
  std::exception_ptr error;
};

FrameRecord render_frame(const Denoiser& d, const NoiseSchedule& s, const Rgb& color,
                         const InjectionConfig& tmpl, SamplerMode mode, std::uint64_t seed,
                         std::size_t index) {
  InjectionConfig inj = tmpl;
  inj.mask.rgb = color;
  const NoiseStream stream(seed);
  FrameRecord rec;
  rec.index = index;
  rec.injected = color;
  rec.image = mode == SamplerMode::kAncestral
                  ? sample(d, s, stream, inj)
                  : ddim_sample(d, s, stream.initial(d.image_height(), d.image_width()), inj);
  rec.mean_rgb = mean_color(rec.image);
  return rec;
}

RenderOutcome render_all(const Denoiser& d, const NoiseSchedule& s, const std::vector<Rgb>& colors,
                         const InjectionConfig& injection, SamplerMode mode, std::uint64_t seed,
                         Backend backend) {
  const auto n = static_cast<long>(colors.size());
  std::vector<std::optional<FrameRecord>> slots(colors.size());
  std::vector<std::exception_ptr> errors(colors.size());
  auto one = [&](long i) {
    try {
      slots[i] = render_frame(d, s, colors[i], injection, mode, seed, static_cast<std::size_t>(i));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (backend == Backend::kOpenMP) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long i = 0; i < n; ++i) one(i);
  } else {
    for (long i = 0; i < n; ++i) {
      one(i);
      if (errors[i]) break;
    }
  }

  RenderOutcome out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (errors[i] || !slots[i]) {
      out.failed = i;
      out.error = errors[i];
      break;
    }
    FrameRecord rec = std::move(*slots[i]);
    if (i > 0) rec.distance_to_previous = rms_distance(out.frames.back().image, rec.image);
    out.frames.push_back(std::move(rec));
  }
  return out;
}

[[noreturn]] void rethrow_frame_failure(std::size_t index, const std::exception_ptr& error) {
  const std::string where = "frame " + std::to_string(index);
  try {
    std::rethrow_exception(error);
  } catch (const NumericalFault& e) {
    throw NumericalFault(where, static_cast<long>(index), where + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(e.path(), where + ": " + e.what());
  }
}

}  // namespace

std::vector<FrameRecord> render_sequence(const Denoiser& d, const NoiseSchedule& s,
                                         const std::vector<Rgb>& colors,
                                         const InjectionConfig& injection, SamplerMode mode,
                                         std::uint64_t seed, Backend backend) {
  injection.validate(s.steps());
  for (const Rgb& c : colors) ColorMask{c}.validate();
  RenderOutcome out = render_all(d, s, colors, injection, mode, seed, backend);
  if (out.failed) rethrow_frame_failure(*out.failed, out.error);
  return std::move(out.frames);
}

std::vector<FrameRecord> generate_sequence(const RunConfig& cfg) {
  cfg.validate();
  const NoiseSchedule schedule = build_linear_schedule(cfg.schedule);
  const auto denoiser = make_denoiser(cfg, schedule);
  return render_sequence(*denoiser, schedule, sweep_colors(cfg), cfg.injection, cfg.mode, cfg.seed,
                         cfg.parallel ? Backend::kOpenMP : Backend::kSerial);
}

std::string frame_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04zu.ppm", index);
  return buf;
}

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(line);
  while (std::getline(is, item, ',')) out.push_back(item);
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw IoError(path.string(), "malformed number '" + s + "' in manifest");
  }
}

}  // namespace

// Layout:
//   chromadiff-manifest 1
//   timestamp = <UTC>
//   status = complete | incomplete
//   failed_frame = <index> | -
//   frames_expected = N
//   frames_written = M
//   [config]
//   section.key = value            (canonical run configuration)
//   [frames]
//   index,inj_r,inj_g,inj_b,mean_r,mean_g,mean_b,dist_prev,sha256,file
//   ...one row per written frame
void write_manifest(const RunConfig& cfg, const std::vector<ManifestFrame>& frames,
                    const std::filesystem::path& path, bool complete,
                    std::optional<std::size_t> failed_frame) {
  std::ostringstream os;
  os << kManifestHeader << "\n";
  os << "timestamp = " << utc_timestamp() << "\n";
  os << "status = " << (complete ? "complete" : "incomplete") << "\n";
  os << "failed_frame = " << (failed_frame ? std::to_string(*failed_frame) : "-") << "\n";
  os << "frames_expected = " << cfg.frames << "\n";
  os << "frames_written = " << frames.size() << "\n";
  os << "[config]\n" << cfg.to_config().serialize_flat();
  os << "[frames]\n";
  os << "index,inj_r,inj_g,inj_b,mean_r,mean_g,mean_b,dist_prev,sha256,file\n";
  for (const auto& f : frames) {
    os << f.index;
    for (double v : f.injected) os << "," << format_real(v);
    for (double v : f.mean_rgb) os << "," << format_real(v);
    os << "," << (f.distance_to_previous ? format_real(*f.distance_to_previous) : "-");
    os << "," << f.sha256 << "," << f.file << "\n";
  }
  const std::string text = os.str();
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError(path.string(), "cannot open manifest");
  std::string line;
  if (!std::getline(is, line) || line != kManifestHeader) {
    throw IoError(path.string(), "unrecognized manifest header");
  }
  Manifest m;
  enum class Part { kHead, kConfig, kFrames } part = Part::kHead;
  bool saw_table_header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line == "[config]") {
      part = Part::kConfig;
      continue;
    }
    if (line == "[frames]") {
      part = Part::kFrames;
      continue;
    }
    if (part == Part::kFrames) {
      if (!saw_table_header) {
        saw_table_header = true;
        continue;
      }
      const auto cols = split_csv(line);
      if (cols.size() != 10) throw IoError(path.string(), "malformed frame row: " + line);
      ManifestFrame f;
      f.index = static_cast<std::size_t>(std::stoul(cols[0]));
      for (std::size_t c = 0; c < 3; ++c) {
        f.injected[c] = parse_double(cols[1 + c], path);
        f.mean_rgb[c] = parse_double(cols[4 + c], path);
      }
      if (cols[7] != "-") f.distance_to_previous = parse_double(cols[7], path);
      f.sha256 = cols[8];
      f.file = cols[9];
      m.frames.push_back(std::move(f));
      continue;
    }
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw IoError(path.string(), "malformed manifest line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 3);
    if (part == Part::kConfig) {
      m.config.set(key, value);
    } else if (key == "timestamp") {
      m.timestamp = value;
    } else if (key == "status") {
      m.complete = value == "complete";
    } else if (key == "failed_frame") {
      if (value != "-") m.failed_frame = std::stoul(value);
    } else if (key == "frames_expected") {
      m.frames_expected = std::stoul(value);
    }
  }
  return m;
}

GenerateResult run_generate(const RunConfig& cfg) {
  cfg.validate();
  const NoiseSchedule schedule = build_linear_schedule(cfg.schedule);
  const auto denoiser = make_denoiser(cfg, schedule);
  const auto colors = sweep_colors(cfg);

  const std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create output directory");

  RenderOutcome out = render_all(*denoiser, schedule, colors, cfg.injection, cfg.mode, cfg.seed,
                                 cfg.parallel ? Backend::kOpenMP : Backend::kSerial);

  std::vector<ManifestFrame> rows;
  for (const auto& rec : out.frames) {
    const std::string name = frame_file_name(rec.index);
    const auto bytes = encode_ppm(to_rgb8(rec.image));
    write_file_bytes(dir / name, bytes);
    rows.push_back({rec.index, rec.injected, rec.mean_rgb, rec.distance_to_previous,
                    sha256_hex(bytes), name});
  }
  const auto manifest = dir / kManifestName;
  write_manifest(cfg, rows, manifest, !out.failed, out.failed);
  if (out.failed) rethrow_frame_failure(*out.failed, out.error);
  return {std::move(out.frames), manifest};
}

AnalysisReport analyze_directory(const std::filesystem::path& dir) {
  const Manifest m = read_manifest(dir / kManifestName);
  AnalysisReport report;
  std::vector<ImageTensor> images;
  std::vector<FrameRecord> records;
  for (const auto& row : m.frames) {
    const auto bytes = read_file_bytes(dir / row.file);
    if (sha256_hex(bytes) != row.sha256) {
      report.hashes_match = false;
      report.mismatched_files.push_back(row.file);
    }
    Rgb8Image img;
    try {
      img = decode_ppm(bytes);
    } catch (const IoError& e) {
      throw IoError((dir / row.file).string(), e.what());
    }
    FrameRecord rec;
    rec.index = row.index;
    rec.injected = row.injected;
    rec.mean_rgb = mean_color(img);
    rec.image = from_rgb8(img);
    report.injected.push_back(rec.injected);
    report.mean_rgb.push_back(rec.mean_rgb);
    records.push_back(std::move(rec));
  }
  if (records.size() >= 2) report.continuity = continuity_profile(records);
  if (records.size() >= 3) report.correlation = color_correlation(records);
  return report;
}

std::string format_report(const AnalysisReport& r) {
  std::ostringstream os;
  os << "frames = " << r.mean_rgb.size() << "\n";
  os << "hashes_match = " << (r.hashes_match ? "true" : "false") << "\n";
  for (const auto& f : r.mismatched_files) os << "hash_mismatch = " << f << "\n";
  static constexpr const char* kNames[] = {"r", "g", "b"};
  for (std::size_t c = 0; c < 3; ++c) {
    os << "correlation_" << kNames[c] << " = "
       << (r.correlation[c] ? format_real(*r.correlation[c]) : "undefined") << "\n";
  }
  if (!r.continuity.empty()) {
    os << "continuity_median = " << format_real(median(r.continuity)) << "\n";
    double mx = 0.0;
    for (double d : r.continuity) mx = std::max(mx, d);
    os << "continuity_max = " << format_real(mx) << "\n";
  }
  os << "index,inj_r,inj_g,inj_b,mean_r,mean_g,mean_b,dist_prev\n";
  for (std::size_t i = 0; i < r.mean_rgb.size(); ++i) {
    os << i;
    for (double v : r.injected[i]) os << "," << format_real(v);
    for (double v : r.mean_rgb[i]) os << "," << format_real(v);
    os << "," << (i > 0 ? format_real(r.continuity[i - 1]) : "-") << "\n";
  }
  return os.str();
}

}  // namespace chromadiff
