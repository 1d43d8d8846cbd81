#include "chromadiff/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "chromadiff/errors.hpp"

namespace chromadiff {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) parts.emplace_back(trim(item));
  return parts;
}

double parse_real(const std::string& key, std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("'" + key + "': expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

template <typename Int>
Int parse_int(const std::string& key, std::string_view s) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("'" + key + "': expected an integer, got '" + std::string(s) + "'");
  }
  return v;
}

std::pair<std::string, std::string> split_dotted(const std::string& key) {
  const auto dot = key.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == key.size()) {
    throw ConfigError("config key '" + key + "' must have the form section.key");
  }
  return {key.substr(0, dot), key.substr(dot + 1)};
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_rgb(const Rgb& v) {
  return format_real(v[0]) + ", " + format_real(v[1]) + ", " + format_real(v[2]);
}

ConfigFile ConfigFile::parse(std::string_view text) {
  ConfigFile cfg;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    if (section.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": key outside of any [section]");
    }
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    const std::string dotted = section + "." + key;
    if (cfg.contains(dotted)) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + dotted + "'");
    }
    cfg.entries_.emplace_back(dotted, std::string(trim(line.substr(eq + 1))));
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError(path.string(), "cannot open configuration file");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

std::string ConfigFile::serialize() const {
  std::string out;
  std::string current;
  for (const auto& [dotted, value] : entries_) {
    const auto [section, key] = split_dotted(dotted);
    if (section != current) {
      if (!out.empty()) out += "\n";
      out += "[" + section + "]\n";
      current = section;
    }
    out += key + " = " + value + "\n";
  }
  return out;
}

std::string ConfigFile::serialize_flat() const {
  std::string out;
  for (const auto& [key, value] : entries_) out += key + " = " + value + "\n";
  return out;
}

void ConfigFile::set(const std::string& dotted_key, const std::string& value) {
  split_dotted(dotted_key);
  if (value.find_first_of("#\n") != std::string::npos) {
    throw ConfigError("value for '" + dotted_key + "' may not contain '#' or newlines");
  }
  for (auto& [key, v] : entries_) {
    if (key == dotted_key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(dotted_key, value);
}

void ConfigFile::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' must look like section.key=value");
  }
  set(std::string(trim(assignment.substr(0, eq))), std::string(trim(assignment.substr(eq + 1))));
}

bool ConfigFile::contains(const std::string& dotted_key) const { return get(dotted_key).has_value(); }

std::optional<std::string> ConfigFile::get(const std::string& dotted_key) const {
  for (const auto& [key, value] : entries_) {
    if (key == dotted_key) return value;
  }
  return std::nullopt;
}

std::optional<std::string> ConfigReader::take(const std::string& key) {
  used_.insert(key);
  return file_.get(key);
}

std::string ConfigReader::text(const std::string& key, const std::string& fallback) {
  return take(key).value_or(fallback);
}

double ConfigReader::real(const std::string& key, double fallback) {
  const auto v = take(key);
  return v ? parse_real(key, *v) : fallback;
}

long long ConfigReader::integer(const std::string& key, long long fallback) {
  const auto v = take(key);
  return v ? parse_int<long long>(key, *v) : fallback;
}

std::uint64_t ConfigReader::unsigned_integer(const std::string& key, std::uint64_t fallback) {
  const auto v = take(key);
  return v ? parse_int<std::uint64_t>(key, *v) : fallback;
}

std::size_t ConfigReader::count(const std::string& key, std::size_t fallback) {
  const auto v = take(key);
  return v ? parse_int<std::size_t>(key, *v) : fallback;
}

bool ConfigReader::boolean(const std::string& key, bool fallback) {
  const auto v = take(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw ConfigError("'" + key + "': expected true or false, got '" + *v + "'");
}

Rgb ConfigReader::rgb(const std::string& key, const Rgb& fallback) {
  const auto v = take(key);
  if (!v) return fallback;
  const auto parts = split_list(*v);
  if (parts.size() != 3) throw ConfigError("'" + key + "': expected three comma-separated numbers");
  return {parse_real(key, parts[0]), parse_real(key, parts[1]), parse_real(key, parts[2])};
}

std::vector<std::size_t> ConfigReader::size_list(const std::string& key,
                                                 const std::vector<std::size_t>& fallback) {
  const auto v = take(key);
  if (!v) return fallback;
  std::vector<std::size_t> out;
  for (const auto& part : split_list(*v)) out.push_back(parse_int<std::size_t>(key, part));
  return out;
}

void ConfigReader::reject_unknown() const {
  for (const auto& [key, value] : file_.entries()) {
    if (!used_.contains(key)) throw ConfigError("unknown configuration key '" + key + "'");
  }
}

namespace {

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out;
}

std::string format_frozen(const std::array<bool, 3>& f) {
  return std::string(f[0] ? "1" : "0") + ", " + (f[1] ? "1" : "0") + ", " + (f[2] ? "1" : "0");
}

void write_schedule(ConfigFile& cfg, const ScheduleParams& s) {
  cfg.set("schedule.T", std::to_string(s.steps));
  cfg.set("schedule.beta_start", format_real(s.beta_start));
  cfg.set("schedule.beta_end", format_real(s.beta_end));
}

ScheduleParams read_schedule(ConfigReader& r) {
  ScheduleParams s;
  s.steps = static_cast<int>(r.integer("schedule.T", s.steps));
  s.beta_start = r.real("schedule.beta_start", s.beta_start);
  s.beta_end = r.real("schedule.beta_end", s.beta_end);
  return s;
}

void validate_schedule(const ScheduleParams& s) { build_linear_schedule(s); }

}  // namespace

void RunConfig::validate() const {
  validate_schedule(schedule);
  if (denoiser == DenoiserKind::kCheckpoint && checkpoint.empty()) {
    throw ConfigError("denoiser.kind = checkpoint requires denoiser.checkpoint");
  }
  if (denoiser == DenoiserKind::kOracle) {
    if (!(oracle_sigma > 0.0) || !std::isfinite(oracle_sigma)) {
      throw ConfigError("denoiser.oracle_sigma must be > 0");
    }
    if (height == 0 || width == 0) throw ConfigError("image.height and image.width must be > 0");
  }
  path.validate();
  if (path.kind != PathKind::kBrownian && !(path_dt > 0.0)) throw ConfigError("path.dt must be > 0");
  if (frames < 1) throw ConfigError("output.frames must be >= 1");
  injection.validate(schedule.steps);
  if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
}

ConfigFile RunConfig::to_config() const {
  ConfigFile cfg;
  write_schedule(cfg, schedule);
  cfg.set("denoiser.kind", denoiser == DenoiserKind::kOracle ? "oracle" : "checkpoint");
  cfg.set("denoiser.checkpoint", checkpoint);
  cfg.set("denoiser.oracle_mean", format_rgb(oracle_mean));
  cfg.set("denoiser.oracle_sigma", format_real(oracle_sigma));
  cfg.set("image.height", std::to_string(height));
  cfg.set("image.width", std::to_string(width));
  cfg.set("path.kind", to_string(path.kind));
  cfg.set("path.start", format_rgb(path.start));
  cfg.set("path.velocity", format_rgb(path.velocity));
  cfg.set("path.frozen", format_frozen(path.frozen));
  cfg.set("path.duration", format_real(path.duration));
  cfg.set("path.dt", format_real(path_dt));
  cfg.set("path.gravity", format_real(path.gravity));
  cfg.set("path.gravity_axis", std::to_string(path.gravity_axis));
  cfg.set("path.restitution", format_real(path.restitution));
  cfg.set("path.step_sigma", format_real(path.step_sigma));
  cfg.set("path.brownian_steps", std::to_string(path.brownian_steps));
  cfg.set("path.seed", std::to_string(path.seed));
  cfg.set("injection.s_noise", format_real(injection.s_noise));
  cfg.set("injection.window_first", std::to_string(injection.window_first));
  cfg.set("injection.window_last", std::to_string(injection.window_last));
  cfg.set("injection.placement",
          injection.placement == InjectionPlacement::kBeforeDenoiser ? "before" : "after");
  cfg.set("sampler.mode", mode == SamplerMode::kAncestral ? "ancestral" : "deterministic");
  cfg.set("sampler.seed", std::to_string(seed));
  cfg.set("output.frames", std::to_string(frames));
  cfg.set("output.dir", output_dir);
  cfg.set("run.parallel", parallel ? "true" : "false");
  return cfg;
}

RunConfig RunConfig::from_config(const ConfigFile& file) {
  ConfigReader r(file);
  RunConfig c;
  c.schedule = read_schedule(r);

  const auto kind = r.text("denoiser.kind", "oracle");
  if (kind == "oracle") {
    c.denoiser = DenoiserKind::kOracle;
  } else if (kind == "checkpoint") {
    c.denoiser = DenoiserKind::kCheckpoint;
  } else {
    throw ConfigError("denoiser.kind must be oracle or checkpoint, got '" + kind + "'");
  }
  c.checkpoint = r.text("denoiser.checkpoint", "");
  c.oracle_mean = r.rgb("denoiser.oracle_mean", c.oracle_mean);
  c.oracle_sigma = r.real("denoiser.oracle_sigma", c.oracle_sigma);
  c.height = r.count("image.height", 32);
  c.width = r.count("image.width", 32);

  c.path.kind = parse_path_kind(r.text("path.kind", to_string(c.path.kind)));
  c.path.start = r.rgb("path.start", c.path.start);
  c.path.velocity = r.rgb("path.velocity", c.path.velocity);
  const Rgb frozen = r.rgb("path.frozen", {0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < 3; ++i) c.path.frozen[i] = frozen[i] != 0.0;
  c.path.duration = r.real("path.duration", c.path.duration);
  c.path_dt = r.real("path.dt", c.path_dt);
  c.path.gravity = r.real("path.gravity", c.path.gravity);
  c.path.gravity_axis = static_cast<int>(r.integer("path.gravity_axis", c.path.gravity_axis));
  c.path.restitution = r.real("path.restitution", c.path.restitution);
  c.path.step_sigma = r.real("path.step_sigma", c.path.step_sigma);
  c.path.brownian_steps =
      r.count("path.brownian_steps", c.path.brownian_steps);
  c.path.seed = r.unsigned_integer("path.seed", c.path.seed);

  c.injection.s_noise = r.real("injection.s_noise", c.injection.s_noise);
  c.injection.window_first = static_cast<int>(r.integer("injection.window_first", 1));
  c.injection.window_last = static_cast<int>(r.integer("injection.window_last", 10));
  const auto placement = r.text("injection.placement", "before");
  if (placement == "before") {
    c.injection.placement = InjectionPlacement::kBeforeDenoiser;
  } else if (placement == "after") {
    c.injection.placement = InjectionPlacement::kAfterStep;
  } else {
    throw ConfigError("injection.placement must be before or after, got '" + placement + "'");
  }

  const auto mode = r.text("sampler.mode", "ancestral");
  if (mode == "ancestral") {
    c.mode = SamplerMode::kAncestral;
  } else if (mode == "deterministic") {
    c.mode = SamplerMode::kDeterministic;
  } else {
    throw ConfigError("sampler.mode must be ancestral or deterministic, got '" + mode + "'");
  }
  c.seed = r.unsigned_integer("sampler.seed", c.seed);
  const long long frames = r.integer("output.frames", 120);
  if (frames < 1) throw ConfigError("output.frames must be >= 1");
  c.frames = static_cast<std::size_t>(frames);
  c.output_dir = r.text("output.dir", c.output_dir);
  c.parallel = r.boolean("run.parallel", c.parallel);
  r.reject_unknown();
  c.validate();
  return c;
}

void TrainRunConfig::validate() const {
  validate_schedule(schedule);
  if (data_kind != "blob_faces" && data_kind != "gaussian") {
    throw ConfigError("data.kind must be blob_faces or gaussian, got '" + data_kind + "'");
  }
  if (height == 0 || width == 0) throw ConfigError("data.height and data.width must be > 0");
  if (data_kind == "blob_faces" && (height < 8 || width < 8)) {
    throw ConfigError("blob_faces needs at least an 8x8 canvas");
  }
  if (data_kind == "gaussian" && !(gaussian_sigma > 0.0)) throw ConfigError("data.sigma must be > 0");
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("network.hidden widths must be > 0");
  }
  train.validate();
  if (checkpoint.empty()) throw ConfigError("output.checkpoint must not be empty");
}

ConfigFile TrainRunConfig::to_config() const {
  ConfigFile cfg;
  write_schedule(cfg, schedule);
  cfg.set("data.kind", data_kind);
  cfg.set("data.height", std::to_string(height));
  cfg.set("data.width", std::to_string(width));
  cfg.set("data.seed", std::to_string(data_seed));
  cfg.set("data.jitter", format_real(jitter));
  cfg.set("data.mean", format_rgb(gaussian_mean));
  cfg.set("data.sigma", format_real(gaussian_sigma));
  cfg.set("network.hidden", join_sizes(hidden));
  cfg.set("network.time_width", std::to_string(time_width));
  cfg.set("network.init_seed", std::to_string(init_seed));
  cfg.set("train.learning_rate", format_real(train.learning_rate));
  cfg.set("train.batch_size", std::to_string(train.batch_size));
  cfg.set("train.steps", std::to_string(train.steps));
  cfg.set("train.optimizer", train.optimizer == Optimizer::kAdam ? "adam" : "sgd");
  cfg.set("train.seed", std::to_string(train.seed));
  cfg.set("output.checkpoint", checkpoint);
  cfg.set("output.loss_csv", loss_csv);
  return cfg;
}

TrainRunConfig TrainRunConfig::from_config(const ConfigFile& file) {
  ConfigReader r(file);
  TrainRunConfig c;
  c.schedule = read_schedule(r);
  c.data_kind = r.text("data.kind", c.data_kind);
  c.height = r.count("data.height", 32);
  c.width = r.count("data.width", 32);
  c.data_seed = r.unsigned_integer("data.seed", c.data_seed);
  c.jitter = r.real("data.jitter", c.jitter);
  c.gaussian_mean = r.rgb("data.mean", c.gaussian_mean);
  c.gaussian_sigma = r.real("data.sigma", c.gaussian_sigma);
  c.hidden = r.size_list("network.hidden", c.hidden);
  c.time_width = r.count("network.time_width", 8);
  c.init_seed = r.unsigned_integer("network.init_seed", c.init_seed);
  c.train.learning_rate = r.real("train.learning_rate", c.train.learning_rate);
  const long long batch = r.integer("train.batch_size", 8);
  const long long steps = r.integer("train.steps", 5000);
  if (batch < 1 || steps < 1) throw ConfigError("train.batch_size and train.steps must be >= 1");
  c.train.batch_size = static_cast<std::size_t>(batch);
  c.train.steps = static_cast<std::size_t>(steps);
  const auto opt = r.text("train.optimizer", "adam");
  if (opt == "adam") {
    c.train.optimizer = Optimizer::kAdam;
  } else if (opt == "sgd") {
    c.train.optimizer = Optimizer::kSgd;
  } else {
    throw ConfigError("train.optimizer must be adam or sgd, got '" + opt + "'");
  }
  c.train.seed = r.unsigned_integer("train.seed", c.train.seed);
  c.checkpoint = r.text("output.checkpoint", c.checkpoint);
  c.loss_csv = r.text("output.loss_csv", c.loss_csv);
  r.reject_unknown();
  c.validate();
  return c;
}

}  // namespace chromadiff
