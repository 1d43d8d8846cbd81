// Command-line front end: train, path, generate, analyze, verify.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "chromadiff/color_paths.hpp"
#include "chromadiff/config.hpp"
#include "chromadiff/errors.hpp"
#include "chromadiff/eps_net.hpp"
#include "chromadiff/pipeline.hpp"
#include "chromadiff/toy_data.hpp"
#include "chromadiff/training.hpp"
#include "chromadiff/verify.hpp"

namespace cd = chromadiff;

namespace {

cd::ConfigFile load_config(const std::string& path, const std::vector<std::string>& overrides) {
  cd::ConfigFile cfg = path.empty() ? cd::ConfigFile{} : cd::ConfigFile::load(path);
  for (const auto& o : overrides) cfg.apply_override(o);
  return cfg;
}

std::unique_ptr<cd::Dataset> make_dataset(const cd::TrainRunConfig& c) {
  if (c.data_kind == "gaussian") {
    return std::make_unique<cd::GaussianDataset>(
        cd::ImageTensor::constant(c.height, c.width, c.gaussian_mean), c.gaussian_sigma,
        c.data_seed);
  }
  return std::make_unique<cd::BlobFaceDataset>(c.height, c.width, c.data_seed, c.jitter);
}

int run_train(const cd::ConfigFile& file, std::size_t dump_samples, const std::string& dump_dir) {
  const auto c = cd::TrainRunConfig::from_config(file);
  const auto data = make_dataset(c);
  if (dump_samples > 0) cd::dump_dataset(*data, dump_samples, dump_dir);

  cd::EpsNetShape shape;
  shape.height = c.height;
  shape.width = c.width;
  shape.time_width = c.time_width;
  shape.hidden = c.hidden;
  shape.steps = c.schedule.steps;
  auto net = cd::SmallEpsNet::initialized(shape, c.init_seed);
  std::cerr << "training " << net.parameter_count() << " parameters for " << c.train.steps
            << " steps\n";
  const auto result =
      cd::train_denoiser(std::move(net), *data, cd::build_linear_schedule(c.schedule), c.train);
  result.net.save(c.checkpoint);
  if (!c.loss_csv.empty()) cd::write_loss_csv(result.loss_history, c.loss_csv);
  const auto smooth = cd::smooth_losses(result.loss_history, 50);
  std::cout << "checkpoint = " << c.checkpoint << "\n"
            << "loss_start = " << cd::format_real(smooth.front()) << "\n"
            << "loss_end = " << cd::format_real(smooth.back()) << "\n";
  return 0;
}

int run_path(const cd::ConfigFile& file, const std::string& out) {
  const auto c = cd::RunConfig::from_config(file);
  const auto path = cd::build_path(c.path, c.path_dt);
  cd::write_path_csv(path, out);
  std::cout << "points = " << path.points.size() << "\nfile = " << out << "\n";
  return 0;
}

int run_generate(const cd::ConfigFile& file) {
  const auto c = cd::RunConfig::from_config(file);
  const auto result = cd::run_generate(c);
  std::cout << "frames = " << result.frames.size() << "\nmanifest = " << result.manifest.string()
            << "\n";
  if (result.frames.size() >= 3) {
    const auto corr = cd::color_correlation(result.frames);
    static constexpr const char* kNames[] = {"r", "g", "b"};
    for (std::size_t ch = 0; ch < 3; ++ch) {
      std::cout << "correlation_" << kNames[ch] << " = "
                << (corr[ch] ? cd::format_real(*corr[ch]) : "undefined") << "\n";
    }
  }
  return 0;
}

int run_analyze(const std::string& dir, const std::string& out) {
  const auto report = cd::analyze_directory(dir);
  const std::string text = cd::format_report(report);
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream os(out);
    if (!os) throw cd::IoError(out, "cannot open report for writing");
    os << text;
  }
  return report.hashes_match ? 0 : static_cast<int>(cd::ExitCode::kIoError);
}

int run_verify(const cd::VerifyOptions& opts) {
  bool all = true;
  for (const auto& r : cd::run_property_suite(opts)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
    all &= r.passed;
  }
  return all ? 0 : static_cast<int>(cd::ExitCode::kNumericalFault);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Color-injected diffusion sampling along color-space trajectories"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Configuration file (key = value with [sections])");
    sub->add_option("-s,--set", overrides, "Override a key: section.key=value (repeatable)");
  };

  auto* train = app.add_subcommand("train", "Train the epsilon network on toy data");
  add_config(train);
  std::size_t dump_samples = 0;
  std::string dump_dir = "samples";
  train->add_option("--dump-samples", dump_samples, "Also write this many dataset samples as PPM");
  train->add_option("--dump-dir", dump_dir, "Directory for --dump-samples");

  auto* path = app.add_subcommand("path", "Simulate the configured color path and write CSV");
  add_config(path);
  std::string path_out = "path.csv";
  path->add_option("-o,--out", path_out, "Output CSV (time,r,g,b)");

  auto* generate = app.add_subcommand("generate", "Render a frame sequence and manifest");
  add_config(generate);

  auto* analyze = app.add_subcommand("analyze", "Recompute metrics from a frames directory");
  std::string analyze_dir;
  std::string analyze_out;
  analyze->add_option("dir", analyze_dir, "Directory written by generate")->required();
  analyze->add_option("-o,--out", analyze_out, "Write the report here instead of stdout");

  auto* verify = app.add_subcommand("verify", "Run the oracle property suite");
  cd::VerifyOptions vopts;
  verify->add_option("--steps", vopts.steps, "Diffusion steps T");
  verify->add_option("--height", vopts.height, "Image height");
  verify->add_option("--width", vopts.width, "Image width");
  verify->add_option("--seeds", vopts.seeds, "Number of stream seeds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(load_config(config_path, overrides), dump_samples, dump_dir);
    if (*path) return run_path(load_config(config_path, overrides), path_out);
    if (*generate) return run_generate(load_config(config_path, overrides));
    if (*analyze) return run_analyze(analyze_dir, analyze_out);
    if (*verify) return run_verify(vopts);
  } catch (const cd::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return static_cast<int>(cd::ExitCode::kConfigError);
  } catch (const cd::ContractError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return static_cast<int>(cd::ExitCode::kConfigError);
  } catch (const cd::NumericalFault& e) {
    std::cerr << "numerical fault at " << e.location() << ": " << e.what() << "\n";
    return static_cast<int>(cd::ExitCode::kNumericalFault);
  } catch (const cd::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return static_cast<int>(cd::ExitCode::kIoError);
  }
  return 0;
}
