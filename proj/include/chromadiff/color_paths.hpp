#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chromadiff/tensor.hpp"

namespace chromadiff {

enum class PathKind { kBouncingBall, kMirror, kBrownian };

std::string to_string(PathKind kind);
PathKind parse_path_kind(const std::string& name);

/// Parameters of one trajectory in the unit RGB cube. Fields not used by
/// `kind` are ignored. Frozen axes never move.
struct PathSpec {
  PathKind kind = PathKind::kBouncingBall;
  Rgb start{0.2, 0.3, 0.9};
  Rgb velocity{0.6, 0.8, 0.0};  // cube units per unit time
  std::array<bool, 3> frozen{false, false, false};
  double duration = 2.0;        // simulated time (bouncing_ball, mirror)

  // bouncing_ball
  double gravity = 9.8;
  int gravity_axis = 2;
  double restitution = 0.85;

  // brownian
  double step_sigma = 0.02;
  std::size_t brownian_steps = 1000;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const PathSpec&, const PathSpec&) = default;
};

struct PathPoint {
  double time;
  Rgb rgb;
  friend bool operator==(const PathPoint&, const PathPoint&) = default;
};

struct ColorPath {
  std::vector<PathPoint> points;
  PathSpec spec;
};

/// Ballistic motion under constant gravity along spec.gravity_axis. Floor
/// contacts (coordinate 0 on that axis) scale the axis velocity by
/// -restitution; every other face reflects elastically. Contact times are
/// solved analytically inside each step. Points are emitted every dt.
ColorPath bouncing_ball_path(const PathSpec& spec, double dt);

/// Straight-line motion with specular reflection at all six cube faces.
ColorPath mirror_path(const PathSpec& spec, double dt);

/// Seeded Gaussian increments per axis, folded back into [0, 1] by
/// reflection. Point k has time k.
ColorPath brownian_path(const PathSpec& spec);

/// Dispatches on spec.kind (dt is ignored for brownian).
ColorPath build_path(const PathSpec& spec, double dt);

/// n colors at uniform time spacing from the first to the last path time,
/// linearly interpolated. The first and last are the path endpoints.
std::vector<Rgb> sample_path(const ColorPath& path, std::size_t n);

/// Integer 0..255 channels to [0, 1].
Rgb rgb255_to_unit(int r, int g, int b);

/// Reflects x into [0, 1] (triangle wave with period 2).
double fold_unit(double x) noexcept;

/// CSV with header "time,r,g,b".
void write_path_csv(const ColorPath& path, const std::filesystem::path& file);

}  // namespace chromadiff
