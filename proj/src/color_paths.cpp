#include "chromadiff/color_paths.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "chromadiff/errors.hpp"
#include "chromadiff/rng.hpp"

namespace chromadiff {

std::string to_string(PathKind kind) {
  switch (kind) {
    case PathKind::kBouncingBall: return "bouncing_ball";
    case PathKind::kMirror: return "mirror";
    case PathKind::kBrownian: return "brownian";
  }
  return "unknown";
}

PathKind parse_path_kind(const std::string& name) {
  if (name == "bouncing_ball") return PathKind::kBouncingBall;
  if (name == "mirror") return PathKind::kMirror;
  if (name == "brownian") return PathKind::kBrownian;
  throw ConfigError("unknown path kind '" + name + "' (bouncing_ball | mirror | brownian)");
}

void PathSpec::validate() const {
  for (std::size_t c = 0; c < 3; ++c) {
    if (!(start[c] >= 0.0 && start[c] <= 1.0)) {
      throw ConfigError("path start component " + std::to_string(c) + " is outside [0, 1]");
    }
    if (!std::isfinite(velocity[c])) throw ConfigError("path velocity must be finite");
  }
  if (kind == PathKind::kBrownian) {
    if (!(step_sigma > 0.0) || !std::isfinite(step_sigma)) {
      throw ConfigError("brownian step deviation must be > 0");
    }
    if (brownian_steps < 1) throw ConfigError("brownian step count must be >= 1");
    return;
  }
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw ConfigError("path duration must be > 0");
  }
  if (kind == PathKind::kBouncingBall) {
    if (!(restitution > 0.0 && restitution <= 1.0)) {
      throw ConfigError("restitution must be in (0, 1]");
    }
    if (!(gravity >= 0.0) || !std::isfinite(gravity)) {
      throw ConfigError("gravity magnitude must be finite and >= 0");
    }
    if (gravity_axis < 0 || gravity_axis > 2) throw ConfigError("gravity axis must be 0, 1 or 2");
  }
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Below this post-bounce speed the ball is treated as resting on the floor.
constexpr double kRestSpeed = 1e-9;
constexpr int kMaxEventsPerStep = 100000;

struct Body {
  Rgb pos;
  Rgb vel;
  int gravity_axis = -1;  // -1: no gravity
  double gravity = 0.0;
  double restitution = 1.0;
  bool resting = false;

  double accel(std::size_t c) const {
    return static_cast<int>(c) == gravity_axis && !resting ? -gravity : 0.0;
  }
};

// Earliest tau in (0, inf) at which p + v tau + a tau^2 / 2 hits `bound`
// while moving toward it.
double hit_time(double p, double v, double a, double bound) {
  const double gap = bound - p;  // signed distance to the face
  if (a == 0.0) {
    if (v == 0.0 || gap / v <= 0.0) return kInf;
    return gap / v;
  }
  // a tau^2 / 2 + v tau - gap = 0
  const double disc = v * v + 2.0 * a * gap;
  if (disc < 0.0) return kInf;
  const double sq = std::sqrt(disc);
  // Stable roots: q = -(v + sign(v) sq), roots = q / a and -2 gap / q.
  const double q = -(v + std::copysign(sq, v));
  double best = kInf;
  for (double r : {q / a, q != 0.0 ? -2.0 * gap / q : kInf}) {
    if (r > 0.0 && r < best) best = r;
  }
  return best;
}

void advance(Body& b, double tau) {
  for (std::size_t c = 0; c < 3; ++c) {
    const double a = b.accel(c);
    b.pos[c] += b.vel[c] * tau + 0.5 * a * tau * tau;
    b.vel[c] += a * tau;
  }
}

void integrate(Body& b, double dt) {
  double remaining = dt;
  for (int events = 0; events < kMaxEventsPerStep; ++events) {
    double best = kInf;
    std::size_t axis = 0;
    double bound = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      if (b.resting && static_cast<int>(c) == b.gravity_axis) continue;
      for (double face : {0.0, 1.0}) {
        const double tau = hit_time(b.pos[c], b.vel[c], b.accel(c), face);
        if (tau < best) {
          best = tau;
          axis = c;
          bound = face;
        }
      }
    }
    if (best > remaining) {
      advance(b, remaining);
      return;
    }
    advance(b, best);
    remaining -= best;
    b.pos[axis] = bound;
    if (static_cast<int>(axis) == b.gravity_axis && bound == 0.0) {
      b.vel[axis] = -b.restitution * b.vel[axis];
      if (std::abs(b.vel[axis]) < kRestSpeed) {
        b.vel[axis] = 0.0;
        b.resting = true;
      }
    } else {
      b.vel[axis] = -b.vel[axis];
    }
  }
  throw NumericalFault("path integration", -1, "too many boundary events in one step");
}

Rgb clamped(const Rgb& p) {
  return {std::clamp(p[0], 0.0, 1.0), std::clamp(p[1], 0.0, 1.0), std::clamp(p[2], 0.0, 1.0)};
}

ColorPath simulate(const PathSpec& spec, Body body, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("path time step must be > 0");
  const auto steps = static_cast<std::size_t>(std::ceil(spec.duration / dt - 1e-9));
  ColorPath path{{}, spec};
  path.points.reserve(steps + 1);
  path.points.push_back({0.0, clamped(body.pos)});
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t_prev = static_cast<double>(k - 1) * dt;
    const double t_next = k == steps ? spec.duration : static_cast<double>(k) * dt;
    integrate(body, t_next - t_prev);
    path.points.push_back({t_next, clamped(body.pos)});
  }
  return path;
}

Rgb free_velocity(const PathSpec& spec) {
  Rgb v = spec.velocity;
  for (std::size_t c = 0; c < 3; ++c) {
    if (spec.frozen[c]) v[c] = 0.0;
  }
  return v;
}

}  // namespace

ColorPath bouncing_ball_path(const PathSpec& spec, double dt) {
  if (spec.kind != PathKind::kBouncingBall) throw ConfigError("path spec is not bouncing_ball");
  spec.validate();
  Body body{spec.start, free_velocity(spec)};
  if (!spec.frozen[static_cast<std::size_t>(spec.gravity_axis)]) {
    body.gravity_axis = spec.gravity_axis;
    body.gravity = spec.gravity;
  }
  body.restitution = spec.restitution;
  return simulate(spec, body, dt);
}

ColorPath mirror_path(const PathSpec& spec, double dt) {
  if (spec.kind != PathKind::kMirror) throw ConfigError("path spec is not mirror");
  spec.validate();
  const Rgb v = free_velocity(spec);
  if (v[0] == 0.0 && v[1] == 0.0 && v[2] == 0.0) {
    throw ConfigError("mirror path needs a non-zero velocity");
  }
  return simulate(spec, Body{spec.start, v}, dt);
}

double fold_unit(double x) noexcept {
  double r = std::fmod(x, 2.0);
  if (r < 0.0) r += 2.0;
  return r <= 1.0 ? r : 2.0 - r;
}

ColorPath brownian_path(const PathSpec& spec) {
  if (spec.kind != PathKind::kBrownian) throw ConfigError("path spec is not brownian");
  spec.validate();
  ColorPath path{{}, spec};
  path.points.reserve(spec.brownian_steps + 1);
  Rgb pos = spec.start;
  path.points.push_back({0.0, pos});
  const std::array<CounterRng, 3> rngs{CounterRng(spec.seed, 0), CounterRng(spec.seed, 1),
                                       CounterRng(spec.seed, 2)};
  for (std::size_t k = 0; k < spec.brownian_steps; ++k) {
    for (std::size_t c = 0; c < 3; ++c) {
      if (!spec.frozen[c]) pos[c] = fold_unit(pos[c] + spec.step_sigma * rngs[c].normal(k));
    }
    path.points.push_back({static_cast<double>(k + 1), pos});
  }
  return path;
}

ColorPath build_path(const PathSpec& spec, double dt) {
  switch (spec.kind) {
    case PathKind::kBouncingBall: return bouncing_ball_path(spec, dt);
    case PathKind::kMirror: return mirror_path(spec, dt);
    case PathKind::kBrownian: return brownian_path(spec);
  }
  throw ConfigError("unknown path kind");
}

std::vector<Rgb> sample_path(const ColorPath& path, std::size_t n) {
  if (n < 2) throw ConfigError("sample_path needs n >= 2, got " + std::to_string(n));
  const auto& pts = path.points;
  if (pts.size() < 2) throw ConfigError("sample_path needs a path with at least 2 points");
  const double t0 = pts.front().time;
  const double t1 = pts.back().time;
  std::vector<Rgb> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (k + 1 == n) {
      out.push_back(pts.back().rgb);
      break;
    }
    const double t = t0 + (t1 - t0) * (static_cast<double>(k) / static_cast<double>(n - 1));
    auto hi = std::upper_bound(pts.begin(), pts.end(), t,
                               [](double v, const PathPoint& p) { return v < p.time; });
    if (hi == pts.begin()) ++hi;
    if (hi == pts.end()) --hi;
    const PathPoint& a = *(hi - 1);
    const PathPoint& b = *hi;
    const double f = (t - a.time) / (b.time - a.time);
    Rgb c{};
    for (std::size_t i = 0; i < 3; ++i) c[i] = a.rgb[i] + f * (b.rgb[i] - a.rgb[i]);
    out.push_back(c);
  }
  return out;
}

Rgb rgb255_to_unit(int r, int g, int b) {
  for (int v : {r, g, b}) {
    if (v < 0 || v > 255) throw ConfigError("color channel " + std::to_string(v) + " outside 0..255");
  }
  return {r / 255.0, g / 255.0, b / 255.0};
}

void write_path_csv(const ColorPath& path, const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw IoError(file.string(), "cannot open path CSV for writing");
  os << "time,r,g,b\n";
  char buf[128];
  for (const auto& p : path.points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", p.time, p.rgb[0], p.rgb[1],
                  p.rgb[2]);
    os << buf;
  }
  if (!os) throw IoError(file.string(), "failed writing path CSV");
}

}  // namespace chromadiff
