#include "chromadiff/verify.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

#include "chromadiff/denoiser.hpp"
#include "chromadiff/eps_net.hpp"
#include "chromadiff/rng.hpp"
#include "chromadiff/sampler.hpp"
#include "chromadiff/training.hpp"

namespace chromadiff {

double relative_difference(const ImageTensor& a, const ImageTensor& b) {
  const double denom = l2_norm(b);
  const double num = l2_norm(a - b);
  return denom == 0.0 ? num : num / denom;
}

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

using Chain = std::function<ImageTensor(std::uint64_t seed, const InjectionConfig* inj)>;

ImageTensor response(const Chain& run, std::uint64_t seed, const InjectionConfig& inj) {
  return run(seed, &inj) - run(seed, nullptr);
}

void injection_checks(const std::string& mode, const Chain& run, const VerifyOptions& o,
                      std::vector<CheckResult>& out) {
  InjectionConfig inj;
  inj.s_noise = 0.01;
  inj.mask.rgb = {1.0, 0.0, 0.0};

  {
    bool ok = true;
    InjectionConfig zero = inj;
    zero.s_noise = 0.0;
    for (std::uint64_t seed = 1; seed <= o.seeds; ++seed) ok &= run(seed, &zero) == run(seed, nullptr);
    out.push_back({mode + ": zero-injection identity", ok, "bit-exact over " + std::to_string(o.seeds) + " seeds"});
  }

  const ImageTensor ref = response(run, 1, inj);
  {
    double worst = 0.0;
    for (std::uint64_t seed = 2; seed <= o.seeds; ++seed) {
      worst = std::max(worst, relative_difference(response(run, seed, inj), ref));
    }
    out.push_back({mode + ": response independent of seed", worst <= o.tolerance, "max rel diff " + sci(worst)});
  }
  {
    double worst = 0.0;
    for (double s : {0.005, 0.02}) {
      InjectionConfig scaled = inj;
      scaled.s_noise = s;
      worst = std::max(worst, relative_difference(response(run, 1, scaled), (s / 0.01) * ref));
    }
    out.push_back({mode + ": response linear in s_noise", worst <= o.tolerance, "max rel diff " + sci(worst)});
  }
  {
    InjectionConfig first = inj, second = inj;
    first.window_last = 5;
    second.window_first = 6;
    const double d = relative_difference(response(run, 1, first) + response(run, 1, second), ref);
    out.push_back({mode + ": response additive over windows", d <= o.tolerance, "rel diff " + sci(d)});
  }
}

CheckResult gradient_check() {
  EpsNetShape shape;
  shape.height = 2;
  shape.width = 2;
  shape.hidden = {6, 5};
  shape.steps = 10;
  SmallEpsNet net = SmallEpsNet::initialized(shape, 11);
  for (std::size_t i = 0; i < net.parameter_count(); ++i) net.parameters()[i] += 0.01 * std::sin(3.0 * i);
  const NoiseSchedule sched = build_linear_schedule(10, 1e-4, 0.02);
  const BatchDraw batch = draw_batch(TensorDataset({ImageTensor::constant(2, 2, {0.3, -0.2, 0.5})}),
                                     sched, 5, 0, 3);
  std::vector<double> grad(net.parameter_count());
  batch_loss_and_gradient(net, sched, batch, grad);
  constexpr double h = 1e-5;
  double worst = 0.0;
  const CounterRng pick(99, 0);
  for (int k = 0; k < 10; ++k) {
    const std::size_t i = pick.bits(k) % net.parameter_count();
    const double saved = net.parameters()[i];
    net.parameters()[i] = saved + h;
    const double up = batch_loss(net, sched, batch);
    net.parameters()[i] = saved - h;
    const double down = batch_loss(net, sched, batch);
    net.parameters()[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double scale = std::max(std::abs(fd), std::abs(grad[i]));
    if (scale > 0.0) worst = std::max(worst, std::abs(fd - grad[i]) / scale);
  }
  return {"network gradient vs central differences", worst < 1e-4, "max rel err " + sci(worst)};
}

}  // namespace

std::vector<CheckResult> run_property_suite(const VerifyOptions& o) {
  const NoiseSchedule sched = build_linear_schedule(o.steps, 1e-4, 0.02);
  const GaussianOracleDenoiser oracle(ImageTensor(o.height, o.width, 0.0), 0.5, sched);

  std::vector<CheckResult> out;
  injection_checks("ancestral", [&](std::uint64_t seed, const InjectionConfig* inj) {
    const NoiseStream stream(seed);
    return inj ? sample(oracle, sched, stream, *inj) : sample(oracle, sched, stream);
  }, o, out);
  injection_checks("deterministic", [&](std::uint64_t seed, const InjectionConfig* inj) {
    const ImageTensor init = NoiseStream(seed).initial(o.height, o.width);
    return inj ? ddim_sample(oracle, sched, init, *inj) : ddim_sample(oracle, sched, init);
  }, o, out);
  out.push_back(gradient_check());
  return out;
}

}  // namespace chromadiff
