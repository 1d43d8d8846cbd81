#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "chromadiff/denoiser.hpp"
#include "chromadiff/errors.hpp"
#include "chromadiff/eps_net.hpp"
#include "chromadiff/sampler.hpp"
#include "chromadiff/schedule.hpp"
#include "chromadiff/toy_data.hpp"
#include "chromadiff/training.hpp"
#include "test_support.hpp"

using namespace chromadiff;

namespace {

// Per-step multiplier of the ancestral chain under a N(mu, sigma^2) prior,
// written from the posterior precision rather than the library's gain form.
long double ancestral_factor(const NoiseSchedule& s, int t, long double sigma) {
  const long double ab = s.alpha_bar(t);
  const long double a = std::sqrt(ab);
  const long double precision = 1.0L / (sigma * sigma) + ab / (1.0L - ab);
  const long double mean_coef = (a / (1.0L - ab)) / precision;  // d E[x0|x] / dx
  const long double eps_slope = (1.0L - a * mean_coef) / std::sqrt(1.0L - ab);
  const long double beta = s.beta(t);
  return (1.0L - beta / std::sqrt(1.0L - ab) * eps_slope) / std::sqrt(1.0L - beta);
}

long double ddim_factor(const NoiseSchedule& s, int t, long double sigma) {
  const long double ab = s.alpha_bar(t);
  const long double ab_prev = t == 0 ? 1.0L : s.alpha_bar(t - 1);
  const long double a = std::sqrt(ab);
  const long double precision = 1.0L / (sigma * sigma) + ab / (1.0L - ab);
  const long double mean_coef = (a / (1.0L - ab)) / precision;
  const long double eps_slope = (1.0L - a * mean_coef) / std::sqrt(1.0L - ab);
  return std::sqrt(ab_prev) * (1.0L - std::sqrt(1.0L - ab) * eps_slope) / a +
         std::sqrt(1.0L - ab_prev) * eps_slope;
}

// Final-sample response per unit of injected mask for a "before" window.
template <typename Factor>
long double window_gain(const NoiseSchedule& s, int first, int last, Factor f) {
  const int T = s.steps();
  long double total = 0.0L;
  for (int j = first; j <= last; ++j) {
    long double prod = 1.0L;
    for (int t = T - j; t >= 0; --t) prod *= f(t);
    total += prod;
  }
  return total;
}

class NanAt final : public Denoiser {
 public:
  NanAt(int bad_t, std::size_t h, std::size_t w) : bad_t_(bad_t), h_(h), w_(w) {}
  ImageTensor predict_epsilon(const ImageTensor& x_t, int t) const override {
    ImageTensor out(x_t.height(), x_t.width());
    if (t == bad_t_) out.values()[0] = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  std::size_t image_height() const override { return h_; }
  std::size_t image_width() const override { return w_; }

 private:
  int bad_t_;
  std::size_t h_, w_;
};

InjectionConfig red(double s_noise, int first = 1, int last = 10) {
  InjectionConfig inj;
  inj.s_noise = s_noise;
  inj.mask.rgb = {1.0, 0.0, 0.0};
  inj.window_first = first;
  inj.window_last = last;
  return inj;
}

const SmallEpsNet& small_trained_net() {
  static const SmallEpsNet net = [] {
    EpsNetShape shape;
    shape.height = 8;
    shape.width = 8;
    shape.hidden = {64};
    shape.steps = 200;
    TrainConfig cfg;
    cfg.steps = 1500;
    cfg.batch_size = 8;
    cfg.learning_rate = 2e-3;
    return train_denoiser(SmallEpsNet::initialized(shape, 3), blob_faces(8, 8, 5),
                          build_linear_schedule(200, 1e-4, 0.04), cfg)
        .net;
  }();
  return net;
}

}  // namespace

TEST_CASE("mask and window validation") {
  ColorMask m;
  m.rgb = {0.0, 0.5, 1.0};
  CHECK_NOTHROW(m.validate());
  m.rgb = {0.0, 1.01, 0.0};
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m.rgb = {-0.1, 0.0, 0.0};
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m.rgb = {std::nan(""), 0.0, 0.0};
  CHECK_THROWS_AS(m.validate(), ConfigError);

  const auto plane = ColorMask{{0.25, 0.5, 0.75}}.materialize(2, 3);
  for (std::size_t c = 0; c < 3; ++c)
    for (double v : plane.plane(c)) CHECK(v == 0.25 * (c + 1));

  InjectionConfig inj = red(0.01);
  CHECK_NOTHROW(inj.validate(10));
  CHECK_THROWS_AS(inj.validate(9), ConfigError);
  inj.window_first = 0;
  CHECK_THROWS_AS(inj.validate(100), ConfigError);
  inj.window_first = 6;
  inj.window_last = 5;
  CHECK_THROWS_AS(inj.validate(100), ConfigError);
  inj = red(-1e-3);
  CHECK_THROWS_AS(inj.validate(100), ConfigError);

  inj = red(0.01, 3, 4);
  CHECK_FALSE(inj.active_at(2));
  CHECK(inj.active_at(3));
  CHECK(inj.active_at(4));
  CHECK_FALSE(inj.active_at(5));
  inj.s_noise = 0.0;
  CHECK_FALSE(inj.active_at(3));
}

TEST_CASE("noise stream is keyed on seed and step") {
  const NoiseStream a(11), b(11), c(12);
  CHECK(a.initial(4, 4) == b.initial(4, 4));
  CHECK(a.step_noise(7, 4, 4) == b.step_noise(7, 4, 4));
  CHECK(a.initial(4, 4) != c.initial(4, 4));
  CHECK(a.step_noise(7, 4, 4) != a.step_noise(8, 4, 4));
  CHECK(a.initial(4, 4) != a.step_noise(0, 4, 4));
  // Request order does not matter.
  const auto late = a.step_noise(500, 2, 2);
  (void)a.step_noise(3, 2, 2);
  CHECK(a.step_noise(500, 2, 2) == late);
}

TEST_CASE("ancestral step matches its closed form and is noiseless at t = 0") {
  const auto s = build_linear_schedule(100, 1e-4, 0.02);
  const GaussianOracleDenoiser oracle(testing::random_tensor(2, 2, 1), 0.5, s);
  const auto x = testing::random_tensor(2, 2, 2);
  const auto z = testing::random_tensor(2, 2, 3);
  for (int t : {99, 40, 1}) {
    const auto eps = oracle.predict_epsilon(x, t);
    const double var = s.beta(t) * (1.0 - s.alpha_bar(t - 1)) / (1.0 - s.alpha_bar(t));
    ImageTensor expected(2, 2);
    for (std::size_t i = 0; i < 12; ++i) {
      expected.values()[i] =
          (x.values()[i] - s.beta(t) / std::sqrt(1.0 - s.alpha_bar(t)) * eps.values()[i]) /
              std::sqrt(1.0 - s.beta(t)) +
          std::sqrt(var) * z.values()[i];
    }
    CHECK(rms_distance(ancestral_step(oracle, s, x, t, z), expected) < 1e-13);
  }
  CHECK(ancestral_step(oracle, s, x, 0, z) == ancestral_step(oracle, s, x, 0, ImageTensor(2, 2)));
  CHECK_THROWS_AS(ancestral_step(oracle, s, x, 100, z), ContractError);
  CHECK_THROWS_AS(ancestral_step(oracle, s, x, 5, ImageTensor(1, 2)), ContractError);
}

TEST_CASE("DDIM step is exact when the noise prediction is exact") {
  // With eps_hat equal to the true noise, one DDIM step lands on the forward
  // marginal at t-1 built from the same (x0, eps).
  struct Exact final : Denoiser {
    const NoiseSchedule* s;
    ImageTensor x0;
    ImageTensor predict_epsilon(const ImageTensor& x_t, int t) const override {
      return (1.0 / std::sqrt(1.0 - s->alpha_bar(t))) *
             (x_t - std::sqrt(s->alpha_bar(t)) * x0);
    }
    std::size_t image_height() const override { return x0.height(); }
    std::size_t image_width() const override { return x0.width(); }
  };
  const auto s = build_linear_schedule(50, 1e-3, 0.05);
  Exact d;
  d.s = &s;
  d.x0 = testing::random_tensor(3, 3, 5);
  const auto eps = testing::random_tensor(3, 3, 6);
  for (int t : {49, 10, 1}) {
    const auto x_t = forward_marginal(s, d.x0, t, eps);
    CHECK(rms_distance(ddim_step(d, s, x_t, t), forward_marginal(s, d.x0, t - 1, eps)) < 1e-12);
  }
  CHECK(rms_distance(ddim_step(d, s, forward_marginal(s, d.x0, 0, eps), 0), d.x0) < 1e-12);
}

TEST_CASE("zero-strength injection reproduces the plain sampler bit for bit") {
  const auto s = build_linear_schedule(200, 1e-4, 0.04);
  const GaussianOracleDenoiser oracle(testing::random_tensor(3, 3, 7, 0.3), 0.5, s);
  const auto& net = small_trained_net();
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const NoiseStream stream(seed);
    auto inj = red(0.0, 1, 50);
    inj.mask.rgb = {0.3, 0.9, 0.1};
    CHECK(sample(oracle, s, stream, inj) == sample(oracle, s, stream));
    CHECK(sample(net, s, stream, inj) == sample(net, s, stream));
    const auto init = stream.initial(8, 8);
    CHECK(ddim_sample(net, s, init, inj) == ddim_sample(net, s, init));
    inj.placement = InjectionPlacement::kAfterStep;
    CHECK(sample(net, s, stream, inj) == sample(net, s, stream));
  }
}

TEST_CASE("oracle chain response matches the closed-form gain") {
  const auto s = build_linear_schedule(1000, 1e-4, 0.02);
  const double sigma = 0.5;
  const GaussianOracleDenoiser oracle(testing::random_tensor(4, 4, 8, 0.2), sigma, s);
  const long double k_anc =
      window_gain(s, 1, 10, [&](int t) { return ancestral_factor(s, t, sigma); });
  const long double k_ddim = window_gain(s, 1, 10, [&](int t) { return ddim_factor(s, t, sigma); });
  CHECK(k_anc > 0.0L);

  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const NoiseStream stream(seed);
    const auto base = sample(oracle, s, stream);
    const auto init = stream.initial(4, 4);
    const auto base_ddim = ddim_sample(oracle, s, init);
    for (double scale : {0.005, 0.01, 0.02}) {
      const auto diff = sample(oracle, s, stream, red(scale)) - base;
      const auto diff_ddim = ddim_sample(oracle, s, init, red(scale)) - base_ddim;
      for (double v : diff.plane(0))
        CHECK(v == doctest::Approx(static_cast<double>(scale * k_anc)).epsilon(1e-9));
      for (double v : diff_ddim.plane(0))
        CHECK(v == doctest::Approx(static_cast<double>(scale * k_ddim)).epsilon(1e-9));
      // Channels are independent under the oracle: green and blue untouched.
      for (std::size_t c = 1; c < 3; ++c) {
        for (double v : diff.plane(c)) CHECK(v == 0.0);
        for (double v : diff_ddim.plane(c)) CHECK(v == 0.0);
      }
    }
  }
}

TEST_CASE("window responses add up under the oracle") {
  const auto s = build_linear_schedule(300, 1e-4, 0.03);
  const GaussianOracleDenoiser oracle(ImageTensor(2, 2, 0.1), 0.5, s);
  const NoiseStream stream(21);
  const auto base = sample(oracle, s, stream);
  const auto whole = sample(oracle, s, stream, red(0.02, 1, 10)) - base;
  const auto a = sample(oracle, s, stream, red(0.02, 1, 5)) - base;
  const auto b = sample(oracle, s, stream, red(0.02, 6, 10)) - base;
  CHECK(l2_norm(whole - (a + b)) <= 1e-9 * l2_norm(whole));
}

TEST_CASE("after-step placement equals a before-placement window shifted by one") {
  // Adding after step j is the same as adding before step j+1.
  const auto s = build_linear_schedule(100, 1e-4, 0.05);
  const GaussianOracleDenoiser oracle(ImageTensor(2, 2, 0.0), 0.7, s);
  const NoiseStream stream(4);
  auto after = red(0.03, 2, 6);
  after.placement = InjectionPlacement::kAfterStep;
  const auto before = red(0.03, 3, 7);
  CHECK(rms_distance(sample(oracle, s, stream, after), sample(oracle, s, stream, before)) < 1e-12);
}

TEST_CASE("oracle sampling reproduces the prior distribution") {
  const auto s = build_linear_schedule(200, 1e-4, 0.1);
  const GaussianOracleDenoiser oracle(ImageTensor(1, 1, 2.0), 0.5, s);
  std::vector<double> xs;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto x = sample(oracle, s, NoiseStream(seed));
    xs.insert(xs.end(), x.values().begin(), x.values().end());
  }
  const auto m = testing::moments(xs);
  CHECK(std::abs(m.mean - 2.0) < 3.0 * m.mean_se);
  CHECK(std::abs(std::sqrt(m.variance) / 0.5 - 1.0) < 0.05);
}

TEST_CASE("red injection shifts a trained network's output toward red") {
  const auto s = build_linear_schedule(200, 1e-4, 0.04);
  const auto& net = small_trained_net();
  double shift[3] = {0.0, 0.0, 0.0};
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const NoiseStream stream(seed);
    const auto d = sample(net, s, stream, red(0.05)) - sample(net, s, stream);
    for (std::size_t c = 0; c < 3; ++c)
      for (double v : d.plane(c)) shift[c] += v;
  }
  CHECK(shift[0] > 0.0);
  // The network couples channels, so green and blue may move too, but less.
  CHECK(shift[0] > shift[1]);
  CHECK(shift[0] > shift[2]);
}

TEST_CASE("deterministic sampling is reproducible and continuous in the strength") {
  const auto s = build_linear_schedule(200, 1e-4, 0.04);
  const auto& net = small_trained_net();
  const auto init = NoiseStream(9).initial(8, 8);
  const auto base = ddim_sample(net, s, init);
  CHECK(ddim_sample(net, s, init) == base);
  CHECK(ddim_sample(net, s, init, red(0.01)) == ddim_sample(net, s, init, red(0.01)));
  double previous = std::numeric_limits<double>::infinity();
  for (double delta : {0.1, 0.01, 0.001}) {
    const double change = rms_distance(ddim_sample(net, s, init, red(delta)), base);
    CHECK(change > 0.0);
    CHECK(change < previous);
    if (std::isfinite(previous)) CHECK(change < 0.2 * previous);
    previous = change;
  }
}

TEST_CASE("non-finite step output names the step") {
  const auto s = build_linear_schedule(50, 1e-3, 0.05);
  const NanAt d(17, 2, 2);
  try {
    sample(d, s, NoiseStream(0));
    FAIL("expected a numerical fault");
  } catch (const NumericalFault& e) {
    CHECK(e.index() == 17);
  }
  CHECK_THROWS_AS(ddim_sample(d, s, ImageTensor(2, 2)), NumericalFault);
  CHECK_THROWS_AS(ddim_sample(d, s, ImageTensor(3, 2)), ContractError);
}
