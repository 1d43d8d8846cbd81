#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <cstring>
#include <limits>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <vector>

#include "chromadiff/denoiser.hpp"
#include "chromadiff/eps_net.hpp"
#include "chromadiff/errors.hpp"
#include "chromadiff/image_io.hpp"
#include "chromadiff/schedule.hpp"
#include "chromadiff/toy_data.hpp"
#include "chromadiff/training.hpp"
#include "test_support.hpp"

using namespace chromadiff;

namespace {

// E[eps | x_t] for a scalar N(mu, sigma^2) prior, by composite Simpson
// integration of the unnormalised posterior over x0.
double quadrature_eps(double x_t, double alpha_bar, double mu, double sigma) {
  const double a = std::sqrt(alpha_bar);
  const double s = std::sqrt(1.0 - alpha_bar);
  const double lo = mu - 14.0 * sigma;
  const double hi = mu + 14.0 * sigma;
  const int n = 20000;
  const double h = (hi - lo) / n;
  double num = 0.0, den = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x0 = lo + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double prior = std::exp(-0.5 * std::pow((x0 - mu) / sigma, 2));
    const double lik = std::exp(-0.5 * std::pow((x_t - a * x0) / s, 2));
    const double eps = (x_t - a * x0) / s;
    num += w * prior * lik * eps;
    den += w * prior * lik;
  }
  return num / den;
}

EpsNetShape tiny_shape() {
  EpsNetShape shape;
  shape.height = 2;
  shape.width = 3;
  shape.time_width = 4;
  shape.hidden = {7, 5};
  shape.steps = 50;
  return shape;
}

}  // namespace

TEST_CASE("oracle returns zero noise at the pushed-forward mean") {
  const auto s = build_linear_schedule(100, 1e-4, 0.02);
  const auto mu = testing::random_tensor(3, 4, 9);
  const GaussianOracleDenoiser oracle(mu, 0.7, s);
  for (int t : {0, 37, 99}) {
    const ImageTensor x = std::sqrt(s.alpha_bar(t)) * mu;
    CHECK(rms_distance(oracle.posterior_mean(x, t), mu) < 1e-14);
    CHECK(l2_norm(oracle.predict_epsilon(x, t)) < 1e-12);
  }
}

TEST_CASE("oracle posterior mean collapses to mu0 as sigma0 shrinks") {
  const auto s = build_linear_schedule(100, 1e-4, 0.02);
  const auto mu = testing::random_tensor(2, 2, 4);
  const GaussianOracleDenoiser oracle(mu, 1e-9, s);
  const auto x = testing::random_tensor(2, 2, 5, 3.0);
  CHECK(rms_distance(oracle.posterior_mean(x, 50), mu) < 1e-15 * 1e3);
}

TEST_CASE("oracle epsilon matches the quadrature posterior expectation") {
  const auto s = build_linear_schedule(1, 0.5, 0.5);  // alpha_bar = 0.5
  const GaussianOracleDenoiser oracle(ImageTensor(1, 1, 0.0), 1.0, s);
  for (double x_t : {-2.5, -0.3, 0.0, 1.1, 3.7}) {
    const double expected = quadrature_eps(x_t, 0.5, 0.0, 1.0);
    const double got = oracle.predict_epsilon(ImageTensor(1, 1, x_t), 0).values()[0];
    CHECK(got == doctest::Approx(expected).epsilon(1e-9));
    // E[x0 | x_t] = sqrt(0.5) x_t / (0.5 + 0.5)
    CHECK(oracle.posterior_mean(ImageTensor(1, 1, x_t), 0).values()[0] ==
          doctest::Approx(std::sqrt(0.5) * x_t).epsilon(1e-12));
  }
  // Non-standard prior at a later step of a longer schedule.
  const auto s2 = build_linear_schedule(200, 1e-3, 0.03);
  const GaussianOracleDenoiser shifted(ImageTensor(1, 1, 1.5), 0.4, s2);
  for (int t : {3, 80, 199}) {
    const double expected = quadrature_eps(0.8, s2.alpha_bar(t), 1.5, 0.4);
    CHECK(shifted.predict_epsilon(ImageTensor(1, 1, 0.8), t).values()[0] ==
          doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("oracle is affine in x_t with a step-only slope") {
  const auto s = build_linear_schedule(1000, 1e-4, 0.02);
  const GaussianOracleDenoiser oracle(testing::random_tensor(4, 4, 1), 0.5, s);
  std::mt19937 gen(3);
  for (int trial = 0; trial < 40; ++trial) {
    const int t = static_cast<int>(gen() % 1000);
    const auto x = testing::random_tensor(4, 4, gen());
    const auto y = testing::random_tensor(4, 4, gen());
    const ImageTensor lhs = oracle.predict_epsilon(x, t) - oracle.predict_epsilon(y, t);
    const ImageTensor rhs = oracle.epsilon_slope(t) * (x - y);
    CHECK(l2_norm(lhs - rhs) <= 1e-12 * l2_norm(rhs) + 1e-15);
  }
  CHECK_THROWS_AS(oracle.predict_epsilon(ImageTensor(4, 4), 1000), ContractError);
  CHECK_THROWS_AS(GaussianOracleDenoiser(ImageTensor(1, 1), 0.0, s), ConfigError);
}

TEST_CASE("zero-parameter network predicts zero") {
  const SmallEpsNet net(tiny_shape());
  const auto out = net.predict_epsilon(testing::random_tensor(2, 3, 8, 5.0), 17);
  for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("network forward pass is deterministic and backend independent") {
  auto a = SmallEpsNet::initialized(tiny_shape(), 123);
  auto b = SmallEpsNet::initialized(tiny_shape(), 123);
  const auto x = testing::random_tensor(2, 3, 2);
  CHECK(a.predict_epsilon(x, 10) == b.predict_epsilon(x, 10));
  a.set_backend(Backend::kSerial);
  b.set_backend(Backend::kOpenMP);
  CHECK(a.predict_epsilon(x, 10) == b.predict_epsilon(x, 10));
  CHECK(a.parameter_count() == 7 * (18 + 4) + 7 + 5 * 7 + 5 + 18 * 5 + 18 + 5);
  CHECK_THROWS_AS(a.predict_epsilon(ImageTensor(3, 2), 0), ContractError);
  CHECK_THROWS_AS(a.predict_epsilon(x, 50), ContractError);
}

TEST_CASE("non-finite activations are reported with the layer") {
  auto net = SmallEpsNet::initialized(tiny_shape(), 1);
  // First weight of the second layer (hidden 7 -> 5).
  const std::size_t offset = 7 * 22 + 7;
  net.parameters()[offset] = std::numeric_limits<double>::infinity();
  try {
    net.predict_epsilon(testing::random_tensor(2, 3, 1), 3);
    FAIL("expected a numerical fault");
  } catch (const NumericalFault& e) {
    CHECK(e.index() == 1);
    CHECK(e.location() == "layer 1");
  }
}

TEST_CASE("analytic gradient matches central finite differences") {
  auto net = SmallEpsNet::initialized(tiny_shape(), 77);
  // Non-zero gate and biases so every parameter group carries gradient.
  std::mt19937_64 gen(1);
  std::normal_distribution<double> nd(0.0, 0.1);
  for (double& p : net.parameters()) p += nd(gen);

  const auto sched = build_linear_schedule(50, 1e-3, 0.05);
  const auto data = gaussian_dataset(testing::random_tensor(2, 3, 4), 0.6, 2);
  const BatchDraw batch = draw_batch(data, sched, 9, 0, 4);
  std::vector<double> grad(net.parameter_count());
  const double loss = batch_loss_and_gradient(net, sched, batch, grad);
  CHECK(loss == doctest::Approx(batch_loss(net, sched, batch)).epsilon(1e-12));

  std::uniform_int_distribution<std::size_t> pick(0, net.parameter_count() - 1);
  std::vector<std::size_t> indices;
  for (int k = 0; k < 20; ++k) indices.push_back(pick(gen));
  // Always include the skip gate.
  indices.push_back(net.parameter_count() - 1);
  constexpr double h = 1e-5;
  for (std::size_t i : indices) {
    const double saved = net.parameters()[i];
    net.parameters()[i] = saved + h;
    const double up = batch_loss(net, sched, batch);
    net.parameters()[i] = saved - h;
    const double down = batch_loss(net, sched, batch);
    net.parameters()[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double scale = std::max(std::abs(fd), std::abs(grad[i]));
    CAPTURE(i);
    CHECK(std::abs(fd - grad[i]) <= 1e-4 * scale);
  }
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const auto sched = build_linear_schedule(50, 1e-3, 0.05);
  const auto net = SmallEpsNet::initialized(tiny_shape(), 5);
  const auto data = gaussian_dataset(ImageTensor(2, 3, 0.0), 1.0, 1);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.steps = 20;
  cfg.batch_size = 2;
  for (Optimizer opt : {Optimizer::kSgd, Optimizer::kAdam}) {
    cfg.optimizer = opt;
    const auto result = train_denoiser(net, data, sched, cfg);
    CHECK(std::equal(result.net.parameters().begin(), result.net.parameters().end(),
                     net.parameters().begin()));
    REQUIRE(result.loss_history.size() == 20);
    // Every recorded loss is the loss of the untouched network on that batch.
    for (std::size_t step = 0; step < 20; ++step) {
      CHECK(result.loss_history[step] ==
            doctest::Approx(batch_loss(net, sched, draw_batch(data, sched, cfg.seed, step, 2)))
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("training on a single image reduces the smoothed loss") {
  const auto image = blob_faces(8, 8, 3).sample(0);
  const TensorDataset data({image});
  const auto sched = build_linear_schedule(1000, 1e-4, 0.02);
  EpsNetShape shape;
  shape.height = 8;
  shape.width = 8;
  shape.hidden = {64};
  TrainConfig cfg;
  cfg.steps = 500;
  cfg.batch_size = 4;
  const auto result = train_denoiser(SmallEpsNet::initialized(shape, 2), data, sched, cfg);
  const auto smooth = smooth_losses(result.loss_history, 50);
  CHECK(smooth.back() < smooth[49]);
}

TEST_CASE("trained scalar network approaches the Gaussian oracle") {
  const auto sched = build_linear_schedule(100, 1e-3, 0.05);
  const auto data = gaussian_dataset(ImageTensor(1, 1, 0.0), 1.0, 4);
  const GaussianOracleDenoiser oracle(ImageTensor(1, 1, 0.0), 1.0, sched);
  EpsNetShape shape;
  shape.height = 1;
  shape.width = 1;
  shape.hidden = {16};
  shape.steps = 100;

  // Held-out x_t drawn from the data's forward marginals.
  const auto held_out = draw_batch(data, sched, 777, 0, 200);
  auto deviation = [&](const SmallEpsNet& net) {
    double sum = 0.0;
    for (std::size_t b = 0; b < held_out.x0.size(); ++b) {
      const auto x_t = forward_marginal(sched, held_out.x0[b], held_out.t[b], held_out.eps[b]);
      const auto d = net.predict_epsilon(x_t, held_out.t[b]) - oracle.predict_epsilon(x_t, held_out.t[b]);
      sum += l2_norm(d) * l2_norm(d);
    }
    return sum / 600.0;
  };
  auto oracle_mse = [&](const BatchDraw& batch) {
    double sum = 0.0;
    for (std::size_t b = 0; b < batch.x0.size(); ++b) {
      const auto x_t = forward_marginal(sched, batch.x0[b], batch.t[b], batch.eps[b]);
      const auto d = oracle.predict_epsilon(x_t, batch.t[b]) - batch.eps[b];
      sum += l2_norm(d) * l2_norm(d);
    }
    return sum / static_cast<double>(3 * batch.x0.size());
  };

  const auto init = SmallEpsNet::initialized(shape, 8);
  TrainConfig cfg;
  cfg.steps = 1000;
  cfg.batch_size = 16;
  cfg.learning_rate = 3e-3;
  const auto early = train_denoiser(init, data, sched, [&] { auto c = cfg; c.steps = 100; return c; }());
  const auto late = train_denoiser(init, data, sched, cfg);
  const double d0 = deviation(init);
  const double d1 = deviation(early.net);
  const double d2 = deviation(late.net);
  CHECK(d1 < d0);
  CHECK(d2 < d1);

  // On fresh data the oracle has the lowest epsilon-prediction error.
  const auto fresh = draw_batch(data, sched, 4242, 0, 4000);
  const double o = oracle_mse(fresh);
  const double n = batch_loss(late.net, sched, fresh);
  CHECK(o < n);
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
  const auto sched = build_linear_schedule(50, 1e-3, 0.05);
  const auto data = blob_faces(8, 8, 1);
  EpsNetShape shape;
  shape.height = 8;
  shape.width = 8;
  shape.hidden = {16};
  shape.steps = 50;
  TrainConfig cfg;
  cfg.steps = 30;
  cfg.batch_size = 3;
  cfg.seed = 99;
  const auto a = train_denoiser(SmallEpsNet::initialized(shape, 1), data, sched, cfg);
  auto net_b = SmallEpsNet::initialized(shape, 1);
  net_b.set_backend(a.net.backend() == Backend::kSerial ? Backend::kOpenMP : Backend::kSerial);
  const auto b = train_denoiser(net_b, data, sched, cfg);
  CHECK(a.loss_history == b.loss_history);
  CHECK(std::equal(a.net.parameters().begin(), a.net.parameters().end(), b.net.parameters().begin()));

  cfg.seed = 100;
  const auto c = train_denoiser(SmallEpsNet::initialized(shape, 1), data, sched, cfg);
  CHECK(c.loss_history != a.loss_history);
}

TEST_CASE("divergent training aborts with the step index") {
  const auto sched = build_linear_schedule(50, 1e-3, 0.05);
  const auto data = gaussian_dataset(ImageTensor(2, 3, 0.0), 1.0, 1);
  TrainConfig cfg;
  cfg.optimizer = Optimizer::kSgd;
  cfg.learning_rate = 1e6;
  cfg.steps = 200;
  try {
    train_denoiser(SmallEpsNet::initialized(tiny_shape(), 3), data, sched, cfg);
    FAIL("expected divergence");
  } catch (const NumericalFault& e) {
    CHECK(e.index() > 0);
    CHECK(e.location().find("training step") == 0);
  }
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("checkpoint layout and round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "chromadiff_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "net.bin";
  const auto net = SmallEpsNet::initialized(tiny_shape(), 31);
  net.save(path);

  const auto bytes = read_file_bytes(path);
  const std::size_t header = 8 + 4 * 6 + 4 * 4;
  REQUIRE(bytes.size() == header + 8 * net.parameter_count());
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "CDEPSNET");
  auto u32 = [&](std::size_t off) {
    return bytes[off] | (bytes[off + 1] << 8) | (bytes[off + 2] << 16) | (bytes[off + 3] << 24);
  };
  CHECK(u32(8) == 1);    // version
  CHECK(u32(12) == 2);   // height
  CHECK(u32(16) == 3);   // width
  CHECK(u32(20) == 4);   // time width
  CHECK(u32(24) == 50);  // steps
  CHECK(u32(28) == 4);   // layer count
  CHECK(u32(32) == 22);
  CHECK(u32(36) == 7);
  CHECK(u32(40) == 5);
  CHECK(u32(44) == 18);
  double first = 0.0;
  std::memcpy(&first, bytes.data() + header, 8);  // host is little-endian here
  CHECK(first == net.parameters()[0]);

  const auto loaded = SmallEpsNet::load(path);
  CHECK(loaded.shape() == net.shape());
  CHECK(std::equal(loaded.parameters().begin(), loaded.parameters().end(), net.parameters().begin()));

  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  write_file_bytes(dir / "bad.bin", truncated);
  CHECK_THROWS_AS(SmallEpsNet::load(dir / "bad.bin"), IoError);
  auto garbage = bytes;
  garbage[0] = 'X';
  write_file_bytes(dir / "bad.bin", garbage);
  CHECK_THROWS_AS(SmallEpsNet::load(dir / "bad.bin"), IoError);
  CHECK_THROWS_AS(SmallEpsNet::load(dir / "missing.bin"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("loss history CSV") {
  const auto path = std::filesystem::temp_directory_path() / "chromadiff_loss.csv";
  write_loss_csv({1.5, 0.1, 1.0 / 3.0}, path);
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  CHECK(line == "step,loss");
  std::getline(is, line);
  CHECK(line == "0,1.5");
  std::getline(is, line);
  CHECK(line == "1,0.10000000000000001");
  std::getline(is, line);
  CHECK(std::stod(line.substr(2)) == 1.0 / 3.0);
  std::filesystem::remove(path);
}
