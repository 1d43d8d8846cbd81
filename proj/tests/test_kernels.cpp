#include <doctest.h>

#include <random>
#include <vector>

#include "chromadiff/kernels.hpp"
#include "chromadiff/rng.hpp"
#include "test_support.hpp"

using namespace chromadiff;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (double& x : v) x = nd(gen);
  return v;
}

}  // namespace

TEST_CASE("OpenMP kernels are bit-identical to the serial reference") {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<std::size_t> dim(1, 700);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t rows = dim(gen);
    const std::size_t cols = dim(gen);
    CAPTURE(rows);
    CAPTURE(cols);
    const auto w = random_vec(rows * cols, gen);
    const auto b = random_vec(rows, gen);
    const auto x = random_vec(cols, gen);
    const auto d = random_vec(rows, gen);

    std::vector<double> y1(rows), y2(rows);
    kernels::serial::affine(w, b, x, y1);
    kernels::omp::affine(w, b, x, y2);
    CHECK(y1 == y2);

    auto g1 = random_vec(cols, gen);
    auto g2 = g1;
    kernels::serial::transposed_accumulate(w, d, g1);
    kernels::omp::transposed_accumulate(w, d, g2);
    CHECK(g1 == g2);

    auto w1 = w;
    auto w2 = w;
    kernels::serial::rank1_update(w1, d, x);
    kernels::omp::rank1_update(w2, d, x);
    CHECK(w1 == w2);

    std::vector<double> n1(rows * 13), n2(rows * 13);
    const CounterRng rng(trial, 3);
    kernels::serial::fill_normal(rng, 1000, n1);
    kernels::omp::fill_normal(rng, 1000, n2);
    CHECK(n1 == n2);
  }
}

TEST_CASE("affine kernel matches a direct evaluation") {
  const std::vector<double> w{1, 2, 3, 4, 5, 6};  // 2 x 3
  const std::vector<double> b{0.5, -1};
  const std::vector<double> x{1, 0, -1};
  std::vector<double> y(2);
  kernels::affine(default_backend(), w, b, x, y);
  CHECK(y[0] == doctest::Approx(0.5 + 1 - 3));
  CHECK(y[1] == doctest::Approx(-1 + 4 - 6));

  std::vector<double> g{0, 0, 0};
  kernels::transposed_accumulate(default_backend(), w, std::vector<double>{1, 2}, g);
  CHECK(g == std::vector<double>{9, 12, 15});
}

TEST_CASE("counter RNG draws do not depend on request order") {
  const CounterRng rng(42, 0);
  std::vector<double> forward(100), backward(100);
  for (std::size_t i = 0; i < 100; ++i) forward[i] = rng.normal(i);
  for (std::size_t i = 100; i-- > 0;) backward[i] = rng.normal(i);
  CHECK(forward == backward);

  std::vector<double> chunked(100);
  kernels::serial::fill_normal(rng, 0, std::span<double>(chunked).subspan(0, 37));
  kernels::serial::fill_normal(rng, 37, std::span<double>(chunked).subspan(37));
  CHECK(chunked == forward);

  CHECK(CounterRng(42, 1).normal(0) != rng.normal(0));
  CHECK(CounterRng(43, 0).normal(0) != rng.normal(0));
}

TEST_CASE("counter RNG normals have unit moments") {
  const CounterRng rng(5, 9);
  std::vector<double> x(200000);
  kernels::serial::fill_normal(rng, 0, x);
  const auto m = testing::moments(x);
  CHECK(std::abs(m.mean) < 3.0 * m.mean_se);
  CHECK(std::abs(m.variance - 1.0) < 3.0 * m.variance_se);
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const double u = rng.uniform(i);
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
}
