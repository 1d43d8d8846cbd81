// Serial reference kernels against their OpenMP counterparts, plus a whole
// frame sweep rendered serially and with frame-level threads.

#include <benchmark/benchmark.h>

#include <vector>

#include "chromadiff/config.hpp"
#include "chromadiff/eps_net.hpp"
#include "chromadiff/kernels.hpp"
#include "chromadiff/pipeline.hpp"
#include "chromadiff/rng.hpp"
#include "chromadiff/sampler.hpp"

namespace cd = chromadiff;

namespace {

std::vector<double> filled(std::size_t n, std::uint64_t stream) {
  std::vector<double> v(n);
  cd::kernels::serial::fill_normal(cd::CounterRng(42, stream), 0, v);
  return v;
}

template <cd::Backend Be>
void BM_Affine(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto cols = static_cast<std::size_t>(state.range(1));
  const auto w = filled(rows * cols, 0);
  const auto b = filled(rows, 1);
  const auto x = filled(cols, 2);
  std::vector<double> y(rows);
  for (auto _ : state) {
    cd::kernels::affine(Be, w, b, x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(rows * cols));
}

template <cd::Backend Be>
void BM_TransposedAccumulate(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto cols = static_cast<std::size_t>(state.range(1));
  const auto w = filled(rows * cols, 3);
  const auto d = filled(rows, 4);
  std::vector<double> g(cols);
  for (auto _ : state) {
    cd::kernels::transposed_accumulate(Be, w, d, g);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(rows * cols));
}

template <cd::Backend Be>
void BM_FillNormal(benchmark::State& state) {
  std::vector<double> out(static_cast<std::size_t>(state.range(0)));
  const cd::CounterRng rng(7, 0);
  std::uint64_t offset = 0;
  for (auto _ : state) {
    cd::kernels::fill_normal(Be, rng, offset, out);
    offset += out.size();
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <cd::Backend Be>
void BM_NetForward(benchmark::State& state) {
  cd::EpsNetShape shape;  // 32x32, hidden 128-128
  auto net = cd::SmallEpsNet::initialized(shape, 1);
  net.set_backend(Be);
  cd::ImageTensor x(32, 32);
  cd::kernels::serial::fill_normal(cd::CounterRng(3, 0), 0, x.values());
  for (auto _ : state) benchmark::DoNotOptimize(net.predict_epsilon(x, 500));
}

template <cd::Backend Be>
void BM_FrameSweep(benchmark::State& state) {
  cd::RunConfig cfg;
  cfg.height = 16;
  cfg.width = 16;
  cfg.schedule.steps = 250;
  cfg.frames = static_cast<std::size_t>(state.range(0));
  const auto s = cd::build_linear_schedule(cfg.schedule);
  const auto d = cd::make_denoiser(cfg, s);
  const auto colors = cd::sweep_colors(cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        cd::render_sequence(*d, s, colors, cfg.injection, cfg.mode, cfg.seed, Be));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

constexpr auto kSerial = cd::Backend::kSerial;
constexpr auto kOpenMP = cd::Backend::kOpenMP;

BENCHMARK(BM_Affine<kSerial>)->Args({128, 3080})->Args({1024, 4096});
BENCHMARK(BM_Affine<kOpenMP>)->Args({128, 3080})->Args({1024, 4096});
BENCHMARK(BM_TransposedAccumulate<kSerial>)->Args({128, 3080})->Args({1024, 4096});
BENCHMARK(BM_TransposedAccumulate<kOpenMP>)->Args({128, 3080})->Args({1024, 4096});
BENCHMARK(BM_FillNormal<kSerial>)->Arg(3072)->Arg(1 << 20);
BENCHMARK(BM_FillNormal<kOpenMP>)->Arg(3072)->Arg(1 << 20);
BENCHMARK(BM_NetForward<kSerial>);
BENCHMARK(BM_NetForward<kOpenMP>);
BENCHMARK(BM_FrameSweep<kSerial>)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FrameSweep<kOpenMP>)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
