#include "chromadiff/kernels.hpp"

#include <algorithm>

#ifdef CHROMADIFF_HAVE_OPENMP
#include <omp.h>
#endif

namespace chromadiff {

Backend default_backend() noexcept {
  return openmp_available() ? Backend::kOpenMP : Backend::kSerial;
}

bool openmp_available() noexcept {
#ifdef CHROMADIFF_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

namespace kernels {
namespace {

// Fixed four-lane accumulation order; shared by both backends so a row's
// result never depends on which backend computed it.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
    s2 += a[j + 2] * b[j + 2];
    s3 += a[j + 3] * b[j + 3];
  }
  for (; j < n; ++j) s0 += a[j] * b[j];
  return (s0 + s1) + (s2 + s3);
}

inline void transposed_slice(const double* w, const double* d, double* g, std::size_t rows,
                             std::size_t cols, std::size_t lo, std::size_t hi) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double di = d[i];
    const double* row = w + i * cols;
    for (std::size_t j = lo; j < hi; ++j) g[j] += row[j] * di;
  }
}

}  // namespace

namespace serial {

void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x,
            std::span<double> y) {
  const std::size_t rows = y.size();
  const std::size_t cols = x.size();
  for (std::size_t i = 0; i < rows; ++i) y[i] = b[i] + dot(w.data() + i * cols, x.data(), cols);
}

void transposed_accumulate(std::span<const double> w, std::span<const double> d,
                           std::span<double> g) {
  transposed_slice(w.data(), d.data(), g.data(), d.size(), g.size(), 0, g.size());
}

void rank1_update(std::span<double> w, std::span<const double> d, std::span<const double> u) {
  const std::size_t cols = u.size();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double di = d[i];
    double* row = w.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) row[j] += di * u[j];
  }
}

void fill_normal(const CounterRng& rng, std::uint64_t offset, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = rng.normal(offset + i);
}

}  // namespace serial

namespace omp {

void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x,
            std::span<double> y) {
  const auto rows = static_cast<long>(y.size());
  const std::size_t cols = x.size();
#pragma omp parallel for schedule(static) if (rows * static_cast<long>(cols) > 32768)
  for (long i = 0; i < rows; ++i) {
    y[i] = b[i] + dot(w.data() + static_cast<std::size_t>(i) * cols, x.data(), cols);
  }
}

void transposed_accumulate(std::span<const double> w, std::span<const double> d,
                           std::span<double> g) {
  const std::size_t rows = d.size();
  const std::size_t cols = g.size();
  constexpr std::size_t kBlock = 256;
  const auto blocks = static_cast<long>((cols + kBlock - 1) / kBlock);
#pragma omp parallel for schedule(static) if (static_cast<long>(rows * cols) > 32768)
  for (long blk = 0; blk < blocks; ++blk) {
    const std::size_t lo = static_cast<std::size_t>(blk) * kBlock;
    transposed_slice(w.data(), d.data(), g.data(), rows, cols, lo, std::min(cols, lo + kBlock));
  }
}

void rank1_update(std::span<double> w, std::span<const double> d, std::span<const double> u) {
  const auto rows = static_cast<long>(d.size());
  const std::size_t cols = u.size();
#pragma omp parallel for schedule(static) if (rows * static_cast<long>(cols) > 32768)
  for (long i = 0; i < rows; ++i) {
    const double di = d[i];
    double* row = w.data() + static_cast<std::size_t>(i) * cols;
    for (std::size_t j = 0; j < cols; ++j) row[j] += di * u[j];
  }
}

void fill_normal(const CounterRng& rng, std::uint64_t offset, std::span<double> out) {
  const auto n = static_cast<long>(out.size());
#pragma omp parallel for schedule(static) if (n > 4096)
  for (long i = 0; i < n; ++i) out[i] = rng.normal(offset + static_cast<std::uint64_t>(i));
}

}  // namespace omp

void affine(Backend be, std::span<const double> w, std::span<const double> b,
            std::span<const double> x, std::span<double> y) {
  be == Backend::kOpenMP ? omp::affine(w, b, x, y) : serial::affine(w, b, x, y);
}

void transposed_accumulate(Backend be, std::span<const double> w, std::span<const double> d,
                           std::span<double> g) {
  be == Backend::kOpenMP ? omp::transposed_accumulate(w, d, g)
                         : serial::transposed_accumulate(w, d, g);
}

void rank1_update(Backend be, std::span<double> w, std::span<const double> d,
                  std::span<const double> u) {
  be == Backend::kOpenMP ? omp::rank1_update(w, d, u) : serial::rank1_update(w, d, u);
}

void fill_normal(Backend be, const CounterRng& rng, std::uint64_t offset, std::span<double> out) {
  be == Backend::kOpenMP ? omp::fill_normal(rng, offset, out)
                         : serial::fill_normal(rng, offset, out);
}

}  // namespace kernels
}  // namespace chromadiff
