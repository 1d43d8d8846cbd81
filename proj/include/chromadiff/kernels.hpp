#pragma once

// Data-parallel inner loops. Each kernel has a serial reference and an
// OpenMP version; both perform the same floating-point operations in the
// same order per output element, so results are bit-identical regardless of
// thread count.

#include <cstddef>
#include <cstdint>
#include <span>

#include "chromadiff/rng.hpp"

namespace chromadiff {

enum class Backend { kSerial, kOpenMP };

/// Default backend: OpenMP when the library was built with it.
Backend default_backend() noexcept;
bool openmp_available() noexcept;

namespace kernels {

namespace serial {

/// y = W x + b, W is rows x cols row-major.
void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x,
            std::span<double> y);
/// g += W^T d, W is rows x cols row-major.
void transposed_accumulate(std::span<const double> w, std::span<const double> d,
                           std::span<double> g);
/// W += d u^T.
void rank1_update(std::span<double> w, std::span<const double> d, std::span<const double> u);
/// out[i] = rng.normal(offset + i).
void fill_normal(const CounterRng& rng, std::uint64_t offset, std::span<double> out);

}  // namespace serial

namespace omp {

void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x,
            std::span<double> y);
void transposed_accumulate(std::span<const double> w, std::span<const double> d,
                           std::span<double> g);
void rank1_update(std::span<double> w, std::span<const double> d, std::span<const double> u);
void fill_normal(const CounterRng& rng, std::uint64_t offset, std::span<double> out);

}  // namespace omp

// Dispatch helpers.
void affine(Backend be, std::span<const double> w, std::span<const double> b,
            std::span<const double> x, std::span<double> y);
void transposed_accumulate(Backend be, std::span<const double> w, std::span<const double> d,
                           std::span<double> g);
void rank1_update(Backend be, std::span<double> w, std::span<const double> d,
                  std::span<const double> u);
void fill_normal(Backend be, const CounterRng& rng, std::uint64_t offset, std::span<double> out);

}  // namespace kernels
}  // namespace chromadiff
