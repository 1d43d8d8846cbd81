#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "chromadiff/tensor.hpp"

namespace chromadiff {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  int steps = 1000;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t seeds = 5;
  double tolerance = 1e-9;
};

/// ||a - b|| / ||b||, or ||a|| when b is zero.
double relative_difference(const ImageTensor& a, const ImageTensor& b);

/// Oracle-chain property suite: zero-injection identity, seed invariance,
/// scale linearity and window additivity of the injection response (both
/// sampler modes), plus a finite-difference gradient check of the network.
std::vector<CheckResult> run_property_suite(const VerifyOptions& opts);

}  // namespace chromadiff
