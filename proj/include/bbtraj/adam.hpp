#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bbtraj/tensor.hpp"

namespace bbtraj {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// A named, mutable view of one parameter tensor's storage.
struct ParamView {
  std::string name;
  std::span<double> values;
};

struct GradView {
  std::string name;
  std::span<const double> values;
};

/// Moment accumulators are created on the first step, one per parameter tensor
/// in the order the views are passed; later steps must pass the same layout.
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<Vector<double>> first_moment;
  std::vector<Vector<double>> second_moment;
};

/// Bias-corrected Adam without weight decay:
///   m = b1 m + (1-b1) g,  v = b2 v + (1-b2) g^2,
///   p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps).
/// Every gradient is checked for finiteness before anything is modified; a
/// gradient that is exactly zero everywhere only advances the step counter.
void adam_step(AdamState& state, std::span<const ParamView> params,
               std::span<const GradView> grads, double lr);

}  // namespace bbtraj
