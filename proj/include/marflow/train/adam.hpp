#pragma once

#include <cstdint>
#include <vector>

#include "marflow/flow/params.hpp"

namespace marflow::train {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
  std::vector<Tensor<Scalar>> m, v;
  std::int64_t t = 0;
};

// Bias-corrected Adam on every trainable parameter, using p.grad. A
// non-finite gradient rejects the whole step: nothing changes and false
// is returned.
template <typename Scalar>
bool adam_step(flow::ParameterSet<Scalar>& params, AdamState<Scalar>& state, const AdamConfig& config);

// Global L2 norm over trainable gradients.
template <typename Scalar>
double grad_norm(const flow::ParameterSet<Scalar>& params);
// Rescales gradients so the global norm is at most max_norm; returns the
// norm before clipping.
template <typename Scalar>
double clip_grad_norm(flow::ParameterSet<Scalar>& params, double max_norm);

}  // namespace marflow::train
