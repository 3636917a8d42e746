#pragma once

#include <random>

#include "marflow/core/tensor.hpp"

namespace marflow::testing {

template <typename Scalar = double>
Tensor<Scalar> random_tensor(Shape shape, unsigned seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<Scalar> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<Scalar>(dist(rng));
  return t;
}

template <typename Scalar>
double max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return static_cast<double>((a.array() - b.array()).abs().maxCoeff());
}

}  // namespace marflow::testing
