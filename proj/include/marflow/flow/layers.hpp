#pragma once

#include <functional>

#include "marflow/core/ops.hpp"

// Invertible flow layers. Each forward returns the output together with its
// log-determinant as a one-element tensor; inverses run on any tape and
// take the parameters as plain tensors.
namespace marflow::flow {

template <typename Scalar>
struct LayerOut {
  ad::Var<Scalar> y;
  ad::Var<Scalar> logdet;
};

// y = s * x + b per channel; logdet = H * W * sum(log|s|).
template <typename Scalar>
LayerOut<Scalar> actnorm_forward(ad::Var<Scalar> x, ad::Var<Scalar> s, ad::Var<Scalar> b);
template <typename Scalar>
ad::Var<Scalar> actnorm_inverse(ad::Var<Scalar> y, const Tensor<Scalar>& s, const Tensor<Scalar>& b);

// y = W x at every pixel; logdet = H * W * log|det W|, or exactly 0 when
// the matrix is frozen (it is orthogonal by construction).
template <typename Scalar>
LayerOut<Scalar> invconv_forward(ad::Var<Scalar> x, ad::Var<Scalar> w, bool frozen);
template <typename Scalar>
ad::Var<Scalar> invconv_inverse(ad::Var<Scalar> y, const Tensor<Scalar>& w);

// Maps concat(x_a, cond) to 2 * C_b channels: raw log-scales then shifts.
template <typename Scalar>
using CouplingNet = std::function<ad::Var<Scalar>(ad::Var<Scalar>)>;

// Affine coupling on the channel halves (x_a, x_b):
//   log_s = 2 tanh(raw / 2), y_b = x_b * exp(log_s) + t, y_a = x_a.
template <typename Scalar>
LayerOut<Scalar> coupling_forward(ad::Var<Scalar> x, ad::Var<Scalar> cond, const CouplingNet<Scalar>& net);
template <typename Scalar>
ad::Var<Scalar> coupling_inverse(ad::Var<Scalar> y, ad::Var<Scalar> cond, const CouplingNet<Scalar>& net);

}  // namespace marflow::flow
