#pragma once

#include <optional>
#include <span>
#include <vector>

#include "marflow/core/tape.hpp"

// Differentiable operations recorded on a Tape. Binary elementwise ops
// require identical shapes; the only broadcast is against a plain scalar.
namespace marflow::ad {

inline constexpr double kLeakySlope = 0.2;

template <typename Scalar> Var<Scalar> add(Var<Scalar> a, Var<Scalar> b);
template <typename Scalar> Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b);
template <typename Scalar> Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b);
template <typename Scalar> Var<Scalar> scale(Var<Scalar> a, Scalar factor);
template <typename Scalar> Var<Scalar> add_scalar(Var<Scalar> a, Scalar offset);
template <typename Scalar> Var<Scalar> exp(Var<Scalar> a);
// Throws NumericalError on any non-positive element.
template <typename Scalar> Var<Scalar> log(Var<Scalar> a);
template <typename Scalar> Var<Scalar> log_abs(Var<Scalar> a);
template <typename Scalar> Var<Scalar> tanh(Var<Scalar> a);
template <typename Scalar> Var<Scalar> leaky_relu(Var<Scalar> a, Scalar slope = Scalar(kLeakySlope));

// Reductions to a one-element tensor.
template <typename Scalar> Var<Scalar> sum(Var<Scalar> a);
template <typename Scalar> Var<Scalar> sum_squares(Var<Scalar> a);

// 2-D convolution of a (Cin, H, W) input with an (Cout, Cin, k, k) kernel,
// zero padding k/2. stride 1 keeps the spatial size, stride 2 halves it.
template <typename Scalar>
Var<Scalar> conv2d(Var<Scalar> x, Var<Scalar> weight, std::optional<Var<Scalar>> bias, int stride);
template <typename Scalar>
Var<Scalar> conv2d(Var<Scalar> x, Var<Scalar> weight, Var<Scalar> bias, int stride = 1) {
  return conv2d(x, weight, std::optional<Var<Scalar>>(bias), stride);
}
template <typename Scalar>
Var<Scalar> conv2d(Var<Scalar> x, Var<Scalar> weight, int stride = 1) {
  return conv2d(x, weight, std::optional<Var<Scalar>>(), stride);
}

// y[:, p] = W * x[:, p] at every pixel p, W is (C, C).
template <typename Scalar> Var<Scalar> channel_mix(Var<Scalar> x, Var<Scalar> w);
// y[c] = scale[c] * x[c] + bias[c]; scale and bias have shape (C).
template <typename Scalar> Var<Scalar> channel_affine(Var<Scalar> x, Var<Scalar> scale, Var<Scalar> bias);
// log|det W| for a square matrix; throws NumericalError when singular.
template <typename Scalar> Var<Scalar> logabsdet(Var<Scalar> w);

template <typename Scalar> Var<Scalar> concat_channels(std::span<const Var<Scalar>> parts);
template <typename Scalar> Var<Scalar> concat_channels(std::initializer_list<Var<Scalar>> parts) {
  std::vector<Var<Scalar>> v(parts);
  return concat_channels<Scalar>(std::span<const Var<Scalar>>(v));
}
template <typename Scalar> Var<Scalar> slice_channels(Var<Scalar> x, Index begin, Index count);

// (C, H, W) -> (4C, H/2, W/2). Output channel 4c+q holds the q-th corner
// of each 2x2 block of input channel c, corners ordered top-left,
// top-right, bottom-left, bottom-right.
template <typename Scalar> Var<Scalar> squeeze2(Var<Scalar> x);
template <typename Scalar> Var<Scalar> unsqueeze2(Var<Scalar> x);

// N = d * X / sum(X) with d the element count.
template <typename Scalar> Var<Scalar> fde_normalize(Var<Scalar> x);
// Forward differences with zero at the trailing edge: channels [0, C) hold
// the difference along columns (x[., j+1] - x[., j]), channels [C, 2C) the
// difference along rows. (C, H, W) -> (2C, H, W).
template <typename Scalar> Var<Scalar> fde_gradients(Var<Scalar> x);

// Plain-tensor forms of the layout ops, shared with non-tape code.
template <typename Scalar> Tensor<Scalar> squeeze2(const Tensor<Scalar>& x);
template <typename Scalar> Tensor<Scalar> unsqueeze2(const Tensor<Scalar>& x);

}  // namespace marflow::ad
