#pragma once

#include <Eigen/LU>

#include "marflow/flow/model.hpp"
#include "test_util.hpp"

namespace marflow::testing {

// Replaces every 1x1 convolution matrix with the identity.
template <typename Scalar>
void set_identity_invconv(flow::RetinexFlow<Scalar>& model) {
  for (auto& p : model.parameters()) {
    if (p.name.ends_with("invconv.weight")) p.value.matrix(p.value.dim(0)).setIdentity();
  }
}

template <typename Scalar>
Tensor<Scalar> flatten(const std::vector<Tensor<Scalar>>& parts) {
  Index n = 0;
  for (const auto& p : parts) n += p.size();
  Tensor<Scalar> out({n});
  Index k = 0;
  for (const auto& p : parts)
    for (Index i = 0; i < p.size(); ++i) out[k++] = p[i];
  return out;
}

template <typename Scalar>
std::vector<Tensor<Scalar>> unflatten(const Tensor<Scalar>& flat, const std::vector<Shape>& shapes) {
  std::vector<Tensor<Scalar>> out;
  Index k = 0;
  for (const Shape& s : shapes) {
    Tensor<Scalar> t(s);
    for (Index i = 0; i < t.size(); ++i) t[i] = flat[k++];
    out.push_back(std::move(t));
  }
  return out;
}

// log|det| of the central-difference Jacobian of y -> flattened z.
inline double numeric_logdet(const flow::RetinexFlow<double>& model, const Tensor<double>& y, const Tensor<double>& x,
                             double step = 1e-6) {
  const Index d = y.size();
  Eigen::MatrixXd jac(d, d);
  for (Index j = 0; j < d; ++j) {
    Tensor<double> yp = y, ym = y;
    yp[j] += step;
    ym[j] -= step;
    const Tensor<double> zp = flatten(model.forward(yp, x).z), zm = flatten(model.forward(ym, x).z);
    for (Index i = 0; i < d; ++i) jac(i, j) = (zp[i] - zm[i]) / (2.0 * step);
  }
  return std::log(std::abs(Eigen::PartialPivLU<Eigen::MatrixXd>(jac).determinant()));
}

// Input image with strictly positive sum, as the encoder requires.
template <typename Scalar = double>
Tensor<Scalar> positive_image(Index h, Index w, unsigned seed) {
  return random_tensor<Scalar>({1, h, w}, seed, 0.05, 1.0);
}

}  // namespace marflow::testing
