#include "marflow/flow/layers.hpp"

#include <Eigen/LU>

namespace marflow::flow {
namespace {

template <typename Scalar>
Scalar spatial_size(ad::Var<Scalar> x) {
  return static_cast<Scalar>(x.value().height() * x.value().width());
}

template <typename Scalar>
void require_coupling_shapes(ad::Var<Scalar> x, ad::Var<Scalar> cond) {
  const Tensor<Scalar>& xv = x.value();
  if (xv.rank() != 3 || xv.channels() % 2 != 0) {
    throw ShapeError("coupling: expected (C, H, W) with even C, got " + shape_string(xv.shape()));
  }
  const Tensor<Scalar>& cv = cond.value();
  if (cv.rank() != 3 || cv.height() != xv.height() || cv.width() != xv.width()) {
    throw ShapeError("coupling: conditioning " + shape_string(cv.shape()) + " does not match input " +
                     shape_string(xv.shape()));
  }
}

template <typename Scalar>
std::pair<ad::Var<Scalar>, ad::Var<Scalar>> scale_shift(ad::Var<Scalar> xa, ad::Var<Scalar> cond, Index cb,
                                                        const CouplingNet<Scalar>& net) {
  const ad::Var<Scalar> raw = net(ad::concat_channels<Scalar>({xa, cond}));
  if (raw.value().channels() != 2 * cb) throw ShapeError("coupling: network must output 2 * C_b channels");
  const ad::Var<Scalar> log_s = ad::scale(ad::tanh(ad::scale(ad::slice_channels(raw, 0, cb), Scalar(0.5))), Scalar(2));
  return {log_s, ad::slice_channels(raw, cb, cb)};
}

}  // namespace

template <typename Scalar>
LayerOut<Scalar> actnorm_forward(ad::Var<Scalar> x, ad::Var<Scalar> s, ad::Var<Scalar> b) {
  const ad::Var<Scalar> y = ad::channel_affine(x, s, b);
  return {y, ad::scale(ad::sum(ad::log_abs(s)), spatial_size(x))};
}

template <typename Scalar>
ad::Var<Scalar> actnorm_inverse(ad::Var<Scalar> y, const Tensor<Scalar>& s, const Tensor<Scalar>& b) {
  for (Index c = 0; c < s.size(); ++c) {
    if (s[c] == Scalar(0)) throw NumericalError("actnorm: zero scale in channel " + std::to_string(c));
  }
  Tensor<Scalar> inv(s.shape()), shift(b.shape());
  inv.array() = s.array().inverse();
  shift.array() = -b.array() * inv.array();
  ad::Tape<Scalar>& t = *y.tape;
  return ad::channel_affine(y, t.constant(std::move(inv)), t.constant(std::move(shift)));
}

template <typename Scalar>
LayerOut<Scalar> invconv_forward(ad::Var<Scalar> x, ad::Var<Scalar> w, bool frozen) {
  const ad::Var<Scalar> y = ad::channel_mix(x, w);
  if (frozen) return {y, x.tape->constant(Tensor<Scalar>({1}))};
  return {y, ad::scale(ad::logabsdet(w), spatial_size(x))};
}

template <typename Scalar>
ad::Var<Scalar> invconv_inverse(ad::Var<Scalar> y, const Tensor<Scalar>& w) {
  const Index c = w.dim(0);
  const Eigen::MatrixXd wd = w.matrix(c).template cast<double>();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(wd);
  if (!std::isfinite(lu.determinant()) || std::abs(lu.determinant()) < 1e-300) {
    throw NumericalError("invconv: singular weight matrix");
  }
  Tensor<Scalar> inv({c, c});
  inv.matrix(c) = lu.inverse().cast<Scalar>();
  return ad::channel_mix(y, y.tape->constant(std::move(inv)));
}

template <typename Scalar>
LayerOut<Scalar> coupling_forward(ad::Var<Scalar> x, ad::Var<Scalar> cond, const CouplingNet<Scalar>& net) {
  require_coupling_shapes(x, cond);
  const Index cb = x.value().channels() / 2;
  const ad::Var<Scalar> xa = ad::slice_channels(x, 0, cb), xb = ad::slice_channels(x, cb, cb);
  const auto [log_s, t] = scale_shift(xa, cond, cb, net);
  const ad::Var<Scalar> yb = ad::add(ad::mul(xb, ad::exp(log_s)), t);
  return {ad::concat_channels<Scalar>({xa, yb}), ad::sum(log_s)};
}

template <typename Scalar>
ad::Var<Scalar> coupling_inverse(ad::Var<Scalar> y, ad::Var<Scalar> cond, const CouplingNet<Scalar>& net) {
  require_coupling_shapes(y, cond);
  const Index cb = y.value().channels() / 2;
  const ad::Var<Scalar> ya = ad::slice_channels(y, 0, cb), yb = ad::slice_channels(y, cb, cb);
  const auto [log_s, t] = scale_shift(ya, cond, cb, net);
  const ad::Var<Scalar> xb = ad::mul(ad::sub(yb, t), ad::exp(ad::scale(log_s, Scalar(-1))));
  return ad::concat_channels<Scalar>({ya, xb});
}

#define MARFLOW_INSTANTIATE_LAYERS(T)                                                                   \
  template LayerOut<T> actnorm_forward(ad::Var<T>, ad::Var<T>, ad::Var<T>);                             \
  template ad::Var<T> actnorm_inverse(ad::Var<T>, const Tensor<T>&, const Tensor<T>&);                  \
  template LayerOut<T> invconv_forward(ad::Var<T>, ad::Var<T>, bool);                                   \
  template ad::Var<T> invconv_inverse(ad::Var<T>, const Tensor<T>&);                                    \
  template LayerOut<T> coupling_forward(ad::Var<T>, ad::Var<T>, const CouplingNet<T>&);                 \
  template ad::Var<T> coupling_inverse(ad::Var<T>, ad::Var<T>, const CouplingNet<T>&);

MARFLOW_INSTANTIATE_LAYERS(float)
MARFLOW_INSTANTIATE_LAYERS(double)

}  // namespace marflow::flow
