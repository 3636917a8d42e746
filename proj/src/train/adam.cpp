#include "marflow/train/adam.hpp"

#include <cmath>

namespace marflow::train {

template <typename Scalar>
bool adam_step(flow::ParameterSet<Scalar>& params, AdamState<Scalar>& state, const AdamConfig& config) {
  for (const auto& p : params) {
    if (p.trainable && !p.grad.all_finite()) return false;
  }
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& p : params) {
      state.m.emplace_back(p.value.shape());
      state.v.emplace_back(p.value.shape());
    }
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(config.beta1, t), c2 = 1.0 - std::pow(config.beta2, t);
  const auto b1 = static_cast<Scalar>(config.beta1), b2 = static_cast<Scalar>(config.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.trainable) continue;
    require_same_shape(p.value, p.grad, "adam_step");
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    const auto g = p.grad.array();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    p.value.array() -= static_cast<Scalar>(config.lr) * (m / static_cast<Scalar>(c1)) /
                       ((v / static_cast<Scalar>(c2)).sqrt() + static_cast<Scalar>(config.eps));
  }
  return true;
}

template <typename Scalar>
double grad_norm(const flow::ParameterSet<Scalar>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (p.trainable) sq += p.grad.array().template cast<double>().square().sum();
  }
  return std::sqrt(sq);
}

template <typename Scalar>
double clip_grad_norm(flow::ParameterSet<Scalar>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (std::isfinite(norm) && norm > max_norm) {
    const auto factor = static_cast<Scalar>(max_norm / norm);
    for (auto& p : params) {
      if (p.trainable) p.grad.array() *= factor;
    }
  }
  return norm;
}

template bool adam_step(flow::ParameterSet<float>&, AdamState<float>&, const AdamConfig&);
template bool adam_step(flow::ParameterSet<double>&, AdamState<double>&, const AdamConfig&);
template double grad_norm(const flow::ParameterSet<float>&);
template double grad_norm(const flow::ParameterSet<double>&);
template double clip_grad_norm(flow::ParameterSet<float>&, double);
template double clip_grad_norm(flow::ParameterSet<double>&, double);

}  // namespace marflow::train
