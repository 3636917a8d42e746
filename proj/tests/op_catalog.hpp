#pragma once

#include <memory>

#include "marflow/core/gradcheck.hpp"
#include "marflow/flow/layers.hpp"
#include "test_util.hpp"

namespace marflow::testing {

// Every differentiable op with input shapes and a sampling range that keeps
// it inside its domain.
struct OpCase {
  const char* name;
  std::vector<Shape> shapes;
  ad::DiffFn fn;
  double lo = -1.0, hi = 1.0;
};

#define MARFLOW_OP [](ad::Tape<double>&, std::span<const ad::Var<double>> in)

inline std::vector<OpCase> op_catalog() {
  using namespace marflow::ad;
  // Small fixed coupling network: conv3x3 -> tanh -> conv3x3.
  const auto w1 = std::make_shared<Tensor<double>>(random_tensor({4, 3, 3, 3}, 901, -0.5, 0.5));
  const auto w2 = std::make_shared<Tensor<double>>(random_tensor({2, 4, 3, 3}, 902, -0.5, 0.5));
  const flow::CouplingNet<double> net = [w1, w2](Var<double> x) {
    Tape<double>& t = *x.tape;
    return conv2d(tanh(conv2d(x, t.constant(*w1))), t.constant(*w2));
  };
  return {
      {"add", {{2, 3, 3}, {2, 3, 3}}, MARFLOW_OP { return add(in[0], in[1]); }},
      {"sub", {{2, 3, 3}, {2, 3, 3}}, MARFLOW_OP { return sub(in[0], in[1]); }},
      {"mul", {{2, 3, 3}, {2, 3, 3}}, MARFLOW_OP { return mul(in[0], in[1]); }},
      {"scale", {{2, 3, 3}}, MARFLOW_OP { return scale(in[0], 1.5); }},
      {"add_scalar", {{2, 3, 3}}, MARFLOW_OP { return add_scalar(in[0], 0.5); }},
      {"exp", {{2, 3, 3}}, MARFLOW_OP { return exp(in[0]); }},
      {"log", {{2, 3, 3}}, MARFLOW_OP { return ad::log(in[0]); }, 0.5, 2.0},
      {"log_abs", {{4}}, MARFLOW_OP { return log_abs(in[0]); }, 0.5, 2.0},
      {"tanh", {{2, 3, 3}}, MARFLOW_OP { return tanh(in[0]); }},
      {"leaky_relu", {{2, 3, 3}}, MARFLOW_OP { return leaky_relu(in[0]); }},
      {"sum", {{2, 3, 3}}, MARFLOW_OP { return sum(in[0]); }},
      {"sum_squares", {{2, 3, 3}}, MARFLOW_OP { return sum_squares(in[0]); }},
      {"conv2d", {{2, 5, 5}, {3, 2, 3, 3}, {3}}, MARFLOW_OP { return conv2d(in[0], in[1], in[2]); }},
      {"conv2d_stride2", {{2, 6, 6}, {3, 2, 3, 3}, {3}}, MARFLOW_OP { return conv2d(in[0], in[1], in[2], 2); }},
      {"conv2d_1x1", {{3, 4, 4}, {2, 3, 1, 1}}, MARFLOW_OP { return conv2d(in[0], in[1], 1); }},
      {"channel_mix", {{3, 4, 4}, {3, 3}}, MARFLOW_OP { return channel_mix(in[0], in[1]); }},
      {"channel_affine", {{3, 4, 4}, {3}, {3}}, MARFLOW_OP { return channel_affine(in[0], in[1], in[2]); }},
      {"logabsdet", {{4, 4}}, MARFLOW_OP { return logabsdet(in[0]); }},
      {"concat", {{1, 3, 3}, {2, 3, 3}}, MARFLOW_OP { return concat_channels({in[0], in[1]}); }},
      {"slice", {{4, 3, 3}}, MARFLOW_OP { return slice_channels(in[0], 1, 2); }},
      {"squeeze", {{2, 4, 4}}, MARFLOW_OP { return squeeze2(in[0]); }},
      {"unsqueeze", {{8, 2, 2}}, MARFLOW_OP { return unsqueeze2(in[0]); }},
      {"fde_normalize", {{1, 4, 4}}, MARFLOW_OP { return fde_normalize(in[0]); }, 0.1, 1.0},
      {"fde_gradients", {{2, 4, 5}}, MARFLOW_OP { return fde_gradients(in[0]); }},
      {"actnorm", {{3, 4, 4}, {3}, {3}},
       MARFLOW_OP {
         const auto o = flow::actnorm_forward(in[0], add_scalar(in[1], 2.0), in[2]);
         return add(sum(o.y), o.logdet);
       }},
      {"invconv", {{3, 4, 4}, {3, 3}},
       MARFLOW_OP {
         const auto o = flow::invconv_forward(in[0], in[1], false);
         return add(sum_squares(o.y), o.logdet);
       }},
      {"coupling", {{2, 4, 4}, {2, 4, 4}},
       [net](ad::Tape<double>&, std::span<const ad::Var<double>> in) {
         const auto o = flow::coupling_forward(in[0], in[1], net);
         return add(sum_squares(o.y), o.logdet);
       }},
  };
}

#undef MARFLOW_OP

}  // namespace marflow::testing
