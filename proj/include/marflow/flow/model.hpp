#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>

#include "marflow/flow/config.hpp"
#include "marflow/flow/layers.hpp"
#include "marflow/flow/params.hpp"

namespace marflow::flow {

template <typename Scalar>
struct FlowPass {
  std::vector<ad::Var<Scalar>> z;  // split latents, then the final tensor
  ad::Var<Scalar> logdet;
  bool stopped = false;  // an observer ended the pass early
};

template <typename Scalar>
struct NllPass {
  ad::Var<Scalar> loss;  // -log p(Y | X), nats
  ad::Var<Scalar> logdet;
  Index dims = 0;
};

template <typename Scalar>
struct FlowResult {
  std::vector<Tensor<Scalar>> z;
  double logdet = 0.0;
};

// Called with (actnorm index, actnorm input); returning true ends the pass.
template <typename Scalar>
using ActNormObserver = std::function<bool(std::size_t, const Tensor<Scalar>&)>;

inline double bits_per_dim(double nll, Index dims) { return nll / (static_cast<double>(dims) * std::log(2.0)); }

// Conditional multi-scale flow f(Y; R) with the feature decomposition
// encoder R = g(X). Images are (1, H, W) with H and W divisible by 2^L.
template <typename Scalar>
class RetinexFlow {
 public:
  using Var = ad::Var<Scalar>;
  using TensorT = Tensor<Scalar>;

  RetinexFlow(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterSet<Scalar>& parameters() { return params_; }
  const ParameterSet<Scalar>& parameters() const { return params_; }
  bool actnorm_initialized() const { return actnorm_initialized_; }
  void set_actnorm_initialized(bool v) { actnorm_initialized_ = v; }
  std::size_t actnorm_count() const { return static_cast<std::size_t>(config_.levels * config_.steps); }

  // Tape-level passes.
  Var encode(Binding<Scalar>& b, Var x) const;
  std::vector<Var> condition(Binding<Scalar>& b, Var r_coarse) const;
  FlowPass<Scalar> forward(Binding<Scalar>& b, Var y, const std::vector<Var>& cond,
                           const ActNormObserver<Scalar>* observer = nullptr) const;
  Var inverse(Binding<Scalar>& b, std::vector<Var> z, const std::vector<Var>& cond) const;
  // 0.5 |z|^2 + 0.5 d log(2 pi) - logdet.
  NllPass<Scalar> nll(Binding<Scalar>& b, Var y, Var x) const;

  // Non-recording conveniences.
  TensorT encode(const TensorT& x) const;
  FlowResult<Scalar> forward(const TensorT& y, const TensorT& x) const;
  TensorT inverse(const std::vector<TensorT>& z, const TensorT& x) const;
  double nll(const TensorT& y, const TensorT& x) const;
  // z = tau * eps with eps standard normal from `seed`; output clamped to [0, 1].
  TensorT infer(const TensorT& x, double tau = 0.0, std::uint64_t seed = 0) const;
  std::vector<Shape> latent_shapes(Index height, Index width) const;

  // Sets every actnorm so that its output over the batch has zero mean and
  // unit variance per channel. Refused once initialized.
  void initialize_actnorm(std::span<const TensorT> ys, std::span<const TensorT> xs);

  // Random perturbation of every trainable parameter (actnorm scales are
  // multiplied by exp(noise), frozen matrices are kept).
  void perturb(std::uint64_t seed, double magnitude);

  template <typename Other>
  RetinexFlow<Other> cast() const {
    RetinexFlow<Other> out(config_, 0);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      out.parameters()[i].value = params_[i].value.template cast<Other>();
    }
    out.set_actnorm_initialized(actnorm_initialized_);
    return out;
  }

 private:
  struct Conv {
    std::size_t weight, bias;
    int stride = 1;
  };
  struct Rdb {
    std::vector<Conv> convs;
  };
  struct Step {
    std::size_t an_scale, an_bias, inv_weight;
    std::array<Conv, 3> net;
  };

  Conv add_conv(const std::string& name, Index cin, Index cout, Index k, int stride, double gain, bool zero);
  Var apply(Binding<Scalar>& b, const Conv& c, Var x) const;
  Var dense_block(Binding<Scalar>& b, const Rdb& rdb, Var x) const;
  CouplingNet<Scalar> coupling_net(Binding<Scalar>& b, const Step& s) const;
  Index level_channels(int level) const;
  void check_image(const TensorT& t, const char* what) const;

  ModelConfig config_;
  ParameterSet<Scalar> params_;
  std::mt19937_64 init_rng_;
  Conv conv_first_{}, trunk_conv_{}, conv_last_{};
  std::vector<std::array<Rdb, 3>> rrdbs_;
  std::vector<Conv> cond_down_;
  std::vector<std::vector<Step>> levels_;
  bool actnorm_initialized_ = false;
};

}  // namespace marflow::flow
