#include "marflow/flow/model.hpp"

#include <Eigen/QR>
#include <numbers>

namespace marflow::flow {
namespace {

template <typename Scalar>
Tensor<Scalar> orthogonal(Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(c, c);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  Tensor<Scalar> out({c, c});
  out.matrix(c) = q.cast<Scalar>();
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

template <typename Scalar>
RetinexFlow<Scalar>::RetinexFlow(const ModelConfig& config, std::uint64_t seed) : config_(config), init_rng_(seed) {
  config_.validate();
  const Index enc = config_.enc_width, growth = config_.growth, cc = config_.cond_channels;

  conv_first_ = add_conv("fde.conv_first", config_.feature_encoder ? 4 : 1, enc, 3, 1, 1.0, false);
  for (int bi = 0; bi < config_.blocks; ++bi) {
    std::array<Rdb, 3> rrdb;
    for (int r = 0; r < 3; ++r) {
      for (int j = 0; j < 3; ++j) {
        const std::string name = "fde.rrdb" + std::to_string(bi) + ".rdb" + std::to_string(r) + ".conv" + std::to_string(j);
        rrdb[r].convs.push_back(add_conv(name, enc + j * growth, j < 2 ? growth : enc, 3, 1, 0.1, false));
      }
    }
    rrdbs_.push_back(std::move(rrdb));
  }
  if (config_.blocks > 0) trunk_conv_ = add_conv("fde.trunk_conv", enc, enc, 3, 1, 1.0, false);
  conv_last_ = add_conv("fde.conv_last", enc, cc, 3, 1, 1.0, false);

  for (int l = 0; l < config_.levels; ++l) {
    cond_down_.push_back(add_conv("cond.down" + std::to_string(l), cc, cc, 3, 2, 1.0, false));
  }

  for (int l = 0; l < config_.levels; ++l) {
    const Index c = level_channels(l);
    std::vector<Step> level;
    for (int k = 0; k < config_.steps; ++k) {
      const std::string prefix = "flow.l" + std::to_string(l) + ".s" + std::to_string(k) + ".";
      Step s{};
      s.an_scale = params_.add(prefix + "actnorm.scale", Tensor<Scalar>({c}, Scalar(1)));
      s.an_bias = params_.add(prefix + "actnorm.bias", Tensor<Scalar>({c}));
      s.inv_weight = params_.add(prefix + "invconv.weight", orthogonal<Scalar>(c, init_rng_), !config_.freeze_invconv);
      s.net[0] = add_conv(prefix + "coupling.conv0", c / 2 + cc, config_.hidden, 3, 1, 1.0, false);
      s.net[1] = add_conv(prefix + "coupling.conv1", config_.hidden, config_.hidden, 1, 1, 1.0, false);
      s.net[2] = add_conv(prefix + "coupling.conv2", config_.hidden, c, 3, 1, 0.0, true);
      level.push_back(s);
    }
    levels_.push_back(std::move(level));
  }
}

template <typename Scalar>
typename RetinexFlow<Scalar>::Conv RetinexFlow<Scalar>::add_conv(const std::string& name, Index cin, Index cout, Index k,
                                                                 int stride, double gain, bool zero) {
  Tensor<Scalar> w({cout, cin, k, k});
  if (!zero) {
    std::normal_distribution<double> normal(0.0, gain * std::sqrt(2.0 / static_cast<double>(cin * k * k)));
    for (Index i = 0; i < w.size(); ++i) w[i] = static_cast<Scalar>(normal(init_rng_));
  }
  Conv c;
  c.weight = params_.add(name + ".weight", std::move(w));
  c.bias = params_.add(name + ".bias", Tensor<Scalar>({cout}));
  c.stride = stride;
  return c;
}

template <typename Scalar>
Index RetinexFlow<Scalar>::level_channels(int level) const {
  Index c = 4;
  for (int l = 0; l < level; ++l) c *= 2;
  return c;
}

template <typename Scalar>
void RetinexFlow<Scalar>::check_image(const TensorT& t, const char* what) const {
  const Index unit = Index(1) << config_.levels;
  if (t.rank() != 3 || t.channels() != 1 || t.height() % unit != 0 || t.width() % unit != 0) {
    throw ShapeError(std::string(what) + ": expected (1, H, W) with H and W divisible by " + std::to_string(unit) +
                     ", got " + shape_string(t.shape()));
  }
}

template <typename Scalar>
typename RetinexFlow<Scalar>::Var RetinexFlow<Scalar>::apply(Binding<Scalar>& b, const Conv& c, Var x) const {
  return ad::conv2d(x, b(c.weight), b(c.bias), c.stride);
}

template <typename Scalar>
typename RetinexFlow<Scalar>::Var RetinexFlow<Scalar>::dense_block(Binding<Scalar>& b, const Rdb& rdb, Var x) const {
  const Var x1 = ad::leaky_relu(apply(b, rdb.convs[0], x));
  const Var x2 = ad::leaky_relu(apply(b, rdb.convs[1], ad::concat_channels<Scalar>({x, x1})));
  const Var x3 = apply(b, rdb.convs[2], ad::concat_channels<Scalar>({x, x1, x2}));
  return ad::add(x, ad::scale(x3, Scalar(0.2)));
}

template <typename Scalar>
typename RetinexFlow<Scalar>::Var RetinexFlow<Scalar>::encode(Binding<Scalar>& b, Var x) const {
  check_image(x.value(), "encode");
  Var input = x;
  if (config_.feature_encoder) {
    const Var n = ad::fde_normalize(x);
    input = ad::concat_channels<Scalar>({x, n, ad::fde_gradients(n)});
  }
  const Var fea = apply(b, conv_first_, input);
  Var trunk = fea;
  for (const auto& rrdb : rrdbs_) {
    Var h = trunk;
    for (const Rdb& rdb : rrdb) h = dense_block(b, rdb, h);
    trunk = ad::add(trunk, ad::scale(h, Scalar(0.2)));
  }
  if (!rrdbs_.empty()) trunk = ad::add(fea, apply(b, trunk_conv_, trunk));
  return apply(b, conv_last_, trunk);
}

template <typename Scalar>
std::vector<typename RetinexFlow<Scalar>::Var> RetinexFlow<Scalar>::condition(Binding<Scalar>& b, Var r_coarse) const {
  std::vector<Var> out;
  Var h = r_coarse;
  for (const Conv& c : cond_down_) {
    h = ad::leaky_relu(apply(b, c, h));
    out.push_back(h);
  }
  return out;
}

template <typename Scalar>
CouplingNet<Scalar> RetinexFlow<Scalar>::coupling_net(Binding<Scalar>& b, const Step& s) const {
  return [this, &b, s](Var in) {
    const Var h = ad::leaky_relu(apply(b, s.net[0], in));
    return apply(b, s.net[2], ad::leaky_relu(apply(b, s.net[1], h)));
  };
}

template <typename Scalar>
FlowPass<Scalar> RetinexFlow<Scalar>::forward(Binding<Scalar>& b, Var y, const std::vector<Var>& cond,
                                              const ActNormObserver<Scalar>* observer) const {
  check_image(y.value(), "flow forward");
  if (cond.size() != levels_.size()) throw ShapeError("flow forward: one conditioning tensor per level required");
  FlowPass<Scalar> out{{}, b.tape().constant(TensorT({1})), false};
  Var h = y;
  std::size_t index = 0;
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    h = ad::squeeze2(h);
    for (const Step& s : levels_[l]) {
      if (observer != nullptr && (*observer)(index, h.value())) {
        out.stopped = true;
        return out;
      }
      ++index;
      const LayerOut<Scalar> an = actnorm_forward(h, b(s.an_scale), b(s.an_bias));
      const LayerOut<Scalar> ic = invconv_forward(an.y, b(s.inv_weight), !params_[s.inv_weight].trainable);
      const LayerOut<Scalar> cp = coupling_forward(ic.y, cond[l], coupling_net(b, s));
      h = cp.y;
      out.logdet = ad::add(ad::add(out.logdet, an.logdet), ad::add(ic.logdet, cp.logdet));
    }
    if (l + 1 < levels_.size()) {
      const Index c = h.value().channels();
      out.z.push_back(ad::slice_channels(h, c / 2, c / 2));
      h = ad::slice_channels(h, 0, c / 2);
    }
  }
  out.z.push_back(h);
  return out;
}

template <typename Scalar>
typename RetinexFlow<Scalar>::Var RetinexFlow<Scalar>::inverse(Binding<Scalar>& b, std::vector<Var> z,
                                                               const std::vector<Var>& cond) const {
  if (z.size() != levels_.size() || cond.size() != levels_.size()) {
    throw ShapeError("flow inverse: expected " + std::to_string(levels_.size()) + " latent parts");
  }
  Var h = z.back();
  for (std::size_t l = levels_.size(); l-- > 0;) {
    if (l + 1 < levels_.size()) {
      if (z[l].value().shape() != h.value().shape()) throw ShapeError("flow inverse: latent shapes do not match");
      h = ad::concat_channels<Scalar>({h, z[l]});
    }
    if (h.value().channels() != level_channels(static_cast<int>(l))) {
      throw ShapeError("flow inverse: latent " + shape_string(h.value().shape()) + " does not fit level " +
                       std::to_string(l));
    }
    for (auto it = levels_[l].rbegin(); it != levels_[l].rend(); ++it) {
      h = coupling_inverse(h, cond[l], coupling_net(b, *it));
      h = invconv_inverse(h, b.value(it->inv_weight));
      h = actnorm_inverse(h, b.value(it->an_scale), b.value(it->an_bias));
    }
    h = ad::unsqueeze2(h);
  }
  return h;
}

template <typename Scalar>
NllPass<Scalar> RetinexFlow<Scalar>::nll(Binding<Scalar>& b, Var y, Var x) const {
  require_same_shape(y.value(), x.value(), "nll");
  const std::vector<Var> cond = condition(b, encode(b, x));
  const FlowPass<Scalar> f = forward(b, config_.residual ? ad::sub(y, x) : y, cond);
  Var sq = ad::sum_squares(f.z[0]);
  for (std::size_t i = 1; i < f.z.size(); ++i) sq = ad::add(sq, ad::sum_squares(f.z[i]));
  const Index d = y.value().size();
  const auto constant = static_cast<Scalar>(0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi));
  const Var loss = ad::add_scalar(ad::sub(ad::scale(sq, Scalar(0.5)), f.logdet), constant);
  return {loss, f.logdet, d};
}

template <typename Scalar>
Tensor<Scalar> RetinexFlow<Scalar>::encode(const TensorT& x) const {
  ad::Tape<Scalar> tape(false);
  Binding<Scalar> b(tape, params_);
  return encode(b, tape.constant(x)).value();
}

template <typename Scalar>
FlowResult<Scalar> RetinexFlow<Scalar>::forward(const TensorT& y, const TensorT& x) const {
  ad::Tape<Scalar> tape(false);
  Binding<Scalar> b(tape, params_);
  const Var xv = tape.constant(x);
  const Var yv = config_.residual ? ad::sub(tape.constant(y), xv) : tape.constant(y);
  const FlowPass<Scalar> f = forward(b, yv, condition(b, encode(b, xv)));
  FlowResult<Scalar> out;
  for (const Var& z : f.z) out.z.push_back(z.value());
  out.logdet = static_cast<double>(f.logdet.value()[0]);
  return out;
}

template <typename Scalar>
Tensor<Scalar> RetinexFlow<Scalar>::inverse(const std::vector<TensorT>& z, const TensorT& x) const {
  ad::Tape<Scalar> tape(false);
  Binding<Scalar> b(tape, params_);
  std::vector<Var> zv;
  for (const TensorT& t : z) zv.push_back(tape.constant(t));
  const Var xv = tape.constant(x);
  const Var y = inverse(b, std::move(zv), condition(b, encode(b, xv)));
  return (config_.residual ? ad::add(y, xv) : y).value();
}

template <typename Scalar>
double RetinexFlow<Scalar>::nll(const TensorT& y, const TensorT& x) const {
  ad::Tape<Scalar> tape(false);
  Binding<Scalar> b(tape, params_);
  return static_cast<double>(nll(b, tape.constant(y), tape.constant(x)).loss.value()[0]);
}

template <typename Scalar>
std::vector<Shape> RetinexFlow<Scalar>::latent_shapes(Index height, Index width) const {
  std::vector<Shape> out;
  Index c = 1, h = height, w = width;
  for (int l = 0; l < config_.levels; ++l) {
    if (h % 2 != 0 || w % 2 != 0) throw ShapeError("latent_shapes: size not divisible by 2^L");
    c *= 4;
    h /= 2;
    w /= 2;
    if (l + 1 < config_.levels) {
      out.push_back({c / 2, h, w});
      c /= 2;
    }
  }
  out.push_back({c, h, w});
  return out;
}

template <typename Scalar>
Tensor<Scalar> RetinexFlow<Scalar>::infer(const TensorT& x, double tau, std::uint64_t seed) const {
  if (!params_.all_finite()) throw NumericalError("infer: model parameters are not finite");
  check_image(x, "infer");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<TensorT> z;
  for (const Shape& s : latent_shapes(x.height(), x.width())) {
    TensorT t(s);
    if (tau != 0.0) {
      for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(tau * normal(rng));
    }
    z.push_back(std::move(t));
  }
  TensorT y = inverse(z, x);
  y.array() = y.array().max(Scalar(0)).min(Scalar(1));
  return y;
}

template <typename Scalar>
void RetinexFlow<Scalar>::initialize_actnorm(std::span<const TensorT> ys, std::span<const TensorT> xs) {
  if (actnorm_initialized_) throw Error("actnorm is already initialized");
  if (ys.empty() || ys.size() != xs.size()) throw ShapeError("initialize_actnorm: need matching non-empty batches");
  std::vector<std::vector<TensorT>> conds;
  for (const TensorT& x : xs) {
    ad::Tape<Scalar> tape(false);
    Binding<Scalar> b(tape, params_);
    std::vector<TensorT> c;
    for (const Var& v : condition(b, encode(b, tape.constant(x)))) c.push_back(v.value());
    conds.push_back(std::move(c));
  }

  std::size_t index = 0;
  for (const auto& level : levels_) {
    for (const Step& s : level) {
      const Index channels = params_[s.an_scale].value.size();
      Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(channels), sq = Eigen::ArrayXd::Zero(channels);
      double count = 0.0;
      const ActNormObserver<Scalar> observer = [&](std::size_t at, const TensorT& h) {
        if (at != index) return false;
        const auto m = h.channel_matrix().template cast<double>();
        sum += m.rowwise().sum().array();
        sq += m.array().square().rowwise().sum();
        count += static_cast<double>(m.cols());
        return true;
      };
      for (std::size_t i = 0; i < ys.size(); ++i) {
        ad::Tape<Scalar> tape(false);
        Binding<Scalar> b(tape, params_);
        std::vector<Var> cond;
        for (const TensorT& c : conds[i]) cond.push_back(tape.constant(c));
        const Var y = tape.constant(ys[i]);
        forward(b, config_.residual ? ad::sub(y, tape.constant(xs[i])) : y, cond, &observer);
      }
      const Eigen::ArrayXd mean = sum / count;
      const Eigen::ArrayXd stddev = (sq / count - mean.square()).max(0.0).sqrt();
      const Eigen::ArrayXd scale = 1.0 / (stddev + 1e-6);
      for (Index c = 0; c < channels; ++c) {
        params_[s.an_scale].value[c] = static_cast<Scalar>(scale[c]);
        params_[s.an_bias].value[c] = static_cast<Scalar>(-mean[c] * scale[c]);
      }
      ++index;
    }
  }
  actnorm_initialized_ = true;
}

template <typename Scalar>
void RetinexFlow<Scalar>::perturb(std::uint64_t seed, double magnitude) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (auto& p : params_) {
    if (!p.trainable) continue;
    const bool log_scale = ends_with(p.name, "actnorm.scale");
    for (Index i = 0; i < p.value.size(); ++i) {
      const double n = magnitude * normal(rng);
      p.value[i] = log_scale ? static_cast<Scalar>(p.value[i] * std::exp(n)) : static_cast<Scalar>(p.value[i] + n);
    }
  }
}

template class RetinexFlow<float>;
template class RetinexFlow<double>;

}  // namespace marflow::flow
