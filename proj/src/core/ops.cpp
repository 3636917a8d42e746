#include "marflow/core/ops.hpp"

#include <Eigen/LU>

#include <cmath>
#include <memory>

namespace marflow::ad {
namespace {

template <typename Scalar>
using MapM = Eigen::Map<MatrixRM<Scalar>>;
template <typename Scalar>
using CMapM = Eigen::Map<const MatrixRM<Scalar>>;

template <typename Scalar>
void require_same(Var<Scalar> a, Var<Scalar> b, const char* op) {
  if (a.tape != b.tape) throw Error(std::string(op) + ": operands recorded on different tapes");
  require_same_shape(a.value(), b.value(), op);
}

template <typename Scalar>
void require_chw(const Tensor<Scalar>& t, const char* op) {
  if (t.rank() != 3) throw ShapeError(std::string(op) + ": expected (C, H, W), got " + shape_string(t.shape()));
}

template <typename Scalar, typename Fwd, typename Dfn>
Var<Scalar> unary(Var<Scalar> a, Fwd fwd, Dfn dydx) {
  Tape<Scalar>& tape = *a.tape;
  Tensor<Scalar> out(a.shape());
  out.array() = fwd(a.value().array());
  return tape.push(std::move(out), tape.needs_grad(a), [a, dydx](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    Tensor<Scalar> ga(g.shape());
    ga.array() = g.array() * dydx(a.value().array());
    t.accumulate(a, ga);
  });
}

struct ConvGeometry {
  Index cin, h, w, k, stride, pad, ho, wo;
};

// Output columns [lo, hi) whose input column ox * stride + kx - pad lies
// inside the image.
std::pair<Index, Index> valid_columns(const ConvGeometry& g, Index kx) {
  const Index offset = kx - g.pad;
  Index lo = 0;
  while (lo < g.wo && lo * g.stride + offset < 0) ++lo;
  Index hi = g.wo;
  while (hi > lo && (hi - 1) * g.stride + offset >= g.w) --hi;
  return {lo, hi};
}

template <typename Scalar>
void im2col(const Scalar* x, const ConvGeometry& g, Scalar* cols) {
  const Index n = g.ho * g.wo;
  for (Index c = 0; c < g.cin; ++c) {
    const Scalar* plane = x + c * g.h * g.w;
    for (Index ky = 0; ky < g.k; ++ky) {
      for (Index kx = 0; kx < g.k; ++kx) {
        Scalar* row = cols + ((c * g.k + ky) * g.k + kx) * n;
        const auto [lo, hi] = valid_columns(g, kx);
        const Index offset = kx - g.pad;
        for (Index oy = 0; oy < g.ho; ++oy) {
          const Index iy = oy * g.stride + ky - g.pad;
          Scalar* dst = row + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, Scalar(0));
            continue;
          }
          const Scalar* src = plane + iy * g.w + offset;
          std::fill(dst, dst + lo, Scalar(0));
          if (g.stride == 1) {
            std::copy(src + lo, src + hi, dst + lo);
          } else {
            for (Index ox = lo; ox < hi; ++ox) dst[ox] = src[ox * g.stride];
          }
          std::fill(dst + hi, dst + g.wo, Scalar(0));
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_add(const Scalar* cols, const ConvGeometry& g, Scalar* x) {
  const Index n = g.ho * g.wo;
  for (Index c = 0; c < g.cin; ++c) {
    Scalar* plane = x + c * g.h * g.w;
    for (Index ky = 0; ky < g.k; ++ky) {
      for (Index kx = 0; kx < g.k; ++kx) {
        const Scalar* row = cols + ((c * g.k + ky) * g.k + kx) * n;
        const auto [lo, hi] = valid_columns(g, kx);
        const Index offset = kx - g.pad;
        for (Index oy = 0; oy < g.ho; ++oy) {
          const Index iy = oy * g.stride + ky - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          const Scalar* src = row + oy * g.wo;
          Scalar* dst = plane + iy * g.w + offset;
          if (g.stride == 1) {
            for (Index ox = lo; ox < hi; ++ox) dst[ox] += src[ox];
          } else {
            for (Index ox = lo; ox < hi; ++ox) dst[ox * g.stride] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  require_same(a, b, "add");
  Tensor<Scalar> out(a.shape());
  out.array() = a.value().array() + b.value().array();
  Tape<Scalar>& tape = *a.tape;
  return tape.push(std::move(out), tape.needs_grad(a) || tape.needs_grad(b),
                   [a, b](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                     t.accumulate(a, g);
                     t.accumulate(b, g);
                   });
}

template <typename Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
  require_same(a, b, "sub");
  Tensor<Scalar> out(a.shape());
  out.array() = a.value().array() - b.value().array();
  Tape<Scalar>& tape = *a.tape;
  return tape.push(std::move(out), tape.needs_grad(a) || tape.needs_grad(b),
                   [a, b](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                     t.accumulate(a, g);
                     if (t.needs_grad(b)) {
                       Tensor<Scalar> gb(g.shape());
                       gb.array() = -g.array();
                       t.accumulate(b, gb);
                     }
                   });
}

template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  require_same(a, b, "mul");
  Tensor<Scalar> out(a.shape());
  out.array() = a.value().array() * b.value().array();
  Tape<Scalar>& tape = *a.tape;
  return tape.push(std::move(out), tape.needs_grad(a) || tape.needs_grad(b),
                   [a, b](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                     if (t.needs_grad(a)) {
                       Tensor<Scalar> ga(g.shape());
                       ga.array() = g.array() * b.value().array();
                       t.accumulate(a, ga);
                     }
                     if (t.needs_grad(b)) {
                       Tensor<Scalar> gb(g.shape());
                       gb.array() = g.array() * a.value().array();
                       t.accumulate(b, gb);
                     }
                   });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar factor) {
  return unary(
      a, [factor](const auto& x) { return x * factor; },
      [factor](const auto& x) { return ArrayX<Scalar>::Constant(x.size(), factor); });
}

template <typename Scalar>
Var<Scalar> add_scalar(Var<Scalar> a, Scalar offset) {
  return unary(
      a, [offset](const auto& x) { return x + offset; },
      [](const auto& x) { return ArrayX<Scalar>::Ones(x.size()); });
}

template <typename Scalar>
Var<Scalar> exp(Var<Scalar> a) {
  return unary(a, [](const auto& x) { return x.exp(); }, [](const auto& x) { return x.exp(); });
}

template <typename Scalar>
Var<Scalar> log(Var<Scalar> a) {
  if ((a.value().array() <= Scalar(0)).any()) throw NumericalError("log of a non-positive element");
  return unary(a, [](const auto& x) { return x.log(); }, [](const auto& x) { return x.inverse(); });
}

template <typename Scalar>
Var<Scalar> log_abs(Var<Scalar> a) {
  if ((a.value().array() == Scalar(0)).any()) throw NumericalError("log|x| of a zero element");
  return unary(a, [](const auto& x) { return x.abs().log(); }, [](const auto& x) { return x.inverse(); });
}

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> a) {
  return unary(
      a, [](const auto& x) { return x.tanh(); },
      [](const auto& x) { return Scalar(1) - x.tanh().square(); });
}

template <typename Scalar>
Var<Scalar> leaky_relu(Var<Scalar> a, Scalar slope) {
  return unary(
      a, [slope](const auto& x) { return (x > Scalar(0)).select(x, x * slope); },
      [slope](const auto& x) {
        return (x > Scalar(0)).select(ArrayX<Scalar>::Ones(x.size()), ArrayX<Scalar>::Constant(x.size(), slope));
      });
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) {
  Tape<Scalar>& tape = *a.tape;
  return tape.push(Tensor<Scalar>({1}, a.value().sum()), tape.needs_grad(a),
                   [a](Tape<Scalar>& t, const Tensor<Scalar>& g) { t.accumulate(a, Tensor<Scalar>(a.shape(), g[0])); });
}

template <typename Scalar>
Var<Scalar> sum_squares(Var<Scalar> a) {
  Tape<Scalar>& tape = *a.tape;
  return tape.push(Tensor<Scalar>({1}, a.value().array().square().sum()), tape.needs_grad(a),
                   [a](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                     Tensor<Scalar> ga(a.shape());
                     ga.array() = Scalar(2) * g[0] * a.value().array();
                     t.accumulate(a, ga);
                   });
}

template <typename Scalar>
Var<Scalar> conv2d(Var<Scalar> x, Var<Scalar> weight, std::optional<Var<Scalar>> bias, int stride) {
  const Tensor<Scalar>& xv = x.value();
  const Tensor<Scalar>& wv = weight.value();
  require_chw(xv, "conv2d");
  if (wv.rank() != 4 || wv.dim(2) != wv.dim(3)) {
    throw ShapeError("conv2d: weight must be (Cout, Cin, k, k), got " + shape_string(wv.shape()));
  }
  const Index k = wv.dim(2);
  if (k % 2 == 0) throw ShapeError("conv2d: kernel size must be odd, got " + std::to_string(k));
  if (wv.dim(1) != xv.channels()) {
    throw ShapeError("conv2d: input has " + std::to_string(xv.channels()) + " channels, kernel expects " +
                     std::to_string(wv.dim(1)));
  }
  if (stride != 1 && stride != 2) throw ShapeError("conv2d: stride must be 1 or 2");
  const Index cout = wv.dim(0);
  if (bias && (bias->value().rank() != 1 || bias->value().dim(0) != cout)) {
    throw ShapeError("conv2d: bias must have shape (Cout)");
  }

  ConvGeometry g{xv.channels(), xv.height(), xv.width(), k, stride, k / 2, 0, 0};
  g.ho = (g.h + 2 * g.pad - k) / stride + 1;
  g.wo = (g.w + 2 * g.pad - k) / stride + 1;
  const Index rows = g.cin * k * k;
  const Index n = g.ho * g.wo;
  const bool direct = (k == 1 && stride == 1);

  Tape<Scalar>& tape = *x.tape;
  const bool need = tape.needs_grad(x) || tape.needs_grad(weight) || (bias && tape.needs_grad(*bias));

  std::shared_ptr<MatrixRM<Scalar>> cols;
  if (!direct) {
    cols = std::make_shared<MatrixRM<Scalar>>(rows, n);
    im2col(xv.data(), g, cols->data());
  }
  Tensor<Scalar> out({cout, g.ho, g.wo});
  CMapM<Scalar> wm(wv.data(), cout, rows);
  MapM<Scalar> om(out.data(), cout, n);
  if (direct) {
    om.noalias() = wm * CMapM<Scalar>(xv.data(), rows, n);
  } else {
    om.noalias() = wm * (*cols);
  }
  if (bias) {
    Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> bv(bias->value().data(), cout);
    om.colwise() += bv;
  }
  // Drop the patch matrix unless the weight gradient needs it.
  if (!(need && tape.needs_grad(weight))) cols.reset();

  return tape.push(std::move(out), need, [x, weight, bias, g, rows, n, direct, cols](Tape<Scalar>& t,
                                                                                     const Tensor<Scalar>& gout) {
    const Index cout = weight.value().dim(0);
    CMapM<Scalar> gm(gout.data(), cout, n);
    if (t.needs_grad(weight)) {
      Tensor<Scalar>& gw = t.grad_buffer(weight);
      MapM<Scalar> gwm(gw.data(), cout, rows);
      if (direct) {
        gwm.noalias() += gm * CMapM<Scalar>(x.value().data(), rows, n).transpose();
      } else {
        gwm.noalias() += gm * cols->transpose();
      }
    }
    if (bias && t.needs_grad(*bias)) {
      Tensor<Scalar>& gb = t.grad_buffer(*bias);
      Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(gb.data(), cout) += gm.rowwise().sum();
    }
    if (t.needs_grad(x)) {
      CMapM<Scalar> wm(weight.value().data(), cout, rows);
      Tensor<Scalar>& gx = t.grad_buffer(x);
      if (direct) {
        MapM<Scalar>(gx.data(), rows, n).noalias() += wm.transpose() * gm;
      } else {
        MatrixRM<Scalar> gcols = wm.transpose() * gm;
        col2im_add(gcols.data(), g, gx.data());
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> channel_mix(Var<Scalar> x, Var<Scalar> w) {
  const Tensor<Scalar>& xv = x.value();
  const Tensor<Scalar>& wv = w.value();
  require_chw(xv, "channel_mix");
  const Index c = xv.channels();
  if (wv.rank() != 2 || wv.dim(0) != c || wv.dim(1) != c) {
    throw ShapeError("channel_mix: weight must be (" + std::to_string(c) + ", " + std::to_string(c) + ")");
  }
  const Index n = xv.height() * xv.width();
  Tensor<Scalar> out(xv.shape());
  MapM<Scalar>(out.data(), c, n).noalias() = CMapM<Scalar>(wv.data(), c, c) * CMapM<Scalar>(xv.data(), c, n);
  Tape<Scalar>& tape = *x.tape;
  return tape.push(std::move(out), tape.needs_grad(x) || tape.needs_grad(w),
                   [x, w, c, n](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                     CMapM<Scalar> gm(g.data(), c, n);
                     if (t.needs_grad(w)) {
                       MapM<Scalar>(t.grad_buffer(w).data(), c, c).noalias() +=
                           gm * CMapM<Scalar>(x.value().data(), c, n).transpose();
                     }
                     if (t.needs_grad(x)) {
                       MapM<Scalar>(t.grad_buffer(x).data(), c, n).noalias() +=
                           CMapM<Scalar>(w.value().data(), c, c).transpose() * gm;
                     }
                   });
}

template <typename Scalar>
Var<Scalar> channel_affine(Var<Scalar> x, Var<Scalar> scale, Var<Scalar> bias) {
  const Tensor<Scalar>& xv = x.value();
  require_chw(xv, "channel_affine");
  const Index c = xv.channels();
  if (scale.value().shape() != Shape{c} || bias.value().shape() != Shape{c}) {
    throw ShapeError("channel_affine: scale and bias must have shape (C)");
  }
  const Index n = xv.height() * xv.width();
  Tensor<Scalar> out(xv.shape());
  {
    MapM<Scalar> om(out.data(), c, n);
    CMapM<Scalar> xm(xv.data(), c, n);
    for (Index i = 0; i < c; ++i) {
      om.row(i).array() = xm.row(i).array() * scale.value()[i] + bias.value()[i];
    }
  }
  Tape<Scalar>& tape = *x.tape;
  const bool need = tape.needs_grad(x) || tape.needs_grad(scale) || tape.needs_grad(bias);
  return tape.push(std::move(out), need, [x, scale, bias, c, n](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    CMapM<Scalar> gm(g.data(), c, n);
    if (t.needs_grad(x)) {
      MapM<Scalar> gx(t.grad_buffer(x).data(), c, n);
      for (Index i = 0; i < c; ++i) gx.row(i) += gm.row(i) * scale.value()[i];
    }
    if (t.needs_grad(scale)) {
      CMapM<Scalar> xm(x.value().data(), c, n);
      Tensor<Scalar>& gs = t.grad_buffer(scale);
      for (Index i = 0; i < c; ++i) gs[i] += gm.row(i).dot(xm.row(i));
    }
    if (t.needs_grad(bias)) {
      Tensor<Scalar>& gb = t.grad_buffer(bias);
      for (Index i = 0; i < c; ++i) gb[i] += gm.row(i).sum();
    }
  });
}

template <typename Scalar>
Var<Scalar> logabsdet(Var<Scalar> w) {
  const Tensor<Scalar>& wv = w.value();
  if (wv.rank() != 2 || wv.dim(0) != wv.dim(1)) throw ShapeError("logabsdet: expected a square matrix");
  const Index c = wv.dim(0);
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat m = CMapM<Scalar>(wv.data(), c, c);
  Eigen::PartialPivLU<Mat> lu(m);
  const auto diag = lu.matrixLU().diagonal().array().abs();
  if ((diag == Scalar(0)).any()) throw NumericalError("logabsdet: singular matrix");
  const Scalar value = diag.log().sum();
  Tape<Scalar>& tape = *w.tape;
  const bool need = tape.needs_grad(w);
  std::shared_ptr<Mat> inv_t;
  if (need) inv_t = std::make_shared<Mat>(lu.inverse().transpose());
  return tape.push(Tensor<Scalar>({1}, value), need, [w, c, inv_t](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    MapM<Scalar>(t.grad_buffer(w).data(), c, c) += g[0] * (*inv_t);
  });
}

template <typename Scalar>
Var<Scalar> concat_channels(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no parts");
  const Tensor<Scalar>& first = parts.front().value();
  require_chw(first, "concat_channels");
  Index total = 0;
  bool need = false;
  Tape<Scalar>& tape = *parts.front().tape;
  for (const auto& p : parts) {
    const Tensor<Scalar>& v = p.value();
    require_chw(v, "concat_channels");
    if (v.height() != first.height() || v.width() != first.width()) {
      throw ShapeError("concat_channels: spatial mismatch " + shape_string(v.shape()) + " vs " +
                       shape_string(first.shape()));
    }
    total += v.channels();
    need = need || tape.needs_grad(p);
  }
  Tensor<Scalar> out({total, first.height(), first.width()});
  Index offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.size(), out.data() + offset);
    offset += p.size();
  }
  std::vector<Var<Scalar>> inputs(parts.begin(), parts.end());
  return tape.push(std::move(out), need, [inputs](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    Index off = 0;
    for (const auto& p : inputs) {
      if (t.needs_grad(p)) {
        Tensor<Scalar>& gp = t.grad_buffer(p);
        gp.array() += Eigen::Map<const ArrayX<Scalar>>(g.data() + off, p.size());
      }
      off += p.size();
    }
  });
}

template <typename Scalar>
Var<Scalar> slice_channels(Var<Scalar> x, Index begin, Index count) {
  const Tensor<Scalar>& xv = x.value();
  require_chw(xv, "slice_channels");
  if (begin < 0 || count <= 0 || begin + count > xv.channels()) throw ShapeError("slice_channels: range out of bounds");
  const Index plane = xv.height() * xv.width();
  Tensor<Scalar> out({count, xv.height(), xv.width()});
  std::copy(xv.data() + begin * plane, xv.data() + (begin + count) * plane, out.data());
  Tape<Scalar>& tape = *x.tape;
  return tape.push(std::move(out), tape.needs_grad(x), [x, begin, plane](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    Tensor<Scalar>& gx = t.grad_buffer(x);
    Eigen::Map<ArrayX<Scalar>>(gx.data() + begin * plane, g.size()) += g.array();
  });
}

template <typename Scalar>
Tensor<Scalar> squeeze2(const Tensor<Scalar>& x) {
  require_chw(x, "squeeze");
  const Index c = x.channels(), h = x.height(), w = x.width();
  if (h % 2 != 0 || w % 2 != 0) throw ShapeError("squeeze: spatial extent must be even, got " + shape_string(x.shape()));
  Tensor<Scalar> out({4 * c, h / 2, w / 2});
  for (Index ci = 0; ci < c; ++ci) {
    for (Index q = 0; q < 4; ++q) {
      const Index dy = q / 2, dx = q % 2;
      for (Index i = 0; i < h / 2; ++i) {
        for (Index j = 0; j < w / 2; ++j) out(4 * ci + q, i, j) = x(ci, 2 * i + dy, 2 * j + dx);
      }
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> unsqueeze2(const Tensor<Scalar>& x) {
  require_chw(x, "unsqueeze");
  const Index c4 = x.channels(), h = x.height(), w = x.width();
  if (c4 % 4 != 0) throw ShapeError("unsqueeze: channel count must be a multiple of 4");
  const Index c = c4 / 4;
  Tensor<Scalar> out({c, 2 * h, 2 * w});
  for (Index ci = 0; ci < c; ++ci) {
    for (Index q = 0; q < 4; ++q) {
      const Index dy = q / 2, dx = q % 2;
      for (Index i = 0; i < h; ++i) {
        for (Index j = 0; j < w; ++j) out(ci, 2 * i + dy, 2 * j + dx) = x(4 * ci + q, i, j);
      }
    }
  }
  return out;
}

template <typename Scalar>
Var<Scalar> squeeze2(Var<Scalar> x) {
  Tape<Scalar>& tape = *x.tape;
  return tape.push(squeeze2(x.value()), tape.needs_grad(x),
                   [x](Tape<Scalar>& t, const Tensor<Scalar>& g) { t.accumulate(x, unsqueeze2(g)); });
}

template <typename Scalar>
Var<Scalar> unsqueeze2(Var<Scalar> x) {
  Tape<Scalar>& tape = *x.tape;
  return tape.push(unsqueeze2(x.value()), tape.needs_grad(x),
                   [x](Tape<Scalar>& t, const Tensor<Scalar>& g) { t.accumulate(x, squeeze2(g)); });
}

template <typename Scalar>
Var<Scalar> fde_normalize(Var<Scalar> x) {
  const Tensor<Scalar>& xv = x.value();
  const Scalar total = xv.sum();
  if (!(total > Scalar(0))) throw NumericalError("fde_normalize: input sum must be positive");
  const Scalar d = static_cast<Scalar>(xv.size());
  Tensor<Scalar> out(xv.shape());
  out.array() = xv.array() * (d / total);
  Tape<Scalar>& tape = *x.tape;
  return tape.push(std::move(out), tape.needs_grad(x), [x, total, d](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    const Scalar proj = (g.array() * x.value().array()).sum();
    Tensor<Scalar> gx(g.shape());
    gx.array() = g.array() * (d / total) - d * proj / (total * total);
    t.accumulate(x, gx);
  });
}

template <typename Scalar>
Var<Scalar> fde_gradients(Var<Scalar> x) {
  const Tensor<Scalar>& xv = x.value();
  require_chw(xv, "fde_gradients");
  const Index c = xv.channels(), h = xv.height(), w = xv.width();
  if (h < 2 || w < 2) throw ShapeError("fde_gradients: spatial extent must be at least 2x2");
  Tensor<Scalar> out({2 * c, h, w});
  for (Index ci = 0; ci < c; ++ci) {
    for (Index i = 0; i < h; ++i) {
      for (Index j = 0; j < w; ++j) {
        out(ci, i, j) = j + 1 < w ? xv(ci, i, j + 1) - xv(ci, i, j) : Scalar(0);
        out(c + ci, i, j) = i + 1 < h ? xv(ci, i + 1, j) - xv(ci, i, j) : Scalar(0);
      }
    }
  }
  Tape<Scalar>& tape = *x.tape;
  return tape.push(std::move(out), tape.needs_grad(x), [x, c, h, w](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    Tensor<Scalar>& gx = t.grad_buffer(x);
    for (Index ci = 0; ci < c; ++ci) {
      for (Index i = 0; i < h; ++i) {
        for (Index j = 0; j < w; ++j) {
          if (j + 1 < w) {
            gx(ci, i, j + 1) += g(ci, i, j);
            gx(ci, i, j) -= g(ci, i, j);
          }
          if (i + 1 < h) {
            gx(ci, i + 1, j) += g(c + ci, i, j);
            gx(ci, i, j) -= g(c + ci, i, j);
          }
        }
      }
    }
  });
}

#define MARFLOW_INSTANTIATE_OPS(T)                                                           \
  template Var<T> add(Var<T>, Var<T>);                                                       \
  template Var<T> sub(Var<T>, Var<T>);                                                       \
  template Var<T> mul(Var<T>, Var<T>);                                                       \
  template Var<T> scale(Var<T>, T);                                                          \
  template Var<T> add_scalar(Var<T>, T);                                                     \
  template Var<T> exp(Var<T>);                                                               \
  template Var<T> log(Var<T>);                                                               \
  template Var<T> log_abs(Var<T>);                                                           \
  template Var<T> tanh(Var<T>);                                                              \
  template Var<T> leaky_relu(Var<T>, T);                                                     \
  template Var<T> sum(Var<T>);                                                               \
  template Var<T> sum_squares(Var<T>);                                                       \
  template Var<T> conv2d(Var<T>, Var<T>, std::optional<Var<T>>, int);                        \
  template Var<T> channel_mix(Var<T>, Var<T>);                                               \
  template Var<T> channel_affine(Var<T>, Var<T>, Var<T>);                                    \
  template Var<T> logabsdet(Var<T>);                                                         \
  template Var<T> concat_channels(std::span<const Var<T>>);                                  \
  template Var<T> slice_channels(Var<T>, Index, Index);                                      \
  template Var<T> squeeze2(Var<T>);                                                          \
  template Var<T> unsqueeze2(Var<T>);                                                        \
  template Tensor<T> squeeze2(const Tensor<T>&);                                             \
  template Tensor<T> unsqueeze2(const Tensor<T>&);                                           \
  template Var<T> fde_normalize(Var<T>);                                                     \
  template Var<T> fde_gradients(Var<T>);

MARFLOW_INSTANTIATE_OPS(float)
MARFLOW_INSTANTIATE_OPS(double)

}  // namespace marflow::ad
