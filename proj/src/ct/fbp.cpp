#include "marflow/ct/fbp.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>

#include "marflow/core/parallel.hpp"

namespace marflow::ct {
namespace {

// Fan rays resampled onto parallel rays with the same view count over
// 0-360 degrees and the detector pitch projected to the isocenter.
Tensor<double> rebin_to_parallel(const Sinogram& sino) {
  const FanBeamGeometry& g = sino.geometry;
  const Index nv = g.n_views, nd = g.n_detectors;
  const double ds = g.iso_pitch();
  const double two_pi = 2.0 * std::numbers::pi;
  Tensor<double> par({nv, nd});
  parallel_for(nv, [&](Index v) {
    const double theta = g.view_angle(v);
    for (Index k = 0; k < nd; ++k) {
      const double s = (static_cast<double>(k) - 0.5 * static_cast<double>(nd - 1)) * ds;
      const double gamma = std::asin(s / g.source_to_isocenter);
      double beta = theta + gamma - 0.5 * std::numbers::pi;
      beta -= two_pi * std::floor(beta / two_pi);
      const double u = g.source_to_detector * std::tan(gamma);
      const double fb = beta / two_pi * static_cast<double>(nv);
      const double fd = u / g.detector_pitch + 0.5 * static_cast<double>(nd - 1);
      const double b0f = std::floor(fb), d0f = std::floor(fd);
      const double wb = fb - b0f, wd = fd - d0f;
      const Index b0 = static_cast<Index>(b0f) % nv, b1 = (b0 + 1) % nv;
      const Index d0 = static_cast<Index>(d0f);
      auto at = [&](Index b, Index d) { return (d < 0 || d >= nd) ? 0.0 : sino.data.at2(b, d); };
      par.at2(v, k) = (1 - wb) * ((1 - wd) * at(b0, d0) + wd * at(b0, d0 + 1)) +
                      wb * ((1 - wd) * at(b1, d0) + wd * at(b1, d0 + 1));
    }
  });
  return par;
}

// Ram-Lak filtering by multiplication with the transform of the
// band-limited spatial kernel on a zero-padded grid.
void ramp_filter(Tensor<double>& par, double ds) {
  const Index nv = par.dim(0), nd = par.dim(1);
  Index m = 1;
  while (m < 2 * nd) m *= 2;
  std::vector<double> kernel(static_cast<std::size_t>(m), 0.0);
  const double pi2 = std::numbers::pi * std::numbers::pi;
  kernel[0] = 1.0 / (4.0 * ds * ds);
  for (Index i = 1; i < nd; ++i) {
    if (i % 2 == 1) {
      const double v = -1.0 / (static_cast<double>(i * i) * pi2 * ds * ds);
      kernel[static_cast<std::size_t>(i)] = v;
      kernel[static_cast<std::size_t>(m - i)] = v;
    }
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> response;
  fft.fwd(response, kernel);

  parallel_for(nv, [&](Index v) {
    Eigen::FFT<double> local;
    std::vector<double> row(static_cast<std::size_t>(m), 0.0);
    for (Index k = 0; k < nd; ++k) row[static_cast<std::size_t>(k)] = par.at2(v, k);
    std::vector<std::complex<double>> spec;
    local.fwd(spec, row);
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= response[i];
    std::vector<double> filtered;
    local.inv(filtered, spec);
    for (Index k = 0; k < nd; ++k) par.at2(v, k) = ds * filtered[static_cast<std::size_t>(k)];
  });
}

}  // namespace

Tensor<double> fbp_reconstruct(const Sinogram& sino) {
  const FanBeamGeometry& g = sino.geometry;
  g.validate();
  if (g.n_views < kMinFbpViews) {
    throw GeometryError("fbp_reconstruct: at least " + std::to_string(kMinFbpViews) + " views required, got " +
                        std::to_string(g.n_views));
  }
  if (sino.data.shape() != Shape{g.n_views, g.n_detectors}) {
    throw ShapeError("fbp_reconstruct: sinogram shape " + shape_string(sino.data.shape()) + " does not match geometry");
  }
  Tensor<double> par = rebin_to_parallel(sino);
  const double ds = g.iso_pitch();
  ramp_filter(par, ds);

  const Index n = g.image_size, nv = g.n_views, nd = g.n_detectors;
  std::vector<double> cs(static_cast<std::size_t>(nv)), sn(static_cast<std::size_t>(nv));
  for (Index v = 0; v < nv; ++v) {
    cs[static_cast<std::size_t>(v)] = std::cos(g.view_angle(v));
    sn[static_cast<std::size_t>(v)] = std::sin(g.view_angle(v));
  }
  const double half = 0.5 * static_cast<double>(n);
  const double center = 0.5 * static_cast<double>(nd - 1);
  const double weight = std::numbers::pi / static_cast<double>(nv);
  Tensor<double> image({n, n});
  parallel_for(n, [&](Index r) {
    const double y = (half - static_cast<double>(r) - 0.5) * g.pixel_size;
    for (Index c = 0; c < n; ++c) {
      const double x = (static_cast<double>(c) + 0.5 - half) * g.pixel_size;
      double acc = 0.0;
      for (Index v = 0; v < nv; ++v) {
        const double f = (x * cs[static_cast<std::size_t>(v)] + y * sn[static_cast<std::size_t>(v)]) / ds + center;
        const double f0 = std::floor(f);
        const Index k = static_cast<Index>(f0);
        if (k < 0 || k + 1 >= nd) continue;
        const double w = f - f0;
        acc += (1 - w) * par.at2(v, k) + w * par.at2(v, k + 1);
      }
      image.at2(r, c) = weight * acc;
    }
  });
  return image;
}

Tensor<double> recon_error(const Tensor<double>& x_rec, const Tensor<double>& x_true) {
  require_same_shape(x_rec, x_true, "recon_error");
  Tensor<double> e(x_rec.shape());
  e.array() = x_rec.array() - x_true.array();
  return e;
}

std::vector<double> row_mean_stats(const Sinogram& sino) {
  const Index nv = sino.data.dim(0), nd = sino.data.dim(1);
  std::vector<double> means(static_cast<std::size_t>(nv));
  for (Index v = 0; v < nv; ++v) {
    means[static_cast<std::size_t>(v)] = sino.data.matrix(nv).row(v).sum() / static_cast<double>(nd);
  }
  return means;
}

}  // namespace marflow::ct
