#include "marflow/ct/projector.hpp"

#include <algorithm>
#include <cmath>

#include "marflow/core/parallel.hpp"

namespace marflow::ct {
namespace {

double bilinear(const Tensor<double>& img, double fy, double fx) {
  const Index n = img.dim(0), m = img.dim(1);
  const double y0f = std::floor(fy), x0f = std::floor(fx);
  const Index y0 = static_cast<Index>(y0f), x0 = static_cast<Index>(x0f);
  const double wy = fy - y0f, wx = fx - x0f;
  auto at = [&](Index y, Index x) { return (y < 0 || y >= n || x < 0 || x >= m) ? 0.0 : img.at2(y, x); };
  return (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x0 + 1)) + wy * ((1 - wx) * at(y0 + 1, x0) + wx * at(y0 + 1, x0 + 1));
}

void require_covered(const Tensor<double>& mu, const FanBeamGeometry& geom) {
  const Index n = mu.dim(0);
  const double half = 0.5 * static_cast<double>(n);
  const double radius = geom.coverage_radius();
  const double corner = std::sqrt(0.5) * geom.pixel_size;
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      if (mu.at2(r, c) == 0.0) continue;
      const double x = (static_cast<double>(c) + 0.5 - half) * geom.pixel_size;
      const double y = (half - static_cast<double>(r) - 0.5) * geom.pixel_size;
      if (std::hypot(x, y) + corner > radius) {
        throw GeometryError("forward_project: object support extends beyond the scanned disk");
      }
    }
  }
}

}  // namespace

Sinogram forward_project(const Tensor<double>& mu, const FanBeamGeometry& geom) {
  geom.validate();
  if (mu.rank() != 2 || mu.dim(0) != mu.dim(1) || mu.dim(0) != geom.image_size) {
    throw ShapeError("forward_project: expected a square image of size " + std::to_string(geom.image_size) + ", got " +
                     shape_string(mu.shape()));
  }
  require_covered(mu, geom);

  const Index n = geom.image_size;
  const double pix = geom.pixel_size;
  const double half_width = 0.5 * static_cast<double>(n) * pix;
  const double max_step = 0.5 * pix;
  Sinogram out{Tensor<double>({geom.n_views, geom.n_detectors}), geom, 0};

  parallel_for(geom.n_views, [&](Index v) {
    const double beta = geom.view_angle(v);
    const double cb = std::cos(beta), sb = std::sin(beta);
    const double sx = geom.source_to_isocenter * cb, sy = geom.source_to_isocenter * sb;
    for (Index d = 0; d < geom.n_detectors; ++d) {
      const double u = geom.detector_offset(d);
      double dx = -geom.source_to_detector * cb - u * sb;
      double dy = -geom.source_to_detector * sb + u * cb;
      const double len = std::hypot(dx, dy);
      dx /= len;
      dy /= len;
      // Slab intersection with the image square.
      double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
      for (const auto& [o, dir] : {std::pair{sx, dx}, std::pair{sy, dy}}) {
        if (std::abs(dir) < 1e-15) {
          if (std::abs(o) > half_width) t1 = -1.0;
          continue;
        }
        double a = (-half_width - o) / dir, b = (half_width - o) / dir;
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
      }
      double total = 0.0;
      if (t1 > t0) {
        const double length = t1 - t0;
        const auto steps = static_cast<Index>(std::ceil(length / max_step));
        const double h = length / static_cast<double>(steps);
        for (Index i = 0; i < steps; ++i) {
          const double t = t0 + (static_cast<double>(i) + 0.5) * h;
          const double x = sx + t * dx, y = sy + t * dy;
          total += bilinear(mu, 0.5 * static_cast<double>(n) - 0.5 - y / pix, x / pix + 0.5 * static_cast<double>(n) - 0.5);
        }
        total *= h;
      }
      out.data.at2(v, d) = total;
    }
  });
  return out;
}

Sinogram polychromatic_measure(const Phantom& phantom, const MetalMask* metal, const SpectrumModel& spectrum,
                               const FanBeamGeometry& geom) {
  spectrum.validate(metal != nullptr ? std::max(metal->mu_metal, kDefaultMetalMu) : kDefaultMetalMu);
  const Sinogram soft = forward_project(phantom.component(Material::Soft), geom);
  const Sinogram bone = forward_project(phantom.component(Material::Bone), geom);
  std::optional<Sinogram> metal_p;
  if (metal != nullptr) {
    require_same_shape(metal->mask, phantom.mu, "polychromatic_measure");
    Tensor<double> m = metal->mask;
    m.array() *= metal->mu_metal;
    metal_p = forward_project(m, geom);
  }

  Sinogram out{Tensor<double>(soft.data.shape()), geom, 0};
  for (Index i = 0; i < out.data.size(); ++i) {
    double transmitted = 0.0;
    for (std::size_t j = 0; j < spectrum.energies_kev.size(); ++j) {
      const double e = spectrum.energies_kev[j];
      double exponent = spectrum.scale(Material::Soft, e) * soft.data[i] + spectrum.scale(Material::Bone, e) * bone.data[i];
      if (metal_p) exponent += spectrum.scale(Material::Metal, e) * metal_p->data[i];
      transmitted += spectrum.weights[j] * std::exp(-exponent);
    }
    if (transmitted < kTransmissionFloor) {
      transmitted = kTransmissionFloor;
      ++out.starved_rays;
    }
    out.data[i] = -std::log(transmitted);
  }
  return out;
}

}  // namespace marflow::ct
