#pragma once

#include <optional>

#include "marflow/ct/geometry.hpp"
#include "marflow/ct/phantom.hpp"
#include "marflow/ct/spectrum.hpp"

namespace marflow::ct {

struct Sinogram {
  Tensor<double> data;  // (n_views, n_detectors)
  FanBeamGeometry geometry;
  // Rays whose transmitted intensity hit the photon-starvation floor.
  Index starved_rays = 0;
};

inline constexpr double kTransmissionFloor = 1e-12;

// Line integral of mu along every fan ray: midpoint rule with step
// pixel_size / 2 and bilinear interpolation. Throws GeometryError when
// non-zero pixels lie outside the scanned disk.
Sinogram forward_project(const Tensor<double>& mu, const FanBeamGeometry& geom);

// Y = -log sum_j w_j exp(-sum_m s_m(E_j) P[mu_m] - s_metal(E_j) P[mu_metal mask]).
Sinogram polychromatic_measure(const Phantom& phantom, const MetalMask* metal, const SpectrumModel& spectrum,
                               const FanBeamGeometry& geom);

}  // namespace marflow::ct
