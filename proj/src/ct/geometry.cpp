#include "marflow/ct/geometry.hpp"

#include <cmath>

namespace marflow::ct {

FanBeamGeometry FanBeamGeometry::standard(Index image_size, double pixel_size, Index n_views) {
  FanBeamGeometry g;
  const double width = static_cast<double>(image_size) * pixel_size;
  g.n_views = n_views;
  g.source_to_isocenter = 2.0 * width;
  g.source_to_detector = 3.0 * width;
  g.n_detectors = static_cast<Index>(std::llround(1.5 * static_cast<double>(image_size)));
  g.detector_pitch = pixel_size * g.source_to_detector / g.source_to_isocenter;
  g.image_size = image_size;
  g.pixel_size = pixel_size;
  return g;
}

double FanBeamGeometry::coverage_radius() const {
  const double u_max = 0.5 * static_cast<double>(n_detectors - 1) * detector_pitch;
  return source_to_isocenter * std::sin(std::atan(u_max / source_to_detector));
}

void FanBeamGeometry::validate() const {
  if (n_views < 1) throw GeometryError("geometry: n_views must be at least 1");
  if (n_detectors < 1 || detector_pitch <= 0.0) throw GeometryError("geometry: detector must have positive extent");
  if (image_size < 1 || pixel_size <= 0.0) throw GeometryError("geometry: invalid image grid");
  const double half_diag = std::sqrt(0.5) * static_cast<double>(image_size) * pixel_size;
  if (source_to_isocenter <= half_diag) throw GeometryError("geometry: source lies inside the image grid");
  if (source_to_detector <= source_to_isocenter) throw GeometryError("geometry: detector must lie beyond the isocenter");
  if (coverage_radius() < 0.5 * static_cast<double>(image_size) * pixel_size) {
    throw GeometryError("geometry: detector does not cover the image's inscribed disk");
  }
}

}  // namespace marflow::ct
