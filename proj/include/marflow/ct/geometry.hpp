#pragma once

#include <numbers>

#include "marflow/core/tensor.hpp"

namespace marflow::ct {

// Fan-beam scan over 0-360 degrees with an equally spaced flat detector,
// together with the square reconstruction grid it serves.
struct FanBeamGeometry {
  Index n_views = 640;
  double source_to_isocenter = 0.0;  // mm
  double source_to_detector = 0.0;   // mm
  Index n_detectors = 0;
  double detector_pitch = 0.0;  // mm, in the detector plane
  Index image_size = 64;
  double pixel_size = 1.0;  // mm

  // Default scanner for an image grid: source at twice the field width,
  // magnification 1.5, 1.5 x image_size detectors whose pitch projects to
  // one pixel at the isocenter.
  static FanBeamGeometry standard(Index image_size, double pixel_size, Index n_views = 640);

  double view_angle(Index view) const {
    return 2.0 * std::numbers::pi * static_cast<double>(view) / static_cast<double>(n_views);
  }
  double detector_offset(Index det) const {
    return (static_cast<double>(det) - 0.5 * static_cast<double>(n_detectors - 1)) * detector_pitch;
  }
  // Largest distance from the isocenter reached by any ray.
  double coverage_radius() const;
  // Detector spacing projected to the isocenter.
  double iso_pitch() const { return detector_pitch * source_to_isocenter / source_to_detector; }

  void validate() const;
};

}  // namespace marflow::ct
