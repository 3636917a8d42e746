#pragma once

#include <cstdint>
#include <vector>

#include "marflow/ct/fbp.hpp"

namespace marflow::mar {

// Sinogram entries whose rays cross the metal footprint.
struct MetalTrace {
  Index n_views = 0;
  Index n_detectors = 0;
  std::vector<std::uint8_t> hit;

  bool at(Index view, Index det) const { return hit[static_cast<std::size_t>(view * n_detectors + det)] != 0; }
  Index count() const;
  // Number of maximal traced runs in one view.
  Index intervals(Index view) const;
};

// Counts of fallbacks taken by the corrections.
struct MarDiagnostics {
  Index filled_rows = 0;     // all-traced rows filled with the row mean
  Index prior_fallbacks = 0;  // NMAR runs that reverted to LI
};

// Rays with a strictly positive projection of the mask.
MetalTrace metal_trace(const ct::MetalMask& metal, const ct::FanBeamGeometry& geom);
MetalTrace metal_trace(const Tensor<double>& mask, const ct::FanBeamGeometry& geom);

// Replaces each traced run of a view by linear interpolation between the
// nearest untraced detectors; runs touching the detector edge take the
// nearest valid sample. Untraced entries are copied bit-exactly.
ct::Sinogram li_correct(const ct::Sinogram& sino, const MetalTrace& trace, MarDiagnostics* diag = nullptr);

// Tissue-class prior: air -> 0, soft -> mean of soft pixels, bone -> value
// capped at the bone ceiling, metal-level values -> soft mean.
// Thresholds sit halfway between the generator's reference attenuations.
struct NmarPrior {
  Tensor<double> image;
  bool degenerate = false;  // no tissue found
};
NmarPrior nmar_prior(const Tensor<double>& corrupt_mu);

inline constexpr double kNmarPriorFloor = 1e-6;

// Normalized interpolation: LI on sino / prior_sino inside the trace,
// multiplied back by prior_sino.
ct::Sinogram nmar_correct_with_prior(const ct::Sinogram& sino, const MetalTrace& trace, const Tensor<double>& prior_sino,
                                     MarDiagnostics* diag = nullptr);
ct::Sinogram nmar_correct_from_image(const ct::Sinogram& sino, const MetalTrace& trace, const Tensor<double>& prior_image,
                                     MarDiagnostics* diag = nullptr);
// Full NMAR: prior from the corrupted reconstruction (falls back to LI
// when the prior is degenerate).
ct::Sinogram nmar_correct(const ct::Sinogram& sino, const MetalTrace& trace, const Tensor<double>& corrupt_mu,
                          MarDiagnostics* diag = nullptr);

inline Tensor<double> classical_reconstruct(const ct::Sinogram& corrected) { return ct::fbp_reconstruct(corrected); }

}  // namespace marflow::mar
