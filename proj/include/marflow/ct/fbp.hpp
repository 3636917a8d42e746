#pragma once

#include <vector>

#include "marflow/ct/projector.hpp"

namespace marflow::ct {

inline constexpr Index kMinFbpViews = 16;

// Fan-beam FBP: rebin to parallel rays (bilinear in view angle and
// detector offset), Ram-Lak filter each view in the frequency domain, and
// back-project with linear interpolation onto the geometry's image grid.
Tensor<double> fbp_reconstruct(const Sinogram& sino);

// Pointwise x_rec - x_true.
Tensor<double> recon_error(const Tensor<double>& x_rec, const Tensor<double>& x_true);

// Mean sinogram value of each view.
std::vector<double> row_mean_stats(const Sinogram& sino);

}  // namespace marflow::ct
