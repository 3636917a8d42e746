#include "marflow/mar/classical.hpp"

#include <algorithm>

#include "marflow/core/log.hpp"

namespace marflow::mar {
namespace {

constexpr double kAirSoftThreshold = 0.5 * (0.0 + ct::kSoftMu);
constexpr double kSoftBoneThreshold = 0.5 * (ct::kSoftMu + 0.5 * (ct::kBoneMuMin + ct::kBoneMuMax));
constexpr double kMetalThreshold = 2.0 * ct::kBoneMuMax;

void require_match(const ct::Sinogram& sino, const MetalTrace& trace) {
  if (sino.data.shape() != Shape{trace.n_views, trace.n_detectors}) {
    throw ShapeError("metal trace shape does not match the sinogram");
  }
}

// LI of one row in place; returns false when every detector is traced.
bool interpolate_row(double* row, const std::uint8_t* traced, Index n) {
  Index k = 0;
  bool any_valid = false;
  for (Index i = 0; i < n; ++i) any_valid = any_valid || !traced[i];
  if (!any_valid) {
    double mean = 0.0;
    for (Index i = 0; i < n; ++i) mean += row[i];
    mean /= static_cast<double>(n);
    std::fill(row, row + n, mean);
    return false;
  }
  while (k < n) {
    if (!traced[k]) {
      ++k;
      continue;
    }
    const Index begin = k;
    while (k < n && traced[k]) ++k;
    const Index left = begin - 1, right = k;
    if (left < 0) {
      std::fill(row + begin, row + k, row[right]);
    } else if (right >= n) {
      std::fill(row + begin, row + k, row[left]);
    } else {
      const double span = static_cast<double>(right - left);
      for (Index i = begin; i < k; ++i) {
        const double t = static_cast<double>(i - left) / span;
        row[i] = (1.0 - t) * row[left] + t * row[right];
      }
    }
  }
  return true;
}

}  // namespace

Index MetalTrace::count() const { return static_cast<Index>(std::count(hit.begin(), hit.end(), std::uint8_t{1})); }

Index MetalTrace::intervals(Index view) const {
  Index runs = 0;
  for (Index d = 0; d < n_detectors; ++d) {
    if (at(view, d) && (d == 0 || !at(view, d - 1))) ++runs;
  }
  return runs;
}

MetalTrace metal_trace(const Tensor<double>& mask, const ct::FanBeamGeometry& geom) {
  const ct::Sinogram p = ct::forward_project(mask, geom);
  MetalTrace t{geom.n_views, geom.n_detectors, std::vector<std::uint8_t>(static_cast<std::size_t>(p.data.size()))};
  for (Index i = 0; i < p.data.size(); ++i) t.hit[static_cast<std::size_t>(i)] = p.data[i] > 0.0 ? 1 : 0;
  return t;
}

MetalTrace metal_trace(const ct::MetalMask& metal, const ct::FanBeamGeometry& geom) {
  return metal_trace(metal.mask, geom);
}

ct::Sinogram li_correct(const ct::Sinogram& sino, const MetalTrace& trace, MarDiagnostics* diag) {
  require_match(sino, trace);
  ct::Sinogram out = sino;
  Index filled = 0;
  for (Index v = 0; v < trace.n_views; ++v) {
    const std::uint8_t* traced = trace.hit.data() + v * trace.n_detectors;
    if (!interpolate_row(out.data.data() + v * trace.n_detectors, traced, trace.n_detectors)) ++filled;
  }
  if (filled > 0) log::warn("li_correct: " + std::to_string(filled) + " fully traced view(s) filled with the row mean");
  if (diag) diag->filled_rows += filled;
  return out;
}

NmarPrior nmar_prior(const Tensor<double>& corrupt_mu) {
  NmarPrior prior{Tensor<double>(corrupt_mu.shape()), false};
  double soft_sum = 0.0;
  Index soft_count = 0, tissue = 0;
  for (Index i = 0; i < corrupt_mu.size(); ++i) {
    const double v = corrupt_mu[i];
    if (v >= kAirSoftThreshold && v < kSoftBoneThreshold) {
      soft_sum += v;
      ++soft_count;
    }
  }
  const double soft_mean = soft_count > 0 ? soft_sum / static_cast<double>(soft_count) : ct::kSoftMu;
  for (Index i = 0; i < corrupt_mu.size(); ++i) {
    const double v = corrupt_mu[i];
    double p = 0.0;
    if (v < kAirSoftThreshold) {
      p = 0.0;
    } else if (v < kSoftBoneThreshold || v >= kMetalThreshold) {
      p = soft_mean;
    } else {
      p = std::min(v, ct::kBoneMuMax);
    }
    prior.image[i] = p;
    if (p > 0.0) ++tissue;
  }
  prior.degenerate = tissue == 0;
  return prior;
}

ct::Sinogram nmar_correct_with_prior(const ct::Sinogram& sino, const MetalTrace& trace, const Tensor<double>& prior_sino,
                                     MarDiagnostics* diag) {
  require_match(sino, trace);
  require_same_shape(sino.data, prior_sino, "nmar_correct_with_prior");
  const Index nd = trace.n_detectors;
  ct::Sinogram out = sino;
  std::vector<double> row(static_cast<std::size_t>(nd));
  Index filled = 0;
  for (Index v = 0; v < trace.n_views; ++v) {
    const std::uint8_t* traced = trace.hit.data() + v * nd;
    if (std::none_of(traced, traced + nd, [](std::uint8_t t) { return t != 0; })) continue;
    for (Index d = 0; d < nd; ++d) {
      row[static_cast<std::size_t>(d)] = sino.data.at2(v, d) / std::max(prior_sino.at2(v, d), kNmarPriorFloor);
    }
    if (!interpolate_row(row.data(), traced, nd)) ++filled;
    for (Index d = 0; d < nd; ++d) {
      if (traced[d]) out.data.at2(v, d) = row[static_cast<std::size_t>(d)] * std::max(prior_sino.at2(v, d), kNmarPriorFloor);
    }
  }
  if (filled > 0) log::warn("nmar: " + std::to_string(filled) + " fully traced view(s) filled with the row mean");
  if (diag) diag->filled_rows += filled;
  return out;
}

ct::Sinogram nmar_correct_from_image(const ct::Sinogram& sino, const MetalTrace& trace, const Tensor<double>& prior_image,
                                     MarDiagnostics* diag) {
  const ct::Sinogram prior_sino = ct::forward_project(prior_image, sino.geometry);
  return nmar_correct_with_prior(sino, trace, prior_sino.data, diag);
}

ct::Sinogram nmar_correct(const ct::Sinogram& sino, const MetalTrace& trace, const Tensor<double>& corrupt_mu,
                          MarDiagnostics* diag) {
  if (corrupt_mu.shape() != Shape{sino.geometry.image_size, sino.geometry.image_size}) {
    throw ShapeError("nmar_correct: corrupt image does not match the reconstruction grid");
  }
  const NmarPrior prior = nmar_prior(corrupt_mu);
  if (prior.degenerate) {
    log::warn("nmar: degenerate prior image, falling back to linear interpolation");
    if (diag) ++diag->prior_fallbacks;
    return li_correct(sino, trace, diag);
  }
  return nmar_correct_from_image(sino, trace, prior.image, diag);
}

}  // namespace marflow::mar
