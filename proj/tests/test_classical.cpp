#include <doctest.h>

#include <cmath>

#include "marflow/core/log.hpp"
#include "marflow/ct/dataset.hpp"
#include "marflow/mar/classical.hpp"
#include "test_util.hpp"

using namespace marflow;
using namespace marflow::ct;
using namespace marflow::mar;

namespace {

MetalTrace row_trace(std::initializer_list<int> bits) {
  MetalTrace t{1, static_cast<Index>(bits.size()), {}};
  for (int b : bits) t.hit.push_back(static_cast<std::uint8_t>(b));
  return t;
}

Sinogram row_sino(std::initializer_list<double> values) {
  FanBeamGeometry g;
  g.n_views = 1;
  g.n_detectors = static_cast<Index>(values.size());
  Sinogram s{Tensor<double>({1, g.n_detectors}), g, 0};
  Index i = 0;
  for (double v : values) s.data[i++] = v;
  return s;
}

bool identical_outside(const Sinogram& a, const Sinogram& b, const MetalTrace& t) {
  for (Index i = 0; i < a.data.size(); ++i) {
    if (!t.hit[static_cast<std::size_t>(i)] && a.data[i] != b.data[i]) return false;
  }
  return true;
}

double trace_l2(const Sinogram& a, const Sinogram& b, const MetalTrace& t) {
  double s = 0.0;
  for (Index i = 0; i < a.data.size(); ++i) {
    if (t.hit[static_cast<std::size_t>(i)]) s += std::pow(a.data[i] - b.data[i], 2);
  }
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("li on a single row") {
  CHECK(li_correct(row_sino({4, 100, 8}), row_trace({0, 1, 0})).data[1] == doctest::Approx(6.0));

  const Sinogram s = li_correct(row_sino({1, 9, 9, 4, 9, 0}), row_trace({0, 1, 1, 0, 1, 0}));
  CHECK(s.data[1] == doctest::Approx(2.0));
  CHECK(s.data[2] == doctest::Approx(3.0));
  CHECK(s.data[4] == doctest::Approx(2.0));

  // Intervals touching the detector edge take the nearest valid sample.
  const Sinogram edge = li_correct(row_sino({9, 9, 3, 5, 9}), row_trace({1, 1, 0, 0, 1}));
  CHECK(edge.data[0] == 3.0);
  CHECK(edge.data[1] == 3.0);
  CHECK(edge.data[4] == 5.0);

  log::set_level(log::Level::Error);
  MarDiagnostics diag;
  const Sinogram full = li_correct(row_sino({1, 2, 6}), row_trace({1, 1, 1}), &diag);
  log::set_level(log::Level::Info);
  CHECK(diag.filled_rows == 1);
  for (Index i = 0; i < 3; ++i) CHECK(full.data[i] == doctest::Approx(3.0));

  CHECK_THROWS_AS(li_correct(row_sino({1, 2}), row_trace({0, 1, 0})), ShapeError);
}

TEST_CASE("metal trace geometry") {
  const FanBeamGeometry g = FanBeamGeometry::standard(64, 0.4);
  CHECK(metal_trace(Tensor<double>({64, 64}), g).count() == 0);

  Tensor<double> dot({64, 64});
  dot.at2(30, 37) = 1.0;
  const MetalTrace one = metal_trace(dot, g);
  for (Index v = 0; v < g.n_views; ++v) CHECK(one.intervals(v) == 1);

  const MetalMask big = make_metal_mask(3, SizeClass::Large, 64);
  Tensor<double> inner = big.mask;
  // Nested masks: drop every other row of the large one.
  for (Index r = 0; r < 64; r += 2)
    for (Index c = 0; c < 64; ++c) inner.at2(r, c) = 0.0;
  CHECK(metal_trace(inner, g).count() <= metal_trace(big.mask, g).count());
  CHECK(metal_trace(dot, g).count() <= metal_trace(big.mask, g).count());
}

TEST_CASE("corrections leave the untraced sinogram alone") {
  SimulationConfig cfg;
  cfg.n_views = 160;
  const SimCase c = simulate_case(cfg, 2, 10, 9);
  const MetalTrace trace = metal_trace(c.metal, c.sino_metal.geometry);
  REQUIRE(trace.count() > 0);

  const Sinogram li = li_correct(c.sino_metal, trace);
  const Sinogram nmar = nmar_correct(c.sino_metal, trace, c.corrupt_mu);
  CHECK(identical_outside(li, c.sino_metal, trace));
  CHECK(identical_outside(nmar, c.sino_metal, trace));
  CHECK(li_correct(li, trace).data == li.data);

  const MetalTrace empty{trace.n_views, trace.n_detectors, std::vector<std::uint8_t>(trace.hit.size(), 0)};
  CHECK(li_correct(c.sino_metal, empty).data == c.sino_metal.data);
  CHECK(nmar_correct(c.sino_metal, empty, c.corrupt_mu).data == c.sino_metal.data);

  Sinogram flat = c.sino_metal;
  flat.data.array() = 1.75;
  CHECK(li_correct(flat, trace).data == flat.data);

  // A prior sinogram of ones makes NMAR plain LI.
  const Tensor<double> ones(c.sino_metal.data.shape(), 1.0);
  CHECK(nmar_correct_with_prior(c.sino_metal, trace, ones).data == li.data);

  // A constant normalized sinogram comes back as that constant times the prior.
  const Tensor<double> prior = forward_project(c.phantom.mu, c.sino_metal.geometry).data;
  Sinogram proportional = c.sino_metal;
  for (Index i = 0; i < prior.size(); ++i) proportional.data[i] = 3.0 * std::max(prior[i], kNmarPriorFloor);
  const Sinogram back = nmar_correct_with_prior(proportional, trace, prior);
  for (Index i = 0; i < prior.size(); ++i) CHECK(back.data[i] == doctest::Approx(proportional.data[i]).epsilon(1e-12));
}

TEST_CASE("nmar with the true prior beats li") {
  SimulationConfig cfg;
  cfg.n_views = 160;
  for (Index idx : {0, 1, 2, 3}) {
    const SimCase c = simulate_case(cfg, idx, 10, 21);
    const MetalTrace trace = metal_trace(c.metal, c.sino_metal.geometry);
    // Clean data with the metal trace removed: a smooth sinogram with holes.
    const Sinogram li = li_correct(c.sino_clean, trace);
    const Sinogram nmar = nmar_correct_from_image(c.sino_clean, trace, c.phantom.mu);
    CHECK(trace_l2(nmar, c.sino_clean, trace) < trace_l2(li, c.sino_clean, trace));
  }
}

TEST_CASE("nmar prior classes") {
  Tensor<double> img({2, 4});
  const double values[] = {0.0, 0.005, 0.018, 0.022, 0.045, 0.07, 0.4, 0.03};
  for (Index i = 0; i < 8; ++i) img[i] = values[i];
  const NmarPrior p = nmar_prior(img);
  CHECK_FALSE(p.degenerate);
  const double soft = (0.018 + 0.022 + 0.03) / 3.0;
  CHECK(p.image[0] == 0.0);
  CHECK(p.image[1] == 0.0);
  CHECK(p.image[2] == doctest::Approx(soft));
  CHECK(p.image[3] == doctest::Approx(soft));
  CHECK(p.image[4] == doctest::Approx(0.045));
  CHECK(p.image[5] == doctest::Approx(kBoneMuMax));
  CHECK(p.image[6] == doctest::Approx(soft));
  CHECK(nmar_prior(Tensor<double>({4, 4})).degenerate);
}

TEST_CASE("degenerate prior falls back to li") {
  SimulationConfig cfg;
  cfg.n_views = 64;
  const SimCase c = simulate_case(cfg, 4, 10, 5);
  const MetalTrace trace = metal_trace(c.metal, c.sino_metal.geometry);
  log::set_level(log::Level::Error);
  MarDiagnostics diag;
  const Sinogram out = nmar_correct(c.sino_metal, trace, Tensor<double>({64, 64}), &diag);
  log::set_level(log::Level::Info);
  CHECK(diag.prior_fallbacks == 1);
  CHECK(out.data == li_correct(c.sino_metal, trace).data);
  CHECK_THROWS_AS(nmar_correct(c.sino_metal, trace, Tensor<double>({32, 32})), ShapeError);
}
