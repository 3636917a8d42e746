#include "marflow/ct/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace marflow::ct {
namespace {

struct Ellipse {
  double cx, cy;  // pixel units relative to the image center
  double a, b;    // semi-axes
  double angle;
  double power = 2.0;  // 2: ellipse, 4: rounded rectangle

  bool contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = (c * dx + s * dy) / a;
    const double v = (-s * dx + c * dy) / b;
    return std::pow(std::abs(u), power) + std::pow(std::abs(v), power) <= 1.0;
  }
};

// Pixel-center coordinates relative to the image center, y pointing up.
double center_x(Index col, Index n) { return static_cast<double>(col) + 0.5 - static_cast<double>(n) / 2.0; }
double center_y(Index row, Index n) { return static_cast<double>(n) / 2.0 - static_cast<double>(row) - 0.5; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Radius (in pixels) of the central disk guaranteed inside every body.
double safe_radius(Index n) { return 0.26 * static_cast<double>(n); }

}  // namespace

std::string_view to_string(SizeClass c) {
  switch (c) {
    case SizeClass::Large: return "large";
    case SizeClass::MidLarge: return "mid-large";
    case SizeClass::Middle: return "middle";
    case SizeClass::MidSmall: return "mid-small";
    case SizeClass::Small: return "small";
  }
  return "unknown";
}

std::optional<SizeClass> parse_size_class(std::string_view s) {
  for (SizeClass c : kSizeClasses) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

AreaRange area_range(SizeClass c, Index image_size) {
  static constexpr std::array<std::array<Index, 2>, 5> kAt64 = {{{96, 160}, {49, 95}, {25, 48}, {17, 24}, {4, 16}}};
  const auto& r = kAt64[static_cast<std::size_t>(c)];
  const double s = std::pow(static_cast<double>(image_size) / 64.0, 2.0);
  return {std::max<Index>(1, std::llround(static_cast<double>(r[0]) * s)),
          std::max<Index>(1, std::llround(static_cast<double>(r[1]) * s))};
}

SizeClass classify_area(Index area, Index image_size) {
  for (SizeClass c : kSizeClasses) {
    if (area >= area_range(c, image_size).lo) return c;
  }
  return SizeClass::Small;
}

Tensor<double> Phantom::component(Material m) const {
  Tensor<double> out(mu.shape());
  for (Index i = 0; i < out.size(); ++i) {
    if (labels[static_cast<std::size_t>(i)] == m) out[i] = mu[i];
  }
  return out;
}

Index MetalMask::area() const { return static_cast<Index>(mask.sum()); }

Index connected_components(const Tensor<double>& mask) {
  const Index h = mask.dim(0), w = mask.dim(1);
  std::vector<int> seen(static_cast<std::size_t>(h * w), 0);
  Index count = 0;
  std::vector<Index> stack;
  for (Index start = 0; start < h * w; ++start) {
    if (mask[start] == 0.0 || seen[static_cast<std::size_t>(start)]) continue;
    ++count;
    stack.push_back(start);
    seen[static_cast<std::size_t>(start)] = 1;
    while (!stack.empty()) {
      const Index p = stack.back();
      stack.pop_back();
      const Index y = p / w, x = p % w;
      const Index nbr[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (const auto& q : nbr) {
        if (q[0] < 0 || q[0] >= h || q[1] < 0 || q[1] >= w) continue;
        const Index qi = q[0] * w + q[1];
        if (mask[qi] != 0.0 && !seen[static_cast<std::size_t>(qi)]) {
          seen[static_cast<std::size_t>(qi)] = 1;
          stack.push_back(qi);
        }
      }
    }
  }
  return count;
}

Phantom make_phantom(std::uint64_t seed, Index size, double pixel_size) {
  if (size < 32) throw ShapeError("make_phantom: size must be at least 32, got " + std::to_string(size));
  std::mt19937_64 rng(seed);
  const double n = static_cast<double>(size);
  const double pi = std::numbers::pi;

  const Ellipse body{uniform(rng, -0.02, 0.02) * n, uniform(rng, -0.02, 0.02) * n, uniform(rng, 0.36, 0.44) * n,
                     uniform(rng, 0.30, 0.38) * n, uniform(rng, -0.3, 0.3)};
  Ellipse inner = body;
  inner.a *= 0.88;
  inner.b *= 0.88;

  Phantom ph;
  ph.pixel_size = pixel_size;
  ph.mu = Tensor<double>({size, size});
  ph.labels.assign(static_cast<std::size_t>(size * size), Material::Air);
  auto paint = [&](const Ellipse& shape, const Ellipse& clip, double mu, Material m, bool over_bone) {
    Index painted = 0;
    for (Index r = 0; r < size; ++r) {
      for (Index c = 0; c < size; ++c) {
        const double x = center_x(c, size), y = center_y(r, size);
        if (!shape.contains(x, y) || !clip.contains(x, y)) continue;
        const auto idx = static_cast<std::size_t>(r * size + c);
        if (!over_bone && ph.labels[idx] == Material::Bone) continue;
        ph.labels[idx] = m;
        ph.mu[static_cast<Index>(idx)] = mu;
        ++painted;
      }
    }
    return painted;
  };
  paint(body, body, kSoftMu, Material::Soft, true);

  auto inside_point = [&](double fraction) {
    const double rho = std::sqrt(uniform(rng, 0.0, 1.0)) * fraction;
    const double phi = uniform(rng, 0.0, 2.0 * pi);
    const double u = rho * body.a * std::cos(phi), v = rho * body.b * std::sin(phi);
    const double c = std::cos(body.angle), s = std::sin(body.angle);
    return std::pair{body.cx + c * u - s * v, body.cy + s * u + c * v};
  };

  const int n_bones = std::uniform_int_distribution<int>(2, 6)(rng);
  Index bone_pixels = 0;
  for (int i = 0; i < n_bones; ++i) {
    const auto [cx, cy] = inside_point(0.75);
    const double a = std::max(1.5, uniform(rng, 0.04, 0.10) * n);
    const double b = std::max(1.5, uniform(rng, 0.04, 0.10) * n);
    const Ellipse bone{cx, cy, a, b, uniform(rng, 0.0, pi)};
    bone_pixels += paint(bone, inner, uniform(rng, kBoneMuMin, kBoneMuMax), Material::Bone, true);
  }
  if (bone_pixels == 0) {
    const auto idx = static_cast<std::size_t>((size / 2) * size + size / 2);
    ph.labels[idx] = Material::Bone;
    ph.mu[static_cast<Index>(idx)] = 0.5 * (kBoneMuMin + kBoneMuMax);
  }

  const int n_lesions = std::uniform_int_distribution<int>(0, 3)(rng);
  for (int i = 0; i < n_lesions; ++i) {
    const auto [cx, cy] = inside_point(0.7);
    const double r = std::max(1.0, uniform(rng, 0.03, 0.07) * n);
    const Ellipse lesion{cx, cy, r, r * uniform(rng, 0.7, 1.0), uniform(rng, 0.0, pi)};
    const double contrast = uniform(rng, 0.1, 0.2) * (std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0);
    paint(lesion, inner, kSoftMu * (1.0 + contrast), Material::Soft, false);
  }
  return ph;
}

MetalMask make_metal_mask(std::uint64_t seed, SizeClass size_class, Index image_size, double mu_metal) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const double n = static_cast<double>(image_size);
  const double pi = std::numbers::pi;
  const AreaRange range = area_range(size_class, image_size);
  const double target = 0.5 * static_cast<double>(range.lo + range.hi);
  const int n_shapes = std::uniform_int_distribution<int>(1, 2)(rng);

  std::vector<Ellipse> shapes;
  const double phi = uniform(rng, 0.0, 2.0 * pi);
  const double rho = uniform(rng, 0.0, 0.08) * n;
  const double sep = uniform(rng, 0.10, 0.14) * n;
  const double dir = uniform(rng, 0.0, pi);
  for (int i = 0; i < n_shapes; ++i) {
    const double off = n_shapes == 1 ? 0.0 : (i == 0 ? -0.5 : 0.5) * sep;
    const double aspect = uniform(rng, 1.0, 2.0);
    const double weight = n_shapes == 1 ? 1.0 : uniform(rng, 0.8, 1.2);
    Ellipse e{rho * std::cos(phi) + off * std::cos(dir), rho * std::sin(phi) + off * std::sin(dir),
              weight * std::sqrt(aspect), weight / std::sqrt(aspect), uniform(rng, 0.0, pi),
              std::bernoulli_distribution(0.5)(rng) ? 2.0 : 4.0};
    shapes.push_back(e);
  }

  const double safe = safe_radius(image_size);
  auto rasterize = [&](double scale) {
    Tensor<double> mask({image_size, image_size});
    for (Index r = 0; r < image_size; ++r) {
      for (Index c = 0; c < image_size; ++c) {
        const double x = center_x(c, image_size), y = center_y(r, image_size);
        if (x * x + y * y > safe * safe) continue;
        for (const Ellipse& base : shapes) {
          Ellipse e = base;
          e.a *= scale;
          e.b *= scale;
          if (e.contains(x, y)) {
            mask.at2(r, c) = 1.0;
            break;
          }
        }
      }
    }
    return mask;
  };

  // Smallest scale whose union area reaches the target.
  double lo = 0.0, hi = 1.0;
  while (rasterize(hi).sum() < target) hi *= 2.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (rasterize(mid).sum() >= target ? hi : lo) = mid;
  }
  MetalMask out{rasterize(hi), size_class, mu_metal};
  if (out.area() > range.hi) {
    // Area jumped past the class range; accept the largest scale below it.
    out.mask = rasterize(lo);
  }
  return out;
}

Phantom with_metal_labels(Phantom phantom, const MetalMask& metal) {
  require_same_shape(phantom.mu, metal.mask, "with_metal_labels");
  for (Index i = 0; i < phantom.mu.size(); ++i) {
    if (metal.mask[i] != 0.0) phantom.labels[static_cast<std::size_t>(i)] = Material::Metal;
  }
  return phantom;
}

}  // namespace marflow::ct
