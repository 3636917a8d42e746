#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "marflow/core/tensor.hpp"

namespace marflow::ct {

enum class Material : std::uint8_t { Air = 0, Soft = 1, Bone = 2, Metal = 3 };

// Reference attenuations (mm^-1) of the phantom generator.
inline constexpr double kSoftMu = 0.02;
inline constexpr double kBoneMuMin = 0.04;
inline constexpr double kBoneMuMax = 0.06;
inline constexpr double kDefaultMetalMu = 0.3;

// H x W attenuation map at the reference energy with per-pixel material.
struct Phantom {
  Tensor<double> mu;  // (H, W), mm^-1
  std::vector<Material> labels;
  double pixel_size = 1.0;  // mm

  Index size() const { return mu.dim(0); }
  Material label(Index y, Index x) const { return labels[static_cast<std::size_t>(y * size() + x)]; }
  // mu restricted to one material.
  Tensor<double> component(Material m) const;
};

// Metal footprint classes, largest first (Table-1 column order).
enum class SizeClass : std::uint8_t { Large = 0, MidLarge = 1, Middle = 2, MidSmall = 3, Small = 4 };
inline constexpr std::array<SizeClass, 5> kSizeClasses = {SizeClass::Large, SizeClass::MidLarge, SizeClass::Middle,
                                                          SizeClass::MidSmall, SizeClass::Small};

std::string_view to_string(SizeClass c);
std::optional<SizeClass> parse_size_class(std::string_view s);

// Inclusive pixel-count range of a class on an image of the given width.
// At 64 px: large >= 96 (capped at 160), mid-large 49-95, middle 25-48,
// mid-small 17-24, small 4-16; other widths scale by (size/64)^2.
struct AreaRange {
  Index lo, hi;
};
AreaRange area_range(SizeClass c, Index image_size);
SizeClass classify_area(Index area, Index image_size);

struct MetalMask {
  Tensor<double> mask;  // (H, W), 0 or 1
  SizeClass size_class = SizeClass::Middle;
  double mu_metal = kDefaultMetalMu;

  Index area() const;
};

Index connected_components(const Tensor<double>& mask);

// Soft-tissue body ellipse with 2-6 bone ellipses and 0-3 low-contrast
// lesions. Deterministic in seed; throws ShapeError when size < 32.
Phantom make_phantom(std::uint64_t seed, Index size, double pixel_size = 1.0);

// One or two convex inserts (ellipses or rounded rectangles) whose union
// area lies in area_range(size_class, image_size). Inserts stay within a
// central disk that every make_phantom body contains.
MetalMask make_metal_mask(std::uint64_t seed, SizeClass size_class, Index image_size,
                          double mu_metal = kDefaultMetalMu);

// Phantom with metal pixels relabelled; mu is left unchanged (metal
// attenuation enters the measurement additively).
Phantom with_metal_labels(Phantom phantom, const MetalMask& metal);

}  // namespace marflow::ct
