#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "marflow/ct/fbp.hpp"

namespace marflow::ct {

struct SimulationConfig {
  Index image_size = 64;
  double pixel_size = 0.4;  // mm
  Index n_views = 640;
  SpectrumModel spectrum;
  double mu_metal = kDefaultMetalMu;
  // Attenuation (mm^-1) mapped to intensity 1; intensity 0 is air.
  double window_hi = 0.08;
  double test_fraction = 0.2;

  FanBeamGeometry geometry() const { return FanBeamGeometry::standard(image_size, pixel_size, n_views); }
};

// One simulated pair: the metal-free phantom and its metal-corrupted FBP.
struct SimCase {
  Index index = 0;
  std::uint64_t seed = 0;
  bool test = false;
  Phantom phantom;
  MetalMask metal;
  Sinogram sino_clean;
  Sinogram sino_metal;
  Tensor<double> corrupt_mu;  // FBP of sino_metal

  std::string name() const { return "case_" + std::to_string(index); }
};

std::uint64_t case_seed(std::uint64_t base_seed, Index index);
// Size classes are assigned round-robin: index 0 large, 1 mid-large, ...
SizeClass case_size_class(Index index);
bool case_is_test(Index index, Index total, double test_fraction);

SimCase simulate_case(const SimulationConfig& config, Index index, Index total, std::uint64_t base_seed);

// Clamped attenuation-to-intensity map used by every stored image.
Tensor<double> to_intensity(const Tensor<double>& mu, double window_hi);

// Writes root/{train,test}/case_<n>/ with gt.pgm, corrupt.pgm, mask.pgm,
// sino_clean.f32, sino_metal.f32 and meta.txt. Returns the case directory.
std::filesystem::path write_case(const std::filesystem::path& root, const SimCase& c, const SimulationConfig& config);

struct CaseInfo {
  std::filesystem::path dir;
  std::string name;
  std::uint64_t seed = 0;
  SizeClass size_class = SizeClass::Middle;
  bool test = false;
  FanBeamGeometry geometry;
  double value_lo = 0.0;
  double value_hi = 1.0;
};

CaseInfo read_case_info(const std::filesystem::path& case_dir);
// Image stored in the case directory as intensity in [0, 1].
Tensor<double> read_case_image(const CaseInfo& info, const std::string& stem);
void write_case_image(const CaseInfo& info, const std::string& stem, const Tensor<double>& intensity);
Tensor<double> read_case_mask(const CaseInfo& info);
Sinogram read_case_sinogram(const CaseInfo& info, const std::string& stem);

// Case directories of a split ("train" or "test"), ordered by case number.
std::vector<std::filesystem::path> list_cases(const std::filesystem::path& root, const std::string& split);

}  // namespace marflow::ct
