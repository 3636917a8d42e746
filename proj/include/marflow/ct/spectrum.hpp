#pragma once

#include <vector>

#include "marflow/ct/phantom.hpp"

namespace marflow::ct {

// Discrete source spectrum with power-law material scaling
// s_m(E) = (E / reference)^(-exponent_m) relative to the reference energy.
struct SpectrumModel {
  std::vector<double> energies_kev{60.0, 80.0, 100.0};
  std::vector<double> weights{0.5, 0.3, 0.2};
  double reference_kev = 80.0;
  double soft_exponent = 0.5;
  double bone_exponent = 1.5;
  double metal_exponent = 3.0;

  static SpectrumModel monochromatic(double energy_kev = 80.0) {
    SpectrumModel s;
    s.energies_kev = {energy_kev};
    s.weights = {1.0};
    return s;
  }

  double scale(Material m, double energy_kev) const;
  // Throws ConfigError unless weights are positive and sum to 1, every
  // material's attenuation is non-increasing in energy, and at each energy
  // the scaled attenuations keep metal >= bone >= soft.
  void validate(double mu_metal = kDefaultMetalMu) const;
};

}  // namespace marflow::ct
