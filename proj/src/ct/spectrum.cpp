#include "marflow/ct/spectrum.hpp"

#include <cmath>

#include "marflow/core/error.hpp"

namespace marflow::ct {

double SpectrumModel::scale(Material m, double energy_kev) const {
  const double ratio = energy_kev / reference_kev;
  switch (m) {
    case Material::Air: return 0.0;
    case Material::Soft: return std::pow(ratio, -soft_exponent);
    case Material::Bone: return std::pow(ratio, -bone_exponent);
    case Material::Metal: return std::pow(ratio, -metal_exponent);
  }
  return 0.0;
}

void SpectrumModel::validate(double mu_metal) const {
  if (energies_kev.empty() || energies_kev.size() != weights.size()) {
    throw ConfigError("spectrum: energies and weights must be non-empty and of equal length");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw ConfigError("spectrum: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("spectrum: weights must sum to 1");
  for (double e : energies_kev) {
    if (!(e > 0.0)) throw ConfigError("spectrum: energies must be positive");
  }
  if (!(soft_exponent >= 0.0 && bone_exponent >= 0.0 && metal_exponent >= 0.0)) {
    throw ConfigError("spectrum: attenuation must not increase with energy");
  }
  for (double e : energies_kev) {
    const double soft = scale(Material::Soft, e) * kSoftMu;
    const double bone = scale(Material::Bone, e) * kBoneMuMin;
    const double metal = scale(Material::Metal, e) * mu_metal;
    if (!(metal >= bone && bone >= soft)) {
      throw ConfigError("spectrum: attenuation ordering metal >= bone >= soft violated at " + std::to_string(e) +
                        " keV");
    }
  }
}

}  // namespace marflow::ct
