#include "marflow/ct/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "marflow/core/keyvalue.hpp"
#include "marflow/core/tensor_io.hpp"
#include "marflow/ct/pgm.hpp"

namespace marflow::ct {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string join(const std::vector<double>& v) {
  std::ostringstream s;
  s << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
  return s.str();
}

const std::string& require(const std::map<std::string, std::string>& meta, const std::string& key,
                           const std::filesystem::path& dir) {
  auto it = meta.find(key);
  if (it == meta.end()) throw IoError(dir.string() + "/meta.txt: missing key '" + key + "'");
  return it->second;
}

Tensor<float> to_f32(const Tensor<double>& t) { return t.cast<float>(); }

}  // namespace

std::uint64_t case_seed(std::uint64_t base_seed, Index index) {
  return splitmix64(base_seed * 0x100000001b3ULL + static_cast<std::uint64_t>(index));
}

SizeClass case_size_class(Index index) { return kSizeClasses[static_cast<std::size_t>(index % 5)]; }

bool case_is_test(Index index, Index total, double test_fraction) {
  const auto n_test = static_cast<Index>(std::llround(static_cast<double>(total) * test_fraction));
  return index >= total - n_test;
}

SimCase simulate_case(const SimulationConfig& config, Index index, Index total, std::uint64_t base_seed) {
  SimCase c;
  c.index = index;
  c.seed = case_seed(base_seed, index);
  c.test = case_is_test(index, total, config.test_fraction);
  const FanBeamGeometry geom = config.geometry();
  c.phantom = make_phantom(c.seed, config.image_size, config.pixel_size);
  c.metal = make_metal_mask(splitmix64(c.seed), case_size_class(index), config.image_size, config.mu_metal);
  c.sino_clean = polychromatic_measure(c.phantom, nullptr, config.spectrum, geom);
  c.sino_metal = polychromatic_measure(c.phantom, &c.metal, config.spectrum, geom);
  c.corrupt_mu = fbp_reconstruct(c.sino_metal);
  return c;
}

Tensor<double> to_intensity(const Tensor<double>& mu, double window_hi) {
  Tensor<double> out(mu.shape());
  out.array() = (mu.array() / window_hi).max(0.0).min(1.0);
  return out;
}

std::filesystem::path write_case(const std::filesystem::path& root, const SimCase& c, const SimulationConfig& config) {
  const auto dir = root / (c.test ? "test" : "train") / c.name();
  std::filesystem::create_directories(dir);
  write_pgm16(dir / "gt.pgm", c.phantom.mu, 0.0, config.window_hi);
  write_pgm16(dir / "corrupt.pgm", c.corrupt_mu, 0.0, config.window_hi);
  write_pgm16(dir / "mask.pgm", c.metal.mask, 0.0, 1.0);
  write_tensor_dump(dir / "sino_clean.f32", to_f32(c.sino_clean.data));
  write_tensor_dump(dir / "sino_metal.f32", to_f32(c.sino_metal.data));

  const FanBeamGeometry& g = c.sino_metal.geometry;
  std::ofstream meta(dir / "meta.txt");
  if (!meta) throw IoError("cannot write " + (dir / "meta.txt").string());
  meta << std::setprecision(17);
  meta << "seed=" << c.seed << '\n'
       << "size_class=" << to_string(c.metal.size_class) << '\n'
       << "split=" << (c.test ? "test" : "train") << '\n'
       << "metal_area=" << c.metal.area() << '\n'
       << "mu_metal=" << c.metal.mu_metal << '\n'
       << "image_size=" << g.image_size << '\n'
       << "pixel_size=" << g.pixel_size << '\n'
       << "n_views=" << g.n_views << '\n'
       << "n_detectors=" << g.n_detectors << '\n'
       << "detector_pitch=" << g.detector_pitch << '\n'
       << "source_to_isocenter=" << g.source_to_isocenter << '\n'
       << "source_to_detector=" << g.source_to_detector << '\n'
       << "energies_kev=" << join(config.spectrum.energies_kev) << '\n'
       << "weights=" << join(config.spectrum.weights) << '\n'
       << "starved_rays=" << c.sino_metal.starved_rays << '\n'
       << "value_lo=0\n"
       << "value_hi=" << config.window_hi << '\n'
       << "mask_lo=0\n"
       << "mask_hi=1\n";
  if (!meta) throw IoError("write failed: " + (dir / "meta.txt").string());
  return dir;
}

CaseInfo read_case_info(const std::filesystem::path& case_dir) {
  const auto meta = read_key_value_map(case_dir / "meta.txt");
  CaseInfo info;
  info.dir = case_dir;
  info.name = case_dir.filename().string();
  info.seed = std::stoull(require(meta, "seed", case_dir));
  const auto cls = parse_size_class(require(meta, "size_class", case_dir));
  if (!cls) throw IoError(case_dir.string() + "/meta.txt: unknown size_class");
  info.size_class = *cls;
  info.test = require(meta, "split", case_dir) == "test";
  FanBeamGeometry& g = info.geometry;
  g.image_size = std::stoll(require(meta, "image_size", case_dir));
  g.pixel_size = std::stod(require(meta, "pixel_size", case_dir));
  g.n_views = std::stoll(require(meta, "n_views", case_dir));
  g.n_detectors = std::stoll(require(meta, "n_detectors", case_dir));
  g.detector_pitch = std::stod(require(meta, "detector_pitch", case_dir));
  g.source_to_isocenter = std::stod(require(meta, "source_to_isocenter", case_dir));
  g.source_to_detector = std::stod(require(meta, "source_to_detector", case_dir));
  info.value_lo = std::stod(require(meta, "value_lo", case_dir));
  info.value_hi = std::stod(require(meta, "value_hi", case_dir));
  return info;
}

Tensor<double> read_case_image(const CaseInfo& info, const std::string& stem) {
  // raw / 65535 is the intensity for every image in the case directory.
  return read_pgm16(info.dir / (stem + ".pgm"), 0.0, 1.0);
}

void write_case_image(const CaseInfo& info, const std::string& stem, const Tensor<double>& intensity) {
  write_pgm16(info.dir / (stem + ".pgm"), intensity, 0.0, 1.0);
}

Tensor<double> read_case_mask(const CaseInfo& info) { return read_pgm16(info.dir / "mask.pgm", 0.0, 1.0); }

Sinogram read_case_sinogram(const CaseInfo& info, const std::string& stem) {
  const Tensor<float> raw = read_tensor_dump(info.dir / (stem + ".f32"));
  if (raw.shape() != Shape{info.geometry.n_views, info.geometry.n_detectors}) {
    throw IoError(info.dir.string() + "/" + stem + ".f32: shape does not match meta.txt geometry");
  }
  return Sinogram{raw.cast<double>(), info.geometry, 0};
}

std::vector<std::filesystem::path> list_cases(const std::filesystem::path& root, const std::string& split) {
  std::vector<std::pair<long, std::filesystem::path>> found;
  const auto dir = root / split;
  if (!std::filesystem::is_directory(dir)) return {};
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind("case_", 0) != 0) continue;
    found.emplace_back(std::stol(name.substr(5)), entry.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<std::filesystem::path> out;
  for (auto& f : found) out.push_back(f.second);
  return out;
}

}  // namespace marflow::ct
