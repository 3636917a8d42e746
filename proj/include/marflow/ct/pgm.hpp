#pragma once

#include <filesystem>

#include "marflow/core/tensor.hpp"

namespace marflow::ct {

// 16-bit big-endian binary PGM (P5, maxval 65535). Pixel values map
// affinely: value = raw / 65535 * (hi - lo) + lo. Writing clamps to
// [lo, hi] and rounds to the nearest code.
void write_pgm16(const std::filesystem::path& path, const Tensor<double>& image, double lo, double hi);
Tensor<double> read_pgm16(const std::filesystem::path& path, double lo, double hi);

}  // namespace marflow::ct
