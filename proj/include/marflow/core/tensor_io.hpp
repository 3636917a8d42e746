#pragma once

#include <filesystem>
#include <iosfwd>

#include "marflow/core/tensor.hpp"

namespace marflow {

// Debug dump: a text line "shape: d0 d1 ..." followed by the values as
// little-endian IEEE-754 float32 in row-major order.
void write_tensor_dump(std::ostream& out, const Tensor<float>& t);
void write_tensor_dump(const std::filesystem::path& path, const Tensor<float>& t);
Tensor<float> read_tensor_dump(std::istream& in);
Tensor<float> read_tensor_dump(const std::filesystem::path& path);

// Little-endian primitives shared by the binary formats.
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f32(std::ostream& out, std::span<const float> values);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
void read_f32(std::istream& in, std::span<float> values);

}  // namespace marflow
