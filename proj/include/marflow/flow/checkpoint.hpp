#pragma once

#include <filesystem>
#include <iosfwd>

#include "marflow/flow/model.hpp"

// Checkpoint layout (little-endian):
//   "RFLW", u32 version, u32 config length, config text (key=value lines),
//   u8 actnorm-initialized, u32 parameter count, then per parameter
//   u32 name length, name, u8 frozen, u32 rank, u32 extents[rank],
//   u64 element count, f32 data[count].
namespace marflow::flow {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(std::ostream& out, const RetinexFlow<float>& model);
void save_checkpoint(const std::filesystem::path& path, const RetinexFlow<float>& model);
RetinexFlow<float> load_checkpoint(std::istream& in);
RetinexFlow<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace marflow::flow
