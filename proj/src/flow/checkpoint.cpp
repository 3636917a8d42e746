#include "marflow/flow/checkpoint.hpp"

#include <fstream>

#include "marflow/core/tensor_io.hpp"

namespace marflow::flow {
namespace {

constexpr char kMagic[4] = {'R', 'F', 'L', 'W'};
constexpr std::uint32_t kMaxName = 4096;

std::string read_string(std::istream& in, std::uint32_t n) {
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw IoError("checkpoint: truncated file");
  return s;
}

std::uint8_t read_u8(std::istream& in) {
  char c = 0;
  in.read(&c, 1);
  if (!in) throw IoError("checkpoint: truncated file");
  return static_cast<std::uint8_t>(c);
}

}  // namespace

void save_checkpoint(std::ostream& out, const RetinexFlow<float>& model) {
  out.write(kMagic, 4);
  write_u32(out, kCheckpointVersion);
  const std::string config = model.config().to_text();
  write_u32(out, static_cast<std::uint32_t>(config.size()));
  out.write(config.data(), static_cast<std::streamsize>(config.size()));
  out.put(model.actnorm_initialized() ? 1 : 0);
  write_u32(out, static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) {
    write_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    out.put(p.trainable ? 0 : 1);
    write_u32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (Index d : p.value.shape()) write_u32(out, static_cast<std::uint32_t>(d));
    write_u64(out, static_cast<std::uint64_t>(p.value.size()));
    write_f32(out, p.value.values());
  }
  if (!out) throw IoError("checkpoint: write failed");
}

void save_checkpoint(const std::filesystem::path& path, const RetinexFlow<float>& model) {
  // Written to a sibling file first so a crash never leaves a torn checkpoint.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    save_checkpoint(out, model);
  }
  std::filesystem::rename(tmp, path);
}

RetinexFlow<float> load_checkpoint(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(kMagic, 4)) throw IoError("checkpoint: bad magic");
  const std::uint32_t version = read_u32(in);
  if (version != kCheckpointVersion) throw IoError("checkpoint: unsupported version " + std::to_string(version));
  const std::uint32_t config_len = read_u32(in);
  if (config_len > 1 << 20) throw IoError("checkpoint: oversized config block");
  const ModelConfig config = ModelConfig::from_text(read_string(in, config_len));
  const bool initialized = read_u8(in) != 0;

  RetinexFlow<float> model(config, 0);
  auto& params = model.parameters();
  const std::uint32_t count = read_u32(in);
  if (count != params.size()) {
    throw IoError("checkpoint: " + std::to_string(count) + " parameters, model expects " + std::to_string(params.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(in);
    if (name_len > kMaxName) throw IoError("checkpoint: oversized parameter name");
    const std::string name = read_string(in, name_len);
    auto& p = params[i];
    if (name != p.name) throw IoError("checkpoint: expected parameter '" + p.name + "', found '" + name + "'");
    const bool frozen = read_u8(in) != 0;
    const std::uint32_t rank = read_u32(in);
    if (rank > 8) throw IoError("checkpoint: parameter '" + name + "' has rank " + std::to_string(rank));
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(read_u32(in));
    const std::uint64_t n = read_u64(in);
    if (shape != p.value.shape() || n != static_cast<std::uint64_t>(p.value.size())) {
      throw IoError("checkpoint: parameter '" + name + "' has shape " + shape_string(shape) + ", model expects " +
                    shape_string(p.value.shape()));
    }
    read_f32(in, p.value.values());
    p.trainable = !frozen;
    p.zero_grad();
  }
  model.set_actnorm_initialized(initialized);
  return model;
}

RetinexFlow<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace marflow::flow
