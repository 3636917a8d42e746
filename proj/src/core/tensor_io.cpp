#include "marflow/core/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace marflow {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_f32(std::ostream& out, std::span<const float> values) {
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("unexpected end of file");
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("unexpected end of file");
  return v;
}
void read_f32(std::istream& in, std::span<float> values) {
  if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()))) {
    throw IoError("unexpected end of file");
  }
}

void write_tensor_dump(std::ostream& out, const Tensor<float>& t) {
  out << "shape:";
  for (Index d : t.shape()) out << ' ' << d;
  out << '\n';
  write_f32(out, t.values());
}

void write_tensor_dump(const std::filesystem::path& path, const Tensor<float>& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_tensor_dump(out, t);
  if (!out) throw IoError("write failed: " + path.string());
}

Tensor<float> read_tensor_dump(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("shape:", 0) != 0) throw IoError("tensor dump: missing shape header");
  std::istringstream header(line.substr(6));
  Shape shape;
  Index d = 0;
  while (header >> d) shape.push_back(d);
  if (shape.empty()) throw IoError("tensor dump: empty shape");
  Tensor<float> t(shape);
  read_f32(in, t.values());
  return t;
}

Tensor<float> read_tensor_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_tensor_dump(in);
}

}  // namespace marflow
