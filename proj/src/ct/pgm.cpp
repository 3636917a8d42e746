#include "marflow/ct/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace marflow::ct {

void write_pgm16(const std::filesystem::path& path, const Tensor<double>& image, double lo, double hi) {
  if (image.rank() != 2) throw ShapeError("write_pgm16: expected an (H, W) image");
  if (!(hi > lo)) throw IoError("write_pgm16: empty value range");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.dim(1) << ' ' << image.dim(0) << "\n65535\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(2 * image.size()));
  for (Index i = 0; i < image.size(); ++i) {
    const double t = std::clamp((image[i] - lo) / (hi - lo), 0.0, 1.0);
    const auto raw = static_cast<unsigned>(std::lround(t * 65535.0));
    bytes[static_cast<std::size_t>(2 * i)] = static_cast<unsigned char>(raw >> 8);
    bytes[static_cast<std::size_t>(2 * i + 1)] = static_cast<unsigned char>(raw & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Tensor<double> read_pgm16(const std::filesystem::path& path, double lo, double hi) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    while (in >> std::ws && in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
    }
    in >> t;
    return t;
  };
  if (token() != "P5") throw IoError(path.string() + ": not a binary PGM");
  const Index w = std::stoll(token());
  const Index h = std::stoll(token());
  const long maxval = std::stol(token());
  if (maxval != 65535) throw IoError(path.string() + ": expected a 16-bit PGM");
  in.get();
  std::vector<unsigned char> bytes(static_cast<std::size_t>(2 * w * h));
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
    throw IoError(path.string() + ": truncated pixel data");
  }
  Tensor<double> image({h, w});
  for (Index i = 0; i < image.size(); ++i) {
    const unsigned raw = (static_cast<unsigned>(bytes[static_cast<std::size_t>(2 * i)]) << 8) |
                         bytes[static_cast<std::size_t>(2 * i + 1)];
    image[i] = static_cast<double>(raw) / 65535.0 * (hi - lo) + lo;
  }
  return image;
}

}  // namespace marflow::ct
