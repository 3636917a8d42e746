#include "marflow/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace marflow::eval {
namespace {

using Image = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Image as_image(const Tensor<double>& t, const char* what) {
  if (t.rank() == 2) return Eigen::Map<const Image>(t.data(), t.dim(0), t.dim(1));
  if (t.rank() == 3 && t.dim(0) == 1) return Eigen::Map<const Image>(t.data(), t.dim(1), t.dim(2));
  throw ShapeError(std::string(what) + ": expected an (H, W) or (1, H, W) image, got " + shape_string(t.shape()));
}

void require_same_size(const Image& a, const Image& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError(std::string(what) + ": image sizes differ");
}

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double total = 0.0;
  for (Index i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i - kSsimWindow / 2);
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    total += w[static_cast<std::size_t>(i)];
  }
  for (double& v : w) v /= total;
  return w;
}

// Separable Gaussian filter, valid region only.
Image filter_valid(const Image& x) {
  static const auto w = gaussian_window();
  const Index h = x.rows() - kSsimWindow + 1, wd = x.cols() - kSsimWindow + 1;
  Image rows = Image::Zero(x.rows(), wd);
  for (Index k = 0; k < kSsimWindow; ++k) rows += w[static_cast<std::size_t>(k)] * x.middleCols(k, wd);
  Image out = Image::Zero(h, wd);
  for (Index k = 0; k < kSsimWindow; ++k) out += w[static_cast<std::size_t>(k)] * rows.middleRows(k, h);
  return out;
}

std::string size_class_column(ct::SizeClass c) {
  std::string s(ct::to_string(c));
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

std::string format_cell(const std::optional<Cell>& c) {
  if (!c) return "";
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << c->psnr_db << '/' << std::setprecision(4) << c->ssim;
  return s.str();
}

}  // namespace

double psnr(const Tensor<double>& a, const Tensor<double>& b, const Tensor<double>* exclude, double peak) {
  const Image x = as_image(a, "psnr"), y = as_image(b, "psnr");
  require_same_size(x, y, "psnr");
  Image keep = Image::Ones(x.rows(), x.cols());
  if (exclude != nullptr) {
    const Image m = as_image(*exclude, "psnr");
    require_same_size(x, m, "psnr mask");
    keep = (m == 0.0).cast<double>();
  }
  const double n = keep.sum();
  if (n == 0.0) throw ShapeError("psnr: every pixel is excluded");
  const double mse = ((x - y).square() * keep).sum() / n;
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Tensor<double>& a, const Tensor<double>& b, const Tensor<double>* exclude) {
  const Image x = as_image(a, "ssim"), y = as_image(b, "ssim");
  require_same_size(x, y, "ssim");
  if (x.rows() < kSsimWindow || x.cols() < kSsimWindow) {
    throw ShapeError("ssim: image smaller than the 11x11 window");
  }
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const Image mx = filter_valid(x), my = filter_valid(y);
  const Image sxx = filter_valid(x * x) - mx.square();
  const Image syy = filter_valid(y * y) - my.square();
  const Image sxy = filter_valid(x * y) - mx * my;
  const Image map = ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx.square() + my.square() + c1) * (sxx + syy + c2));

  const Index half = kSsimWindow / 2;
  Image keep = Image::Ones(map.rows(), map.cols());
  if (exclude != nullptr) {
    const Image m = as_image(*exclude, "ssim");
    require_same_size(x, m, "ssim mask");
    keep = (m.block(half, half, map.rows(), map.cols()) == 0.0).cast<double>();
  }
  const double n = keep.sum();
  if (n == 0.0) throw ShapeError("ssim: every window is excluded");
  return (map * keep).sum() / n;
}

std::vector<std::string> ordered_methods(const std::vector<MetricRow>& rows) {
  static const std::vector<std::string> kKnown = {"input", "li", "nmar", "retinexflow"};
  std::vector<std::string> out;
  for (const auto& m : kKnown) {
    if (std::any_of(rows.begin(), rows.end(), [&](const MetricRow& r) { return r.method == m; })) out.push_back(m);
  }
  for (const auto& r : rows) {
    if (std::find(out.begin(), out.end(), r.method) == out.end()) out.push_back(r.method);
  }
  return out;
}

std::vector<SummaryRow> grouped_report(const std::vector<MetricRow>& rows, const std::vector<std::string>& methods) {
  std::vector<SummaryRow> out;
  for (const std::string& method : methods) {
    SummaryRow s{method, {}, std::nullopt};
    Cell total;
    std::array<Cell, 5> cells{};
    for (const MetricRow& r : rows) {
      if (r.method != method) continue;
      Cell& c = cells[static_cast<std::size_t>(r.size_class)];
      c.psnr_db += r.psnr_db;
      c.ssim += r.ssim;
      ++c.count;
      total.psnr_db += r.psnr_db;
      total.ssim += r.ssim;
      ++total.count;
    }
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (cells[k].count == 0) continue;
      const double n = static_cast<double>(cells[k].count);
      s.by_class[k] = Cell{cells[k].psnr_db / n, cells[k].ssim / n, cells[k].count};
    }
    if (total.count > 0) {
      const double n = static_cast<double>(total.count);
      s.average = Cell{total.psnr_db / n, total.ssim / n, total.count};
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "case,size_class,method,psnr_db,ssim\n" << std::setprecision(10);
  for (const MetricRow& r : rows) {
    out << r.case_name << ',' << ct::to_string(r.size_class) << ',' << r.method << ',' << r.psnr_db << ',' << r.ssim
        << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "case,size_class,method,psnr_db,ssim") throw IoError(path.string() + ": unexpected header '" + line + "'");
  std::vector<MetricRow> rows;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream s(line);
    for (std::string part; std::getline(s, part, ',');) f.push_back(part);
    const auto cls = f.size() == 5 ? ct::parse_size_class(f[1]) : std::nullopt;
    if (!cls) throw IoError(path.string() + ":" + std::to_string(number) + ": malformed row");
    try {
      rows.push_back({f[0], *cls, f[2], std::stod(f[3]), std::stod(f[4])});
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(number) + ": malformed number");
    }
  }
  return rows;
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& summary) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "method";
  for (ct::SizeClass c : ct::kSizeClasses) out << ',' << size_class_column(c);
  out << ",average\n";
  for (const SummaryRow& r : summary) {
    out << r.method;
    for (const auto& c : r.by_class) out << ',' << format_cell(c);
    out << ',' << format_cell(r.average) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::string format_summary(const std::vector<SummaryRow>& summary) {
  std::ostringstream s;
  s << std::left << std::setw(12) << "method";
  for (ct::SizeClass c : ct::kSizeClasses) s << std::setw(16) << size_class_column(c);
  s << "average\n";
  for (const SummaryRow& r : summary) {
    s << std::setw(12) << r.method;
    for (const auto& c : r.by_class) s << std::setw(16) << (c ? format_cell(c) : "-");
    s << (r.average ? format_cell(r.average) : "-") << '\n';
  }
  return s.str();
}

}  // namespace marflow::eval
