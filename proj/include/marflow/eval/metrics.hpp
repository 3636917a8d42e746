#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "marflow/ct/phantom.hpp"

namespace marflow::eval {

inline constexpr double kPsnrCap = 99.0;

// Images are (H, W) or (1, H, W) with values in [0, 1]. Where `exclude` is
// given, its nonzero pixels (the metal) are left out of the metric.
double psnr(const Tensor<double>& a, const Tensor<double>& b, const Tensor<double>* exclude = nullptr, double peak = 1.0);

// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
// K2 = 0.03, dynamic range 1, over windows that fit inside the image.
// With `exclude`, windows centred on excluded pixels are skipped.
double ssim(const Tensor<double>& a, const Tensor<double>& b, const Tensor<double>* exclude = nullptr);
inline constexpr Index kSsimWindow = 11;

struct MetricRow {
  std::string case_name;
  ct::SizeClass size_class = ct::SizeClass::Middle;
  std::string method;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct Cell {
  double psnr_db = 0.0;
  double ssim = 0.0;
  Index count = 0;
};

struct SummaryRow {
  std::string method;
  std::array<std::optional<Cell>, 5> by_class;  // Table order, large first
  std::optional<Cell> average;                   // over all of the method's cases
};

// One row per method in `methods` order; methods absent from `rows` get
// empty cells.
std::vector<SummaryRow> grouped_report(const std::vector<MetricRow>& rows, const std::vector<std::string>& methods);

// Canonical method order for reports.
std::vector<std::string> ordered_methods(const std::vector<MetricRow>& rows);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& summary);
std::string format_summary(const std::vector<SummaryRow>& summary);

}  // namespace marflow::eval
