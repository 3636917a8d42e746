#include "marflow/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace marflow::ad {
namespace {

double contract(const DiffFn& fn, std::span<const Tensor<double>> inputs, const Tensor<double>& u) {
  Tape<double> tape(false);
  std::vector<Var<double>> vars;
  for (const auto& in : inputs) vars.push_back(tape.constant(in));
  const Tensor<double>& y = fn(tape, vars).value();
  return (y.array() * u.array()).sum();
}

}  // namespace

VjpReport vjp_check(const DiffFn& fn, std::span<const Tensor<double>> inputs, double tolerance, unsigned seed,
                    double step) {
  VjpReport report;
  std::vector<Tensor<double>> grads;
  Tensor<double> u;
  {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& in : inputs) vars.push_back(tape.input(in));
    Var<double> y = fn(tape, vars);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    u = Tensor<double>(y.shape());
    for (auto& v : u.values()) v = normal(rng);
    tape.backward(y, u);
    for (const auto& v : vars) {
      Tensor<double> g = tape.grad(v);
      grads.push_back(g.empty() ? Tensor<double>(v.shape()) : g);
    }
  }

  std::vector<Tensor<double>> point(inputs.begin(), inputs.end());
  for (std::size_t k = 0; k < point.size(); ++k) {
    Tensor<double> numeric(point[k].shape());
    for (Index i = 0; i < point[k].size(); ++i) {
      const double saved = point[k][i];
      point[k][i] = saved + step;
      const double fp = contract(fn, point, u);
      point[k][i] = saved - step;
      const double fm = contract(fn, point, u);
      point[k][i] = saved;
      numeric[i] = (fp - fm) / (2 * step);
    }
    const double scale = std::max(numeric.array().abs().maxCoeff(), 1e-12);
    const double err = (grads[k].array() - numeric.array()).abs().maxCoeff() / scale;
    report.per_input.push_back(err);
    report.max_rel_error = std::max(report.max_rel_error, err);
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace marflow::ad
