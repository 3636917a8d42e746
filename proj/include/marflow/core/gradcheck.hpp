#pragma once

#include <functional>
#include <string>
#include <vector>

#include "marflow/core/tape.hpp"

namespace marflow::ad {

struct VjpReport {
  double max_rel_error = 0.0;
  // Per input: worst |analytic - numeric| over the inf-norm of the numeric
  // gradient.
  std::vector<double> per_input;
  bool passed = false;
};

using DiffFn = std::function<Var<double>(Tape<double>&, std::span<const Var<double>>)>;

// Compares the tape's vector-Jacobian product against central finite
// differences of <u, f(x)> for a fixed random cotangent u. A failing check
// is reported, never thrown.
VjpReport vjp_check(const DiffFn& fn, std::span<const Tensor<double>> inputs, double tolerance = 1e-3,
                    unsigned seed = 0, double step = 1e-5);

}  // namespace marflow::ad
