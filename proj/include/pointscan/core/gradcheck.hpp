#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pointscan/core/ops.hpp"
#include "pointscan/core/tensor.hpp"

namespace pointscan {

struct GradCheckReport {
  double max_rel_err = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::string worst_site;
  std::size_t coords_checked = 0;

  bool ok(double tol) const {
    return std::isfinite(max_rel_err) && max_rel_err < tol;
  }
};

// Compares tape gradients of a scalar-valued function against central finite
// differences. Every requires_grad input participates; large inputs can be
// subsampled with a deterministic stride via max_coords_per_input.
//
// The relative error uses max(|analytic|, |numeric|, floor) as denominator;
// coordinate pairs where both sides are below `tiny` are counted as exact,
// since the finite-difference probe carries no signal there.
inline GradCheckReport check_gradients(
    const std::string& op_name,
    const std::function<TensorPtr(const std::vector<TensorPtr>&)>& fn,
    const std::vector<TensorPtr>& inputs, double step = 1e-5,
    std::size_t max_coords_per_input = 0, double denom_floor = 1e-4,
    double tiny = 1e-7) {
  GradCheckReport report;

  Tape tape;
  {
    TapeScope scope(tape);
    for (const auto& in : inputs) in->zero_grad();
    auto loss = fn(inputs);
    if (!loss->is_scalar())
      throw DimError("check_gradients(" + op_name +
                     "): function must return a scalar");
    if (!std::isfinite(loss->item()))
      throw NumericError("check_gradients(" + op_name +
                         "): non-finite loss value");
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i]->requires_grad) continue;
    inputs[i]->ensure_grad();
    analytic[i] = inputs[i]->grad;
  }

  auto eval = [&]() {
    NoGradScope ng;
    return fn(inputs)->item();
  };

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i]->requires_grad) continue;
    const std::size_t n = inputs[i]->size();
    std::size_t stride = 1;
    if (max_coords_per_input > 0 && n > max_coords_per_input)
      stride = (n + max_coords_per_input - 1) / max_coords_per_input;
    for (std::size_t j = 0; j < n; j += stride) {
      const double orig = inputs[i]->data[j];
      inputs[i]->data[j] = orig + step;
      const double up = eval();
      inputs[i]->data[j] = orig - step;
      const double down = eval();
      inputs[i]->data[j] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[i][j];
      if (!std::isfinite(numeric) || !std::isfinite(a))
        throw NumericError("check_gradients(" + op_name +
                           "): non-finite gradient at input " +
                           std::to_string(i) + " coord " + std::to_string(j));
      report.coords_checked += 1;
      if (std::abs(a) < tiny && std::abs(numeric) < tiny) continue;
      const double denom =
          std::max(std::max(std::abs(a), std::abs(numeric)), denom_floor);
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
        report.worst_site = op_name + " input " + std::to_string(i) +
                            " coord " + std::to_string(j);
      }
    }
  }
  return report;
}

}  // namespace pointscan
