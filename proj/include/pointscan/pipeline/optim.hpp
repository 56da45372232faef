#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "pointscan/core/error.hpp"
#include "pointscan/nn/params.hpp"

namespace pointscan {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Decoupled-weight-decay Adam with bias-corrected moments. Decay is applied
// to the parameter before the moment update, so it never leaks into the
// moment statistics. Gradients are validated up front: a non-finite gradient
// aborts the whole step without touching any parameter.
inline void adamw_step(ParamStore& ps, double lr, double weight_decay,
                       const AdamWConfig& cfg = {}) {
  if (!(lr >= 0.0)) throw ArgError("adamw_step: negative learning rate");
  if (!(weight_decay >= 0.0))
    throw ArgError("adamw_step: negative weight decay");
  for (const auto& name : ps.names()) {
    const ParamEntry& e = ps.entry(name);
    if (!e.trainable || e.value->grad.empty()) continue;
    for (double g : e.value->grad)
      if (!std::isfinite(g))
        throw NumericError("adamw_step: non-finite gradient in '" + name +
                           "'");
  }
  for (const auto& name : ps.names()) {
    ParamEntry& e = ps.entry(name);
    if (!e.trainable) continue;
    Tensor& t = *e.value;
    const std::size_t n = t.size();
    if (e.m.size() != n) {
      e.m.assign(n, 0.0);
      e.v.assign(n, 0.0);
    }
    e.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(e.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(e.step));
    for (std::size_t i = 0; i < n; ++i) {
      const double g = t.grad.empty() ? 0.0 : t.grad[i];
      t.data[i] -= lr * weight_decay * t.data[i];
      e.m[i] = cfg.beta1 * e.m[i] + (1.0 - cfg.beta1) * g;
      e.v[i] = cfg.beta2 * e.v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = e.m[i] / bc1;
      const double vhat = e.v[i] / bc2;
      t.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

// Learning rate at a fractional epoch: linear warmup from zero, then cosine
// decay from the base rate down to lr_min at the final epoch.
inline double lr_at(double epoch, double base_lr, double lr_min,
                    std::size_t warmup_epochs, std::size_t total_epochs) {
  if (total_epochs == 0) throw ArgError("lr_at: total_epochs must be positive");
  if (epoch < 0.0) epoch = 0.0;
  if (epoch > double(total_epochs)) epoch = double(total_epochs);
  if (warmup_epochs > 0 && epoch < double(warmup_epochs))
    return base_lr * (epoch / double(warmup_epochs));
  if (total_epochs == warmup_epochs) return base_lr;
  const double t =
      (epoch - double(warmup_epochs)) / double(total_epochs - warmup_epochs);
  const double pi = 3.14159265358979323846;
  return lr_min + 0.5 * (base_lr - lr_min) * (1.0 + std::cos(pi * t));
}

}  // namespace pointscan
