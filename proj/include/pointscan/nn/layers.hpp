#pragma once

#include <cstddef>
#include <string>

#include "pointscan/core/ops.hpp"
#include "pointscan/nn/params.hpp"

namespace pointscan {

// Affine map y = x W + b with W stored as (in, out).
struct Linear {
  TensorPtr w;
  TensorPtr b;

  Linear() = default;

  Linear(ParamStore& ps, const std::string& prefix, std::size_t in,
         std::size_t out, bool bias = true) {
    w = ps.fan_in_uniform(prefix + ".weight", {in, out});
    if (bias) b = ps.uniform(prefix + ".bias", {out}, 1.0 / std::sqrt(double(in)));
  }

  TensorPtr operator()(const TensorPtr& x) const {
    auto y = matmul(x, w);
    return b ? add_rowvec(y, b) : y;
  }
};

struct LayerNormModule {
  TensorPtr gamma;
  TensorPtr beta;
  double eps = 1e-5;

  LayerNormModule() = default;

  LayerNormModule(ParamStore& ps, const std::string& prefix, std::size_t dim) {
    gamma = ps.full(prefix + ".gamma", {dim}, 1.0);
    beta = ps.zeros(prefix + ".beta", {dim});
  }

  TensorPtr operator()(const TensorPtr& x) const {
    return layer_norm(x, gamma, beta, eps);
  }
};

struct BatchNormModule {
  TensorPtr gamma;
  TensorPtr beta;
  TensorPtr running_mean;
  TensorPtr running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  BatchNormModule() = default;

  BatchNormModule(ParamStore& ps, const std::string& prefix, std::size_t dim) {
    gamma = ps.full(prefix + ".gamma", {dim}, 1.0);
    beta = ps.zeros(prefix + ".beta", {dim});
    running_mean = ps.buffer(prefix + ".running_mean", {dim}, 0.0);
    running_var = ps.buffer(prefix + ".running_var", {dim}, 1.0);
  }

  TensorPtr operator()(const TensorPtr& x, bool training) const {
    return batch_norm(x, gamma, beta, running_mean, running_var, training,
                      momentum, eps);
  }
};

}  // namespace pointscan
