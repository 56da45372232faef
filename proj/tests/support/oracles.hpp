#pragma once

// Independent reference implementations used to cross-check the library.
// These deliberately avoid the library's algorithms and data layouts: the
// sampler recomputes min-distances from scratch every round, and the scan
// oracle evaluates the closed-form unrolled recurrence.

#include <cmath>
#include <cstddef>
#include <vector>

#include "pointscan/core/rng.hpp"
#include "pointscan/core/tensor.hpp"
#include "pointscan/geometry/cloud.hpp"

namespace testsupport {

// Greedy max-min sampling, quadratic and stateless: each round recomputes
// every point's distance to the nearest picked point.
inline std::vector<std::size_t> fps_brute(
    const std::vector<pointscan::Point3>& pts, std::size_t count,
    std::size_t seed_index) {
  std::vector<std::size_t> picks = {seed_index};
  while (picks.size() < count) {
    std::size_t best_idx = pts.size();
    double best_dist = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      bool taken = false;
      for (std::size_t p : picks)
        if (p == i) {
          taken = true;
          break;
        }
      if (taken) continue;
      double nearest = pointscan::dist2(pts[i], pts[picks[0]]);
      for (std::size_t p : picks)
        nearest = std::min(nearest, pointscan::dist2(pts[i], pts[p]));
      if (nearest > best_dist) {
        best_dist = nearest;
        best_idx = i;
      }
    }
    picks.push_back(best_idx);
  }
  return picks;
}

// Unrolled form of the scan recurrence:
//   h[t] = sum_{tau<=t} (prod_{k=tau+1..t} exp(delta[k]A)) * delta[tau]B[tau]u[tau]
// evaluated term by term, O(L^2 S) per channel.
inline std::vector<double> scan_unrolled(const pointscan::TensorPtr& u,
                                         const pointscan::TensorPtr& delta,
                                         const pointscan::TensorPtr& a,
                                         const pointscan::TensorPtr& b,
                                         const pointscan::TensorPtr& c,
                                         const pointscan::TensorPtr& skip) {
  const std::size_t L = u->shape[0], D = u->shape[1], S = a->shape[1];
  std::vector<double> y(L * D, 0.0);
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t t = 0; t < L; ++t) {
      double acc = 0.0;
      for (std::size_t s = 0; s < S; ++s) {
        double h = 0.0;
        for (std::size_t tau = 0; tau <= t; ++tau) {
          double decay = 1.0;
          for (std::size_t k = tau + 1; k <= t; ++k)
            decay *= std::exp(delta->data[k * D + d] * a->data[d * S + s]);
          h += decay * delta->data[tau * D + d] * b->data[tau * S + s] *
               u->data[tau * D + d];
        }
        acc += c->data[t * S + s] * h;
      }
      y[t * D + d] = acc + skip->data[d] * u->data[t * D + d];
    }
  }
  return y;
}

// Random scan instance with well-conditioned values: positive small deltas,
// negative state matrix, order-one inputs.
struct ScanInstance {
  pointscan::TensorPtr u, delta, a, b, c, skip;
};

inline ScanInstance random_scan_instance(pointscan::RngStream& rng,
                                         std::size_t L, std::size_t D,
                                         std::size_t S) {
  using pointscan::Tensor;
  ScanInstance inst;
  inst.u = Tensor::zeros({L, D});
  inst.delta = Tensor::zeros({L, D});
  inst.a = Tensor::zeros({D, S});
  inst.b = Tensor::zeros({L, S});
  inst.c = Tensor::zeros({L, S});
  inst.skip = Tensor::zeros({D});
  for (auto& v : inst.u->data) v = rng.normal();
  for (auto& v : inst.delta->data) v = rng.uniform(0.01, 0.3);
  for (auto& v : inst.a->data) v = -rng.uniform(0.2, 4.0);
  for (auto& v : inst.b->data) v = rng.normal();
  for (auto& v : inst.c->data) v = rng.normal();
  for (auto& v : inst.skip->data) v = rng.normal();
  return inst;
}

inline std::vector<pointscan::Point3> random_points(pointscan::RngStream& rng,
                                                    std::size_t n,
                                                    double span = 1.0) {
  std::vector<pointscan::Point3> pts(n);
  for (auto& p : pts)
    for (int k = 0; k < 3; ++k)
      p[std::size_t(k)] = rng.uniform(-span, span);
  return pts;
}

}  // namespace testsupport
