#pragma once

#include <cmath>

#include "pointscan/core/rng.hpp"
#include "pointscan/geometry/cloud.hpp"

namespace pointscan {

struct AugmentOptions {
  bool scale = true;       // uniform scale in [0.8, 1.2]
  bool translate = true;   // per-axis shift in [-0.1, 0.1]
  bool rotate_z = false;   // yaw in [0, 2*pi)
};

// Training-time perturbation: rotate, then scale, then translate. Each draw
// is consumed only when its transform is enabled, so a fixed option set
// replays identically from the same stream.
inline PointCloud augment_cloud(const PointCloud& cloud,
                                const AugmentOptions& opt, RngStream& rng) {
  PointCloud out = cloud;
  if (opt.rotate_z) {
    const double yaw = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    const double c = std::cos(yaw), s = std::sin(yaw);
    for (auto& p : out.points) {
      const double x = c * p[0] - s * p[1];
      const double y = s * p[0] + c * p[1];
      p[0] = x;
      p[1] = y;
    }
  }
  if (opt.scale) {
    const double f = rng.uniform(0.8, 1.2);
    for (auto& p : out.points)
      for (int k = 0; k < 3; ++k) p[std::size_t(k)] *= f;
  }
  if (opt.translate) {
    Point3 t;
    for (int k = 0; k < 3; ++k) t[std::size_t(k)] = rng.uniform(-0.1, 0.1);
    for (auto& p : out.points)
      for (int k = 0; k < 3; ++k) p[std::size_t(k)] += t[std::size_t(k)];
  }
  return out;
}

inline PointCloud scaled_cloud(const PointCloud& cloud, double factor) {
  PointCloud out = cloud;
  for (auto& p : out.points)
    for (int k = 0; k < 3; ++k) p[std::size_t(k)] *= factor;
  return out;
}

}  // namespace pointscan
