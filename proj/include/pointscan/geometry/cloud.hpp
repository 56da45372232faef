#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pointscan/core/error.hpp"

namespace pointscan {

using Point3 = std::array<double, 3>;

struct PointCloud {
  std::vector<Point3> points;
  int label = -1;
};

inline double dist2(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

// Centers the cloud on its centroid and scales the farthest point onto the
// unit sphere. Idempotent up to floating-point residue. A cloud that
// collapses to a single location keeps scale 1 to avoid dividing by zero.
inline std::vector<Point3> normalize_points(const std::vector<Point3>& raw) {
  if (raw.empty()) throw DataError("normalize_points: empty point cloud");
  Point3 centroid = {0.0, 0.0, 0.0};
  for (const auto& p : raw) {
    for (int k = 0; k < 3; ++k) {
      if (!std::isfinite(p[k]))
        throw DataError("normalize_points: non-finite coordinate");
      centroid[k] += p[k];
    }
  }
  const double inv_n = 1.0 / double(raw.size());
  for (int k = 0; k < 3; ++k) centroid[k] *= inv_n;
  std::vector<Point3> out(raw.size());
  double max2 = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (int k = 0; k < 3; ++k) out[i][k] = raw[i][k] - centroid[k];
    max2 = std::max(max2, out[i][0] * out[i][0] + out[i][1] * out[i][1] +
                              out[i][2] * out[i][2]);
  }
  if (max2 > 0.0) {
    const double inv_r = 1.0 / std::sqrt(max2);
    for (auto& p : out)
      for (int k = 0; k < 3; ++k) p[k] *= inv_r;
  }
  return out;
}

inline PointCloud normalize_cloud(const PointCloud& cloud) {
  PointCloud out;
  out.points = normalize_points(cloud.points);
  out.label = cloud.label;
  return out;
}

// Farthest point sampling. Greedy max-min: each pick maximizes the distance
// to the nearest already-picked point, ties resolved to the smallest index.
// Returns the picked indices in pick order, starting from seed_index.
inline std::vector<std::size_t> fps(const std::vector<Point3>& points,
                                    std::size_t count,
                                    std::size_t seed_index = 0) {
  const std::size_t n = points.size();
  if (count == 0) throw ArgError("fps: count must be positive");
  if (count > n)
    throw ArgError("fps: requested " + std::to_string(count) +
                   " samples from " + std::to_string(n) + " points");
  if (seed_index >= n) throw ArgError("fps: seed index out of range");
  std::vector<std::size_t> picks;
  picks.reserve(count);
  std::vector<double> best(n);
  std::vector<char> taken(n, 0);
  picks.push_back(seed_index);
  taken[seed_index] = 1;
  for (std::size_t i = 0; i < n; ++i)
    best[i] = dist2(points[i], points[seed_index]);
  while (picks.size() < count) {
    std::size_t next = n;
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (best[i] > far) {
        far = best[i];
        next = i;
      }
    }
    picks.push_back(next);
    taken[next] = 1;
    for (std::size_t i = 0; i < n; ++i)
      best[i] = std::min(best[i], dist2(points[i], points[next]));
  }
  return picks;
}

// A cloud partitioned into keypoint-centered neighborhoods. Coordinates in
// `groups` are stored relative to their keypoint; `member_indices` maps each
// slot back to the source cloud.
struct GroupedCloud {
  std::vector<Point3> keypoints;
  std::vector<std::vector<Point3>> groups;
  std::vector<std::vector<std::size_t>> member_indices;

  std::size_t group_count() const { return keypoints.size(); }
};

// Gathers the k nearest neighbors of each keypoint (the keypoint itself
// included), ordered by distance with index as tiebreak.
inline GroupedCloud knn_group(const std::vector<Point3>& points,
                              const std::vector<std::size_t>& keypoint_indices,
                              std::size_t k) {
  const std::size_t n = points.size();
  if (k == 0) throw ArgError("knn_group: k must be positive");
  if (k > n)
    throw ArgError("knn_group: k = " + std::to_string(k) + " exceeds " +
                   std::to_string(n) + " points");
  GroupedCloud out;
  out.keypoints.reserve(keypoint_indices.size());
  out.groups.reserve(keypoint_indices.size());
  out.member_indices.reserve(keypoint_indices.size());
  std::vector<std::pair<double, std::size_t>> order(n);
  for (std::size_t ki : keypoint_indices) {
    if (ki >= n) throw ArgError("knn_group: keypoint index out of range");
    const Point3& center = points[ki];
    for (std::size_t i = 0; i < n; ++i) order[i] = {dist2(points[i], center), i};
    std::partial_sort(order.begin(), order.begin() + std::ptrdiff_t(k),
                      order.end());
    out.keypoints.push_back(center);
    std::vector<Point3> grp(k);
    std::vector<std::size_t> members(k);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t src = order[j].second;
      members[j] = src;
      for (int c = 0; c < 3; ++c) grp[j][c] = points[src][c] - center[c];
    }
    out.groups.push_back(std::move(grp));
    out.member_indices.push_back(std::move(members));
  }
  return out;
}

inline GroupedCloud group_cloud(const std::vector<Point3>& points,
                                std::size_t group_count, std::size_t k,
                                std::size_t seed_index = 0) {
  return knn_group(points, fps(points, group_count, seed_index), k);
}

}  // namespace pointscan
