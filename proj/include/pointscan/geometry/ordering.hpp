#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "pointscan/core/error.hpp"
#include "pointscan/core/rng.hpp"
#include "pointscan/geometry/curves.hpp"

namespace pointscan {

// Group orderings. The first four are score-free baselines computed from
// keypoint geometry alone; sio/bio are driven by learned importance scores
// and live with the scoring code.
enum class OrderStrategy { random, xyz, morton, hilbert, sio, bio };

inline OrderStrategy parse_order_strategy(const std::string& name) {
  if (name == "random") return OrderStrategy::random;
  if (name == "xyz") return OrderStrategy::xyz;
  if (name == "morton") return OrderStrategy::morton;
  if (name == "hilbert") return OrderStrategy::hilbert;
  if (name == "sio") return OrderStrategy::sio;
  if (name == "bio") return OrderStrategy::bio;
  throw ConfigError("unknown ordering strategy '" + name + "'");
}

inline const char* order_strategy_name(OrderStrategy s) {
  switch (s) {
    case OrderStrategy::random: return "random";
    case OrderStrategy::xyz: return "xyz";
    case OrderStrategy::morton: return "morton";
    case OrderStrategy::hilbert: return "hilbert";
    case OrderStrategy::sio: return "sio";
    case OrderStrategy::bio: return "bio";
  }
  throw ArgError("order_strategy_name: bad enum value");
}

// Permutation of the keypoints for the score-free strategies. Curve codes
// are taken over the keypoints' own bounding cube; ties and equal sort keys
// fall back to the smaller index so results are reproducible.
inline std::vector<std::size_t> order_baseline(
    const std::vector<Point3>& keypoints, OrderStrategy strategy,
    RngStream* rng = nullptr, int bits = 10) {
  const std::size_t n = keypoints.size();
  if (n == 0) throw ArgError("order_baseline: no keypoints");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  switch (strategy) {
    case OrderStrategy::random: {
      if (!rng)
        throw ArgError("order_baseline: random strategy needs a stream");
      rng->shuffle(perm);
      return perm;
    }
    case OrderStrategy::xyz: {
      std::sort(perm.begin(), perm.end(),
                [&](std::size_t a, std::size_t b) {
                  const Point3& pa = keypoints[a];
                  const Point3& pb = keypoints[b];
                  if (pa[0] != pb[0]) return pa[0] < pb[0];
                  if (pa[1] != pb[1]) return pa[1] < pb[1];
                  if (pa[2] != pb[2]) return pa[2] < pb[2];
                  return a < b;
                });
      return perm;
    }
    case OrderStrategy::morton:
    case OrderStrategy::hilbert: {
      const CurveBox box = CurveBox::around(keypoints);
      std::vector<std::uint64_t> code(n);
      for (std::size_t i = 0; i < n; ++i)
        code[i] = strategy == OrderStrategy::morton
                      ? morton_code(keypoints[i], box, bits)
                      : hilbert_code(keypoints[i], box, bits);
      std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
        if (code[a] != code[b]) return code[a] < code[b];
        return a < b;
      });
      return perm;
    }
    case OrderStrategy::sio:
    case OrderStrategy::bio:
      throw ArgError(
          "order_baseline: score-driven strategies need importance scores");
  }
  throw ArgError("order_baseline: bad enum value");
}

}  // namespace pointscan
