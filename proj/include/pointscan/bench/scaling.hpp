#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "pointscan/core/rng.hpp"
#include "pointscan/core/tensor.hpp"
#include "pointscan/mixer/mamba.hpp"

namespace pointscan {

struct ScalingPoint {
  std::size_t length = 0;
  double seconds = 0.0;
};

struct ScalingResult {
  std::string mixer;
  std::size_t dim = 0;
  std::size_t repeats = 0;
  std::vector<ScalingPoint> points;
  double slope = 0.0;  // fitted log-log exponent
};

// Least-squares slope of log(seconds) against log(length): the empirical
// cost exponent. ~1 for the scan mixer, ~2 for attention.
inline double fit_loglog_slope(const std::vector<ScalingPoint>& pts) {
  if (pts.size() < 2)
    throw ArgError("fit_loglog_slope: need at least two measurements");
  double mx = 0.0, my = 0.0;
  for (const auto& p : pts) {
    if (p.length == 0 || !(p.seconds > 0.0))
      throw ArgError("fit_loglog_slope: lengths and times must be positive");
    mx += std::log(double(p.length));
    my += std::log(p.seconds);
  }
  mx /= double(pts.size());
  my /= double(pts.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : pts) {
    const double dx = std::log(double(p.length)) - mx;
    const double dy = std::log(p.seconds) - my;
    sxx += dx * dx;
    sxy += dx * dy;
  }
  if (sxx == 0.0) throw ArgError("fit_loglog_slope: all lengths equal");
  return sxy / sxx;
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Times one mixer layer forward (no gradients) over increasing sequence
// lengths and fits the cost exponent. Input tokens are drawn once per length
// from a seeded stream; each length is measured `repeats` times after one
// warmup run, keeping the median.
inline ScalingResult scaling_bench(const std::string& mixer,
                                   const std::vector<std::size_t>& lengths,
                                   std::size_t dim, std::size_t repeats,
                                   std::uint64_t seed = 0,
                                   std::size_t heads = 4) {
  if (mixer != "ssm" && mixer != "attention")
    throw ConfigError("scaling_bench: mixer must be 'ssm' or 'attention'");
  if (lengths.size() < 2)
    throw ArgError("scaling_bench: need at least two lengths");
  for (std::size_t l : lengths)
    if (l == 0) throw ArgError("scaling_bench: zero-length sequence");
  if (dim == 0) throw ArgError("scaling_bench: dim must be positive");
  if (repeats == 0) throw ArgError("scaling_bench: repeats must be positive");

  ParamStore ps(seed);
  MambaLayer scan_layer;
  AttentionMixer attn_layer;
  if (mixer == "ssm") {
    MambaDims dims{dim, 2 * dim, 16, 4, default_dt_rank(dim)};
    scan_layer = MambaLayer(ps, "bench.ssm", dims);
  } else {
    attn_layer = AttentionMixer(ps, "bench.attn", dim, heads);
  }

  ScalingResult res;
  res.mixer = mixer;
  res.dim = dim;
  res.repeats = repeats;
  NoGradScope ng;
  for (std::size_t L : lengths) {
    auto tokens = Tensor::zeros({L, dim});
    RngStream rng(seed, "bench-input", L);
    for (auto& v : tokens->data) v = rng.normal();
    auto run_once = [&] {
      if (mixer == "ssm") return scan_layer(tokens);
      return attn_layer(tokens);
    };
    (void)run_once();  // warmup
    std::vector<double> times;
    times.reserve(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      auto out = run_once();
      const auto t1 = std::chrono::steady_clock::now();
      if (out->size() != L * dim)
        throw DimError("scaling_bench: unexpected output shape");
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    res.points.push_back({L, median_of(times)});
  }
  res.slope = fit_loglog_slope(res.points);
  return res;
}

}  // namespace pointscan
