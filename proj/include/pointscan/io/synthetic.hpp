#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "pointscan/core/error.hpp"
#include "pointscan/core/rng.hpp"
#include "pointscan/io/dataset.hpp"

namespace pointscan {

// Deterministic surface-sampled shape classes. Clouds are drawn per
// (seed, split, class, instance) so train and test splits never share
// geometry and regeneration is reproducible file for file.
struct SyntheticSpec {
  std::vector<std::string> classes = {"sphere", "cube", "cylinder", "cone"};
  std::size_t per_class = 64;
  std::size_t points = 256;
  double jitter = 0.02;
  std::uint64_t seed = 0;
};

namespace detail {

inline Point3 sample_sphere(RngStream& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

inline Point3 sample_cube(RngStream& rng) {
  const std::size_t face = std::size_t(rng.below(6));
  const double u = rng.uniform(-1.0, 1.0);
  const double v = rng.uniform(-1.0, 1.0);
  const double s = face % 2 == 0 ? 1.0 : -1.0;
  switch (face / 2) {
    case 0: return {s, u, v};
    case 1: return {u, s, v};
    default: return {u, v, s};
  }
}

inline Point3 sample_cylinder(RngStream& rng) {
  const double pi = 3.14159265358979323846;
  const double radius = 0.6, half_h = 1.0;
  const double lateral = 2.0 * pi * radius * 2.0 * half_h;
  const double caps = 2.0 * pi * radius * radius;
  const double pick = rng.uniform(0.0, lateral + caps);
  const double theta = rng.uniform(0.0, 2.0 * pi);
  if (pick < lateral) {
    const double z = rng.uniform(-half_h, half_h);
    return {radius * std::cos(theta), radius * std::sin(theta), z};
  }
  const double z = pick < lateral + caps * 0.5 ? half_h : -half_h;
  const double r = radius * std::sqrt(rng.uniform());
  return {r * std::cos(theta), r * std::sin(theta), z};
}

inline Point3 sample_cone(RngStream& rng) {
  const double pi = 3.14159265358979323846;
  const double radius = 0.8, apex_z = 1.0, base_z = -1.0;
  const double slant = std::sqrt(radius * radius + (apex_z - base_z) * (apex_z - base_z));
  const double lateral = pi * radius * slant;
  const double base = pi * radius * radius;
  const double theta = rng.uniform(0.0, 2.0 * pi);
  if (rng.uniform(0.0, lateral + base) < lateral) {
    // area-uniform along the slant: distance from the apex goes as sqrt(u)
    const double t = std::sqrt(rng.uniform());
    const double r = t * radius;
    const double z = apex_z + t * (base_z - apex_z);
    return {r * std::cos(theta), r * std::sin(theta), z};
  }
  const double r = radius * std::sqrt(rng.uniform());
  return {r * std::cos(theta), r * std::sin(theta), base_z};
}

}  // namespace detail

inline PointCloud synth_cloud(const std::string& cls, std::size_t points,
                              double jitter, RngStream& rng) {
  if (points == 0) throw ArgError("synth_cloud: points must be positive");
  Point3 (*sampler)(RngStream&) = nullptr;
  if (cls == "sphere") sampler = detail::sample_sphere;
  else if (cls == "cube") sampler = detail::sample_cube;
  else if (cls == "cylinder") sampler = detail::sample_cylinder;
  else if (cls == "cone") sampler = detail::sample_cone;
  else throw ArgError("unknown synthetic class '" + cls + "'");
  PointCloud cloud;
  cloud.points.reserve(points);
  // one shared orientation per cloud so instances differ by pose
  const double yaw = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  for (std::size_t i = 0; i < points; ++i) {
    Point3 p = sampler(rng);
    Point3 q = {cy * p[0] - sy * p[1], sy * p[0] + cy * p[1], p[2]};
    if (jitter > 0.0)
      for (int k = 0; k < 3; ++k) q[std::size_t(k)] += jitter * rng.normal();
    cloud.points.push_back(q);
  }
  return cloud;
}

// In-memory split: clouds come back already normalized and labeled.
inline Dataset generate_synthetic(const SyntheticSpec& spec,
                                  const std::string& split) {
  if (spec.classes.empty())
    throw ArgError("generate_synthetic: no classes requested");
  if (spec.jitter < 0.0)
    throw ArgError("generate_synthetic: jitter must be non-negative");
  Dataset ds;
  ds.class_names = spec.classes;
  ds.clouds.reserve(spec.classes.size() * spec.per_class);
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      RngStream rng(spec.seed, "synth:" + split, c, i);
      PointCloud cloud =
          synth_cloud(spec.classes[c], spec.points, spec.jitter, rng);
      cloud.points = normalize_points(cloud.points);
      cloud.label = int(c);
      ds.clouds.push_back(std::move(cloud));
    }
  }
  return ds;
}

// Writes a generated split to disk as xyz files plus a manifest, laid out as
// <out_dir>/<split>/<class>_<index>.xyz and <out_dir>/<split>.json. The raw
// (pre-normalization) surface samples are stored; loading normalizes.
inline std::string export_synthetic(const SyntheticSpec& spec,
                                    const std::string& split,
                                    const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / split);
  DatasetManifest m;
  m.class_names = spec.classes;
  m.points_per_cloud = spec.points;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      RngStream rng(spec.seed, "synth:" + split, c, i);
      PointCloud cloud =
          synth_cloud(spec.classes[c], spec.points, spec.jitter, rng);
      char name[128];
      std::snprintf(name, sizeof(name), "%s_%03zu.xyz",
                    spec.classes[c].c_str(), i);
      const std::string rel = split + "/" + name;
      write_xyz((fs::path(out_dir) / rel).string(), cloud.points);
      m.entries.push_back({rel, c});
    }
  }
  const std::string manifest_path =
      (fs::path(out_dir) / (split + ".json")).string();
  save_manifest(manifest_path, m);
  return manifest_path;
}

}  // namespace pointscan
