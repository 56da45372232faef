#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pointscan/core/error.hpp"
#include "pointscan/core/rng.hpp"
#include "pointscan/geometry/cloud.hpp"
#include "pointscan/io/formats.hpp"

namespace pointscan {

struct Dataset {
  std::vector<PointCloud> clouds;
  std::vector<std::string> class_names;

  std::size_t size() const { return clouds.size(); }
  std::size_t num_classes() const { return class_names.size(); }
};

struct ManifestEntry {
  std::string file;
  std::size_t label = 0;
};

// JSON sidecar describing one split: class names, the resampling target, and
// one file/label pair per cloud. File paths are relative to the manifest.
struct DatasetManifest {
  std::string root;
  std::vector<std::string> class_names;
  std::size_t points_per_cloud = 0;
  std::vector<ManifestEntry> entries;
};

inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(path + ": manifest must be an object");
  DatasetManifest m;
  m.root = std::filesystem::path(path).parent_path().string();
  for (const auto& [key, value] : j.items()) {
    if (key == "classes") {
      if (!value.is_array())
        throw ParseError(path + ": 'classes' must be an array");
      for (const auto& c : value) {
        if (!c.is_string())
          throw ParseError(path + ": class names must be strings");
        m.class_names.push_back(c.get<std::string>());
      }
    } else if (key == "points_per_cloud") {
      if (!value.is_number_unsigned())
        throw ParseError(path + ": 'points_per_cloud' must be a non-negative integer");
      m.points_per_cloud = value.get<std::size_t>();
    } else if (key == "entries") {
      if (!value.is_array())
        throw ParseError(path + ": 'entries' must be an array");
      for (const auto& e : value) {
        if (!e.is_object() || !e.contains("file") || !e.contains("class"))
          throw ParseError(path + ": each entry needs 'file' and 'class'");
        ManifestEntry me;
        if (!e["file"].is_string())
          throw ParseError(path + ": entry 'file' must be a string");
        me.file = e["file"].get<std::string>();
        if (!e["class"].is_number_unsigned())
          throw ParseError(path + ": entry 'class' must be a non-negative integer");
        me.label = e["class"].get<std::size_t>();
        m.entries.push_back(std::move(me));
      }
    } else {
      throw ParseError(path + ": unknown manifest key '" + key + "'");
    }
  }
  if (m.class_names.empty())
    throw ParseError(path + ": manifest lists no classes");
  if (m.points_per_cloud == 0)
    throw ParseError(path + ": points_per_cloud must be positive");
  for (const auto& e : m.entries) {
    if (e.file.empty()) throw ParseError(path + ": empty entry file name");
    if (e.label >= m.class_names.size())
      throw ParseError(path + ": entry class " + std::to_string(e.label) +
                       " out of range for " +
                       std::to_string(m.class_names.size()) + " classes");
  }
  return m;
}

inline void save_manifest(const std::string& path, const DatasetManifest& m) {
  nlohmann::json j;
  j["classes"] = m.class_names;
  j["points_per_cloud"] = m.points_per_cloud;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries)
    entries.push_back({{"file", e.file}, {"class", e.label}});
  j["entries"] = std::move(entries);
  std::ofstream out(path);
  if (!out) throw DataError("cannot open manifest '" + path + "' for writing");
  out << j.dump(2) << "\n";
  if (!out) throw DataError("write failure on manifest '" + path + "'");
}

// Brings a cloud to exactly `target` points. Downsampling keeps a uniformly
// chosen subset in original order; upsampling keeps every point and appends
// uniformly drawn duplicates.
inline std::vector<Point3> resample_points(const std::vector<Point3>& pts,
                                           std::size_t target,
                                           RngStream& rng) {
  if (target == 0) throw ArgError("resample_points: target must be positive");
  if (pts.empty()) throw DataError("resample_points: empty cloud");
  if (pts.size() == target) return pts;
  std::vector<Point3> out;
  out.reserve(target);
  if (pts.size() > target) {
    std::vector<std::size_t> idx(pts.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(idx);
    idx.resize(target);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) out.push_back(pts[i]);
  } else {
    out = pts;
    while (out.size() < target)
      out.push_back(pts[std::size_t(rng.below(pts.size()))]);
  }
  return out;
}

// Parse, resample, center and rescale every entry of a manifest. The
// resampling stream is keyed per entry index, so loading is order-stable.
inline Dataset load_dataset(const DatasetManifest& m, std::uint64_t seed) {
  Dataset ds;
  ds.class_names = m.class_names;
  ds.clouds.reserve(m.entries.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& entry = m.entries[i];
    const std::string full =
        (std::filesystem::path(m.root) / entry.file).string();
    PointCloud cloud;
    RngStream rng(seed, "resample", i);
    cloud.points = normalize_points(
        resample_points(parse_cloud(full), m.points_per_cloud, rng));
    cloud.label = int(entry.label);
    ds.clouds.push_back(std::move(cloud));
  }
  return ds;
}

inline Dataset load_dataset_file(const std::string& manifest_path,
                                 std::uint64_t seed) {
  return load_dataset(load_manifest(manifest_path), seed);
}

}  // namespace pointscan
