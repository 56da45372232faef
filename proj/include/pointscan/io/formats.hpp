#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pointscan/core/error.hpp"
#include "pointscan/geometry/cloud.hpp"

namespace pointscan {

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

inline ParseError at_line(const std::string& path, std::size_t line,
                          const std::string& msg) {
  return ParseError(path + ":" + std::to_string(line) + ": " + msg);
}

inline bool parse_double(const std::string& tok, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(tok, &used);
    return used == tok.size();
  } catch (...) {
    return false;
  }
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace detail

inline std::string format_from_path(const std::string& path) {
  const std::size_t dot = path.find_last_of('.');
  if (dot == std::string::npos)
    throw ArgError("cannot infer cloud format from '" + path + "'");
  const std::string ext = detail::lower(path.substr(dot + 1));
  if (ext == "off" || ext == "ply" || ext == "xyz") return ext;
  throw ArgError("unsupported cloud format '." + ext + "'");
}

// Whitespace-separated "x y z" per line; blank lines and '#' comments are
// skipped, columns beyond the third are ignored.
inline std::vector<Point3> parse_xyz(std::istream& in,
                                     const std::string& path) {
  std::vector<Point3> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno += 1;
    auto toks = detail::split_ws(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks.size() < 3)
      throw detail::at_line(path, lineno, "expected 3 coordinates, got " +
                                              std::to_string(toks.size()));
    Point3 p;
    for (int k = 0; k < 3; ++k)
      if (!detail::parse_double(toks[std::size_t(k)], p[std::size_t(k)]))
        throw detail::at_line(path, lineno,
                              "non-numeric coordinate '" + toks[std::size_t(k)] + "'");
    pts.push_back(p);
  }
  return pts;
}

// OFF meshes: only the vertex block is consumed, faces are ignored. Both the
// "OFF\n<counts>" and the single-line "OFF <counts>" header forms load.
inline std::vector<Point3> parse_off(std::istream& in,
                                     const std::string& path) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    lineno += 1;
    header = detail::split_ws(line);
    if (!header.empty() && header[0][0] == '#') header.clear();
  }
  if (header.empty()) throw detail::at_line(path, lineno, "empty OFF file");
  if (detail::lower(header[0]) != "off")
    throw detail::at_line(path, lineno, "missing OFF header");
  std::vector<std::string> counts(header.begin() + 1, header.end());
  while (counts.empty() && std::getline(in, line)) {
    lineno += 1;
    counts = detail::split_ws(line);
    if (!counts.empty() && counts[0][0] == '#') counts.clear();
  }
  if (counts.size() < 2)
    throw detail::at_line(path, lineno, "missing OFF element counts");
  double nv_raw = 0.0;
  if (!detail::parse_double(counts[0], nv_raw) || nv_raw < 0.0)
    throw detail::at_line(path, lineno, "bad vertex count '" + counts[0] + "'");
  const std::size_t nv = std::size_t(nv_raw);
  std::vector<Point3> pts;
  pts.reserve(nv);
  while (pts.size() < nv) {
    if (!std::getline(in, line))
      throw detail::at_line(path, lineno,
                            "OFF file ends after " + std::to_string(pts.size()) +
                                " of " + std::to_string(nv) + " vertices");
    lineno += 1;
    auto toks = detail::split_ws(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks.size() < 3)
      throw detail::at_line(path, lineno, "vertex needs 3 coordinates");
    Point3 p;
    for (int k = 0; k < 3; ++k)
      if (!detail::parse_double(toks[std::size_t(k)], p[std::size_t(k)]))
        throw detail::at_line(path, lineno,
                              "non-numeric coordinate '" + toks[std::size_t(k)] + "'");
    pts.push_back(p);
  }
  return pts;
}

// ASCII PLY with x/y/z properties on the vertex element; other elements and
// properties are tolerated and skipped.
inline std::vector<Point3> parse_ply(std::istream& in,
                                     const std::string& path) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || detail::split_ws(line) != std::vector<std::string>{"ply"})
    throw detail::at_line(path, 1, "missing ply header");
  lineno = 1;
  bool ascii = false;
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;
  };
  std::vector<Element> elements;
  for (;;) {
    if (!std::getline(in, line))
      throw detail::at_line(path, lineno, "header ends before end_header");
    lineno += 1;
    auto toks = detail::split_ws(line);
    if (toks.empty() || toks[0] == "comment") continue;
    if (toks[0] == "format") {
      if (toks.size() >= 2 && toks[1] == "ascii") ascii = true;
      else throw detail::at_line(path, lineno, "only ascii PLY is supported");
    } else if (toks[0] == "element") {
      if (toks.size() < 3)
        throw detail::at_line(path, lineno, "malformed element line");
      double cnt = 0.0;
      if (!detail::parse_double(toks[2], cnt) || cnt < 0.0)
        throw detail::at_line(path, lineno, "bad element count '" + toks[2] + "'");
      elements.push_back({toks[1], std::size_t(cnt), {}});
    } else if (toks[0] == "property") {
      if (elements.empty())
        throw detail::at_line(path, lineno, "property before any element");
      if (toks.size() >= 2 && toks[1] == "list")
        elements.back().properties.push_back("__list__");
      else
        elements.back().properties.push_back(toks.back());
    } else if (toks[0] == "end_header") {
      break;
    }
  }
  if (!ascii) throw detail::at_line(path, lineno, "missing format line");
  std::vector<Point3> pts;
  for (const auto& el : elements) {
    if (el.name != "vertex") {
      for (std::size_t i = 0; i < el.count; ++i) {
        if (!std::getline(in, line))
          throw detail::at_line(path, lineno, "file ends inside element '" +
                                                  el.name + "'");
        lineno += 1;
      }
      continue;
    }
    std::ptrdiff_t ix = -1, iy = -1, iz = -1;
    for (std::size_t p = 0; p < el.properties.size(); ++p) {
      if (el.properties[p] == "x") ix = std::ptrdiff_t(p);
      if (el.properties[p] == "y") iy = std::ptrdiff_t(p);
      if (el.properties[p] == "z") iz = std::ptrdiff_t(p);
      if (el.properties[p] == "__list__")
        throw detail::at_line(path, lineno,
                              "list property on vertex element");
    }
    if (ix < 0 || iy < 0 || iz < 0)
      throw detail::at_line(path, lineno, "vertex element lacks x/y/z");
    pts.reserve(el.count);
    for (std::size_t i = 0; i < el.count; ++i) {
      if (!std::getline(in, line))
        throw detail::at_line(path, lineno,
                              "file ends after " + std::to_string(i) + " of " +
                                  std::to_string(el.count) + " vertices");
      lineno += 1;
      auto toks = detail::split_ws(line);
      if (toks.size() < el.properties.size())
        throw detail::at_line(path, lineno, "vertex row too short");
      Point3 p;
      const std::ptrdiff_t order[3] = {ix, iy, iz};
      for (int k = 0; k < 3; ++k)
        if (!detail::parse_double(toks[std::size_t(order[k])], p[std::size_t(k)]))
          throw detail::at_line(path, lineno, "non-numeric coordinate '" +
                                                  toks[std::size_t(order[k])] + "'");
      pts.push_back(p);
    }
  }
  return pts;
}

inline std::vector<Point3> parse_cloud(const std::string& path,
                                       std::string format = "auto") {
  if (format == "auto") format = format_from_path(path);
  std::ifstream in(path);
  if (!in) throw DataError("cannot open cloud file '" + path + "'");
  std::vector<Point3> pts;
  if (format == "xyz") pts = parse_xyz(in, path);
  else if (format == "off") pts = parse_off(in, path);
  else if (format == "ply") pts = parse_ply(in, path);
  else throw ArgError("unsupported cloud format '" + format + "'");
  if (pts.empty()) throw DataError("cloud file '" + path + "' has no points");
  return pts;
}

inline void write_xyz(const std::string& path,
                      const std::vector<Point3>& pts) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  char buf[96];
  for (const auto& p : pts) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p[0], p[1], p[2]);
    out << buf;
  }
  if (!out) throw DataError("write failure on '" + path + "'");
}

using Color3 = std::array<int, 3>;

inline void write_ply_colored(const std::string& path,
                              const std::vector<Point3>& pts,
                              const std::vector<Color3>& colors) {
  if (pts.size() != colors.size())
    throw ArgError("write_ply_colored: one color per point required");
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << pts.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  char buf[128];
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %d %d %d\n", pts[i][0],
                  pts[i][1], pts[i][2], colors[i][0], colors[i][1],
                  colors[i][2]);
    out << buf;
  }
  if (!out) throw DataError("write failure on '" + path + "'");
}

}  // namespace pointscan
