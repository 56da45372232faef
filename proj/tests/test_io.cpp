#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "pointscan/io/augment.hpp"
#include "pointscan/io/dataset.hpp"
#include "pointscan/io/formats.hpp"
#include "pointscan/io/synthetic.hpp"
#include "support/oracles.hpp"

using namespace pointscan;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

const fs::path kData = POINTSCAN_TEST_DATA;

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("pointscan-io-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("xyz parser skips comments and extra columns", "[io]") {
  auto pts = parse_cloud((kData / "sample.xyz").string());
  REQUIRE(pts.size() == 3);
  CHECK(pts[0] == Point3{1.0, 2.0, 3.0});
  CHECK(pts[1] == Point3{-0.5, 0.25, 0.01});
  CHECK(pts[2] == Point3{4.0, 5.0, 6.0});
}

TEST_CASE("xyz parser reports the offending line", "[io]") {
  CHECK_THROWS_WITH(parse_cloud((kData / "bad_token.xyz").string()),
                    ContainsSubstring("bad_token.xyz:2") &&
                        ContainsSubstring("'five'"));
  CHECK_THROWS_WITH(parse_cloud((kData / "short_row.xyz").string()),
                    ContainsSubstring("short_row.xyz:1") &&
                        ContainsSubstring("3 coordinates"));
  CHECK_THROWS_AS(parse_cloud((kData / "comments_only.xyz").string()),
                  DataError);
  CHECK_THROWS_AS(parse_cloud((kData / "does_not_exist.xyz").string()),
                  DataError);
}

TEST_CASE("off parser reads vertices and ignores faces", "[io]") {
  auto pts = parse_cloud((kData / "cube.off").string());
  REQUIRE(pts.size() == 8);
  CHECK(pts[0] == Point3{-1.0, -1.0, -1.0});
  CHECK(pts[7] == Point3{1.0, 1.0, 1.0});
  std::set<std::array<double, 3>> unique(pts.begin(), pts.end());
  CHECK(unique.size() == 8);

  auto tri = parse_cloud((kData / "single_line.off").string());
  REQUIRE(tri.size() == 3);
  CHECK(tri[1] == Point3{1.0, 0.0, 0.0});
}

TEST_CASE("off parser rejects malformed files", "[io]") {
  CHECK_THROWS_WITH(parse_cloud((kData / "bad_header.off").string()),
                    ContainsSubstring("bad_header.off:1") &&
                        ContainsSubstring("OFF header"));
  CHECK_THROWS_WITH(parse_cloud((kData / "truncated.off").string()),
                    ContainsSubstring("1 of 5"));
}

TEST_CASE("ply parser handles extra properties and elements", "[io]") {
  auto pts = parse_cloud((kData / "fixture.ply").string());
  REQUIRE(pts.size() == 3);
  CHECK(pts[1] == Point3{1.5, -2.0, 0.5});
  CHECK(pts[2] == Point3{-1.0, -1.0, 2.0});
}

TEST_CASE("ply parser honors property order", "[io]") {
  auto pts = parse_cloud((kData / "permuted.ply").string());
  REQUIRE(pts.size() == 2);
  CHECK(pts[0] == Point3{1.0, 2.0, 3.0});
  CHECK(pts[1] == Point3{4.0, 5.0, 6.0});
}

TEST_CASE("ply parser rejects unsupported layouts", "[io]") {
  CHECK_THROWS_WITH(parse_cloud((kData / "binary.ply").string()),
                    ContainsSubstring("only ascii"));
  CHECK_THROWS_WITH(parse_cloud((kData / "no_xyz.ply").string()),
                    ContainsSubstring("lacks x/y/z"));
  CHECK_THROWS_WITH(parse_cloud((kData / "list_prop.ply").string()),
                    ContainsSubstring("list property"));
  CHECK_THROWS_WITH(parse_cloud((kData / "not_ply.ply").string()),
                    ContainsSubstring("missing ply header"));
}

TEST_CASE("format detection from file extension", "[io]") {
  CHECK(format_from_path("a/b/model.off") == "off");
  CHECK(format_from_path("UPPER.PLY") == "ply");
  CHECK(format_from_path("pts.XyZ") == "xyz");
  CHECK_THROWS_AS(format_from_path("mesh.obj"), ArgError);
  CHECK_THROWS_AS(format_from_path("no_extension"), ArgError);
  CHECK_THROWS_AS(parse_cloud((kData / "sample.xyz").string(), "step"),
                  ArgError);
}

TEST_CASE("write_xyz round-trips coordinates exactly", "[io]") {
  auto dir = fresh_dir("roundtrip");
  RngStream rng(61, "io-roundtrip");
  auto pts = testsupport::random_points(rng, 40, 3.0);
  pts.push_back({1.0 / 3.0, -1e-17, 12345.678901234567});
  const std::string path = (dir / "out.xyz").string();
  write_xyz(path, pts);
  auto back = parse_cloud(path);
  REQUIRE(back.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    CHECK(back[i] == pts[i]);  // %.17g round-trips doubles bit-exactly
}

TEST_CASE("colored ply output parses back", "[io]") {
  auto dir = fresh_dir("plyout");
  RngStream rng(62, "io-ply");
  auto pts = testsupport::random_points(rng, 10, 1.0);
  std::vector<Color3> colors(10, Color3{255, 128, 0});
  const std::string path = (dir / "colored.ply").string();
  write_ply_colored(path, pts, colors);

  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  CHECK(first == "ply");

  auto back = parse_cloud(path);
  REQUIRE(back.size() == 10);
  for (std::size_t i = 0; i < 10; ++i)
    for (int k = 0; k < 3; ++k)
      CHECK(back[i][std::size_t(k)] ==
            Approx(pts[i][std::size_t(k)]).margin(1e-8));

  CHECK_THROWS_AS(write_ply_colored(path, pts, std::vector<Color3>(3)),
                  ArgError);
}

TEST_CASE("downsampling keeps an ordered subset of distinct points", "[io]") {
  RngStream points_rng(63, "io-resample");
  auto pts = testsupport::random_points(points_rng, 30, 1.0);
  RngStream rng(64, "io-resample-stream");
  auto out = resample_points(pts, 12, rng);
  REQUIRE(out.size() == 12);
  // the output must be a subsequence of the input
  std::size_t cursor = 0;
  for (const auto& p : out) {
    while (cursor < pts.size() && pts[cursor] != p) ++cursor;
    REQUIRE(cursor < pts.size());
    ++cursor;
  }
  std::set<std::array<double, 3>> unique(out.begin(), out.end());
  CHECK(unique.size() == 12);

  RngStream rng2(64, "io-resample-stream");
  CHECK(resample_points(pts, 12, rng2) == out);  // deterministic
}

TEST_CASE("upsampling keeps every point and appends duplicates", "[io]") {
  RngStream points_rng(65, "io-upsample");
  auto pts = testsupport::random_points(points_rng, 8, 1.0);
  RngStream rng(66, "io-upsample-stream");
  auto out = resample_points(pts, 13, rng);
  REQUIRE(out.size() == 13);
  for (std::size_t i = 0; i < 8; ++i) CHECK(out[i] == pts[i]);
  for (std::size_t i = 8; i < 13; ++i)
    CHECK(std::find(pts.begin(), pts.end(), out[i]) != pts.end());

  RngStream rng3(67, "io-upsample-id");
  CHECK(resample_points(pts, 8, rng3) == pts);  // exact size: no-op
  CHECK_THROWS_AS(resample_points(pts, 0, rng3), ArgError);
  CHECK_THROWS_AS(resample_points({}, 4, rng3), DataError);
}

TEST_CASE("manifests round-trip and validate", "[io]") {
  auto dir = fresh_dir("manifest");
  DatasetManifest m;
  m.class_names = {"sphere", "cube"};
  m.points_per_cloud = 128;
  m.entries = {{"train/sphere_000.xyz", 0}, {"train/cube_000.xyz", 1}};
  const std::string path = (dir / "train.json").string();
  save_manifest(path, m);

  auto back = load_manifest(path);
  CHECK(back.class_names == m.class_names);
  CHECK(back.points_per_cloud == 128);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[0].file == "train/sphere_000.xyz");
  CHECK(back.entries[1].label == 1);
  CHECK(back.root == dir.string());

  auto write_and_load = [&](const char* name, const std::string& text) {
    const std::string p = (dir / name).string();
    { std::ofstream(p) << text; }
    return p;
  };
  CHECK_THROWS_AS(load_manifest((dir / "missing.json").string()), DataError);
  CHECK_THROWS_WITH(load_manifest(write_and_load("bad.json", "{oops")),
                    ContainsSubstring("bad.json"));
  CHECK_THROWS_AS(load_manifest(write_and_load("arr.json", "[1, 2]")),
                  ParseError);
  CHECK_THROWS_WITH(
      load_manifest(write_and_load(
          "unknown.json",
          R"({"classes":["a","b"],"points_per_cloud":4,"entries":[],"extra":1})")),
      ContainsSubstring("unknown manifest key 'extra'"));
  CHECK_THROWS_AS(
      load_manifest(write_and_load(
          "range.json",
          R"({"classes":["a"],"points_per_cloud":4,"entries":[{"file":"x.xyz","class":1}]})")),
      ParseError);
  CHECK_THROWS_AS(load_manifest(write_and_load(
                      "noclasses.json",
                      R"({"classes":[],"points_per_cloud":4,"entries":[]})")),
                  ParseError);
  CHECK_THROWS_AS(load_manifest(write_and_load(
                      "nopoints.json",
                      R"({"classes":["a"],"points_per_cloud":0,"entries":[]})")),
                  ParseError);
  CHECK_THROWS_AS(
      load_manifest(write_and_load(
          "badentry.json",
          R"({"classes":["a"],"points_per_cloud":4,"entries":[{"file":"x.xyz"}]})")),
      ParseError);
}

TEST_CASE("synthetic generation is deterministic per split", "[io]") {
  SyntheticSpec spec;
  spec.classes = {"sphere", "cube"};
  spec.per_class = 2;
  spec.points = 32;
  spec.jitter = 0.02;
  spec.seed = 5;
  auto a = generate_synthetic(spec, "train");
  auto b = generate_synthetic(spec, "train");
  REQUIRE(a.size() == 4);
  CHECK(a.class_names == std::vector<std::string>{"sphere", "cube"});
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.clouds[i].points == b.clouds[i].points);  // bitwise
    CHECK(a.clouds[i].label == b.clouds[i].label);
  }
  CHECK(a.clouds[0].label == 0);
  CHECK(a.clouds[2].label == 1);

  auto other = generate_synthetic(spec, "test");
  CHECK(other.clouds[0].points != a.clouds[0].points);

  RngStream bad_rng(0, "io-bad-shape");
  CHECK_THROWS_AS(synth_cloud("pyramid", 8, 0.0, bad_rng), ArgError);
}

TEST_CASE("noise-free shapes satisfy their surface equations", "[io]") {
  RngStream rng(68, "io-shapes");
  auto sphere = synth_cloud("sphere", 500, 0.0, rng);
  for (const auto& p : sphere.points) {
    const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    CHECK(r == Approx(1.0).margin(1e-12));
  }

  auto cyl = synth_cloud("cylinder", 500, 0.0, rng);
  for (const auto& p : cyl.points) {
    const double radial = std::sqrt(p[0] * p[0] + p[1] * p[1]);
    const bool lateral = std::abs(radial - 0.6) < 1e-12;
    const bool cap = std::abs(std::abs(p[2]) - 1.0) < 1e-12 && radial <= 0.6 + 1e-12;
    CHECK((lateral || cap));
  }

  auto cone = synth_cloud("cone", 500, 0.0, rng);
  for (const auto& p : cone.points) {
    const double radial = std::sqrt(p[0] * p[0] + p[1] * p[1]);
    const double slant_r = 0.8 * (1.0 - p[2]) / 2.0;
    const bool lateral = std::abs(radial - slant_r) < 1e-9;
    const bool base = std::abs(p[2] + 1.0) < 1e-12 && radial <= 0.8 + 1e-12;
    CHECK((lateral || base));
  }

  // the cube keeps |z| <= 1 with two of six faces pinned at |z| = 1
  auto cube = synth_cloud("cube", 1200, 0.0, rng);
  std::size_t pinned = 0;
  for (const auto& p : cube.points) {
    CHECK(std::abs(p[2]) <= 1.0 + 1e-12);
    if (std::abs(std::abs(p[2]) - 1.0) < 1e-12) ++pinned;
  }
  CHECK(pinned > 300);
  CHECK(pinned < 500);
}

TEST_CASE("sphere sampling is balanced across octants", "[io]") {
  RngStream rng(69, "io-octants");
  auto cloud = synth_cloud("sphere", 4000, 0.0, rng);
  std::array<double, 8> count = {};
  for (const auto& p : cloud.points) {
    const std::size_t oct = (p[0] > 0 ? 1u : 0u) | (p[1] > 0 ? 2u : 0u) |
                            (p[2] > 0 ? 4u : 0u);
    count[oct] += 1.0;
  }
  double chi2 = 0.0;
  const double expect = 4000.0 / 8.0;
  for (double c : count) chi2 += (c - expect) * (c - expect) / expect;
  CHECK(chi2 < 24.32);  // 7 dof, p = 0.001
}

TEST_CASE("exported splits reload normalized and labeled", "[io]") {
  auto dir = fresh_dir("export");
  SyntheticSpec spec;
  spec.classes = {"sphere", "cube"};
  spec.per_class = 2;
  spec.points = 48;
  spec.jitter = 0.01;
  spec.seed = 3;
  const std::string manifest = export_synthetic(spec, "train", dir.string());
  CHECK(manifest == (dir / "train.json").string());
  CHECK(fs::exists(dir / "train" / "sphere_000.xyz"));
  CHECK(fs::exists(dir / "train" / "cube_001.xyz"));

  auto ds = load_dataset_file(manifest, 0);
  REQUIRE(ds.size() == 4);
  CHECK(ds.num_classes() == 2);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& cloud = ds.clouds[i];
    REQUIRE(cloud.points.size() == 48);
    CHECK(cloud.label == (i < 2 ? 0 : 1));
    Point3 centroid = {0, 0, 0};
    double max_r2 = 0.0;
    for (const auto& p : cloud.points) {
      for (int k = 0; k < 3; ++k) centroid[std::size_t(k)] += p[std::size_t(k)];
      max_r2 = std::max(max_r2, p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    }
    for (int k = 0; k < 3; ++k)
      CHECK(centroid[std::size_t(k)] / 48.0 == Approx(0.0).margin(1e-12));
    CHECK(max_r2 == Approx(1.0).epsilon(1e-12));
  }

  // loading twice with the same seed is bit-identical
  auto ds2 = load_dataset_file(manifest, 0);
  for (std::size_t i = 0; i < ds.size(); ++i)
    CHECK(ds.clouds[i].points == ds2.clouds[i].points);
}

TEST_CASE("augmentation applies enabled transforms within bounds", "[io]") {
  RngStream base_rng(70, "io-augment");
  PointCloud cloud;
  cloud.points = testsupport::random_points(base_rng, 20, 1.0);
  for (auto& p : cloud.points)
    for (int k = 0; k < 3; ++k)
      if (std::abs(p[std::size_t(k)]) < 0.05) p[std::size_t(k)] = 0.1;
  cloud.label = 3;

  AugmentOptions scale_only{true, false, false};
  RngStream r1(71, "aug");
  auto scaled = augment_cloud(cloud, scale_only, r1);
  CHECK(scaled.label == 3);
  const double f = scaled.points[0][0] / cloud.points[0][0];
  CHECK(f >= 0.8);
  CHECK(f <= 1.2);
  for (std::size_t i = 0; i < cloud.points.size(); ++i)
    for (int k = 0; k < 3; ++k)
      CHECK(scaled.points[i][std::size_t(k)] ==
            Approx(cloud.points[i][std::size_t(k)] * f).margin(1e-15));

  AugmentOptions translate_only{false, true, false};
  RngStream r2(72, "aug");
  auto moved = augment_cloud(cloud, translate_only, r2);
  for (int k = 0; k < 3; ++k) {
    const double d =
        moved.points[0][std::size_t(k)] - cloud.points[0][std::size_t(k)];
    CHECK(d >= -0.1);
    CHECK(d <= 0.1);
    for (std::size_t i = 1; i < cloud.points.size(); ++i)
      CHECK(moved.points[i][std::size_t(k)] -
                cloud.points[i][std::size_t(k)] ==
            Approx(d).margin(1e-15));
  }

  AugmentOptions rotate_only{false, false, true};
  RngStream r3(73, "aug");
  auto spun = augment_cloud(cloud, rotate_only, r3);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    CHECK(spun.points[i][2] == cloud.points[i][2]);  // yaw keeps z
    const double before =
        cloud.points[i][0] * cloud.points[i][0] +
        cloud.points[i][1] * cloud.points[i][1];
    const double after = spun.points[i][0] * spun.points[i][0] +
                         spun.points[i][1] * spun.points[i][1];
    CHECK(after == Approx(before).epsilon(1e-12));
  }
}

TEST_CASE("disabled augmentations consume no randomness", "[io]") {
  PointCloud cloud;
  cloud.points = {{0.5, -0.25, 0.75}};

  AugmentOptions none{false, false, false};
  RngStream used(74, "aug-draws");
  auto same = augment_cloud(cloud, none, used);
  CHECK(same.points == cloud.points);
  RngStream fresh(74, "aug-draws");
  CHECK(used.uniform() == fresh.uniform());  // not a single draw consumed

  // scale-only consumes exactly one draw
  AugmentOptions scale_only{true, false, false};
  RngStream s1(75, "aug-draws");
  augment_cloud(cloud, scale_only, s1);
  RngStream s2(75, "aug-draws");
  s2.uniform();
  CHECK(s1.uniform() == s2.uniform());

  auto doubled = scaled_cloud(cloud, 2.0);
  CHECK(doubled.points[0] == Point3{1.0, -0.5, 1.5});
}
