#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pointscan/pointscan.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pointscan;

namespace {

json config_echo(const ModelConfig& cfg) { return cfg.to_json(); }

void echo_line(const json& j) {
  std::cout << "config " << j.dump() << "\n";
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string out;
  std::vector<std::string> classes = {"sphere", "cube", "cylinder", "cone"};
  std::size_t train_per_class = 64;
  std::size_t test_per_class = 32;
  std::size_t points = 256;
  double jitter = 0.02;
  std::uint64_t seed = 0;
};

int cmd_gen(const GenArgs& a) {
  SyntheticSpec spec;
  spec.classes = a.classes;
  spec.points = a.points;
  spec.jitter = a.jitter;
  spec.seed = a.seed;
  json echo = {{"command", "gen"},
               {"out", a.out},
               {"classes", a.classes},
               {"train_per_class", a.train_per_class},
               {"test_per_class", a.test_per_class},
               {"points", a.points},
               {"jitter", a.jitter},
               {"seed", a.seed}};
  echo_line(echo);
  spec.per_class = a.train_per_class;
  const std::string train_manifest = export_synthetic(spec, "train", a.out);
  spec.per_class = a.test_per_class;
  const std::string test_manifest = export_synthetic(spec, "test", a.out);
  std::cout << "wrote " << train_manifest << " ("
            << a.classes.size() * a.train_per_class << " clouds)\n";
  std::cout << "wrote " << test_manifest << " ("
            << a.classes.size() * a.test_per_class << " clouds)\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config_path;
  std::string data_dir;
  std::string out_dir;
  std::int64_t seed = -1;       // <0: keep config value
  std::int64_t epochs = -1;     // <0: keep config value
  std::string dtype = "f32";
  bool rotate = false;
  bool verbose = false;
};

std::string pick_manifest(const std::string& dir,
                          std::initializer_list<const char*> names,
                          bool required) {
  for (const char* n : names) {
    const fs::path p = fs::path(dir) / n;
    if (fs::exists(p)) return p.string();
  }
  if (required) {
    std::string tried;
    for (const char* n : names) tried += std::string(" ") + n;
    throw DataError("no manifest found in '" + dir + "' (tried" + tried + ")");
  }
  return "";
}

int cmd_train(const TrainArgs& a) {
  ModelConfig cfg;
  if (!a.config_path.empty()) cfg = ModelConfig::load_file(a.config_path);
  if (a.seed >= 0) cfg.seed = std::uint64_t(a.seed);
  if (a.epochs >= 0) cfg.epochs = std::size_t(a.epochs);
  if (a.rotate) cfg.aug_rotate = true;
  cfg.validate();
  echo_line(config_echo(cfg));

  const std::string train_manifest =
      pick_manifest(a.data_dir, {"train.json"}, true);
  const std::string val_manifest =
      pick_manifest(a.data_dir, {"val.json", "test.json"}, false);
  Dataset train_set = load_dataset_file(train_manifest, cfg.seed);
  Dataset val_set;
  if (!val_manifest.empty()) val_set = load_dataset_file(val_manifest, cfg.seed);
  if (train_set.num_classes() != cfg.num_classes)
    throw ConfigError("config expects " + std::to_string(cfg.num_classes) +
                      " classes but the dataset lists " +
                      std::to_string(train_set.num_classes()));

  TrainOptions opt;
  opt.out_dir = a.out_dir;
  opt.checkpoint_dtype = parse_checkpoint_dtype(a.dtype);
  opt.verbose = a.verbose;
  TrainReport report = train_model(train_set, val_set, cfg, opt);

  fs::create_directories(a.out_dir);
  std::ofstream cfg_out(fs::path(a.out_dir) / "config.json");
  cfg_out << cfg.to_json().dump(2) << "\n";

  std::cout << "epochs " << report.rows.size() << "\n";
  std::cout << "final_train_acc " << report.final_train_acc << "\n";
  std::cout << "best_val_acc " << report.best_val_acc << " at epoch "
            << report.best_epoch << "\n";
  std::cout << "log " << report.csv_path << "\n";
  std::cout << "checkpoint " << report.final_checkpoint_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data_dir;
  std::string split = "test";
  std::size_t votes = 1;
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;  // 0: from config
  bool as_json = false;
};

int cmd_eval(const EvalArgs& a) {
  RestoredModel rm = restore_model(a.checkpoint);
  const std::string manifest = pick_manifest(
      a.data_dir, {(a.split + ".json").c_str()}, true);
  Dataset data = load_dataset_file(manifest, rm.config.seed);
  if (data.num_classes() != rm.config.num_classes)
    throw DataError("checkpoint expects " +
                    std::to_string(rm.config.num_classes) +
                    " classes but the dataset lists " +
                    std::to_string(data.num_classes()));
  const std::size_t bs = a.batch_size ? a.batch_size : rm.config.batch_size;
  EvalResult res = evaluate(*rm.model, data, bs, a.votes, a.seed);

  json per_class = json::array();
  for (std::size_t c = 0; c < data.num_classes(); ++c)
    per_class.push_back({{"class", data.class_names[c]},
                         {"correct", res.per_class_correct[c]},
                         {"total", res.per_class_total[c]}});
  json preds = json::array();
  for (std::size_t i = 0; i < res.predictions.size(); ++i)
    preds.push_back({{"label", res.labels[i]}, {"pred", res.predictions[i]}});
  if (a.as_json) {
    json out = {{"config", config_echo(rm.config)},
                {"accuracy", res.accuracy},
                {"num_samples", data.size()},
                {"votes", a.votes},
                {"per_class", per_class},
                {"predictions", preds},
                {"degenerate_pools", res.degenerate_pools}};
    std::cout << out.dump(2) << "\n";
  } else {
    echo_line(config_echo(rm.config));
    std::printf("accuracy %.6f (%zu samples, %zu votes)\n", res.accuracy,
                data.size(), a.votes);
    for (std::size_t c = 0; c < data.num_classes(); ++c)
      std::printf("  %-12s %zu/%zu\n", data.class_names[c].c_str(),
                  res.per_class_correct[c], res.per_class_total[c]);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct OrderArgs {
  std::string checkpoint;
  std::string input;
  std::string strategy;  // empty: from checkpoint config
  std::string emit_ply;
  std::size_t points = 0;  // 0: use the file as-is
  std::uint64_t seed = 0;
  bool as_json = false;
};

int cmd_order(const OrderArgs& a) {
  RestoredModel rm = restore_model(a.checkpoint);
  ModelConfig cfg = rm.config;
  if (!a.strategy.empty()) cfg.ordering = a.strategy;
  const OrderStrategy strategy = parse_order_strategy(cfg.ordering);

  PointCloud cloud;
  cloud.points = parse_cloud(a.input);
  if (a.points > 0) {
    RngStream rng(a.seed, "order-resample");
    cloud.points = resample_points(cloud.points, a.points, rng);
  }
  cloud.points = normalize_points(cloud.points);

  NoGradScope ng;
  GroupedCloud grouped = rm.model->make_groups(cloud);
  TensorPtr scores = rm.model->score_groups(grouped);
  std::vector<std::size_t> perm;
  RngStream order_rng(a.seed, "order-cmd");
  switch (strategy) {
    case OrderStrategy::sio: perm = sio_perm(scores->data); break;
    case OrderStrategy::bio: perm = bio_perm(scores->data); break;
    default:
      perm = order_baseline(grouped.keypoints, strategy, &order_rng,
                            cfg.curve_bits);
  }

  std::string ply_path;
  if (!a.emit_ply.empty()) {
    // color each point by its nearest keypoint's score:
    // lowest score yellow (255,255,0), highest red (255,0,0)
    double lo = scores->data[0], hi = scores->data[0];
    for (double s : scores->data) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    std::vector<Color3> colors(cloud.points.size());
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      std::size_t owner = 0;
      double best = dist2(cloud.points[i], grouped.keypoints[0]);
      for (std::size_t g = 1; g < grouped.keypoints.size(); ++g) {
        const double d = dist2(cloud.points[i], grouped.keypoints[g]);
        if (d < best) {
          best = d;
          owner = g;
        }
      }
      const double t =
          hi > lo ? (scores->data[owner] - lo) / (hi - lo) : 1.0;
      colors[i] = {255, int(std::lround(255.0 * (1.0 - t))), 0};
    }
    write_ply_colored(a.emit_ply, cloud.points, colors);
    ply_path = a.emit_ply;
  }

  if (a.as_json) {
    json out = {{"config", config_echo(cfg)},
                {"strategy", order_strategy_name(strategy)},
                {"perm", perm},
                {"scores", scores->data}};
    if (!ply_path.empty()) out["ply"] = ply_path;
    std::cout << out.dump(2) << "\n";
  } else {
    echo_line(config_echo(cfg));
    std::cout << "strategy " << order_strategy_name(strategy) << "\n";
    std::cout << "perm";
    for (std::size_t p : perm) std::cout << " " << p;
    std::cout << "\nscores";
    for (double s : scores->data) std::printf(" %.6g", s);
    std::cout << "\n";
    if (!ply_path.empty()) std::cout << "ply " << ply_path << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string mixer;
  std::vector<std::size_t> lengths = {128, 256, 512, 1024, 2048, 4096};
  std::size_t dim = 64;
  std::size_t repeats = 3;
  std::uint64_t seed = 0;
  std::string out_csv;
  bool as_json = false;
};

int cmd_bench(const BenchArgs& a) {
  ScalingResult res = scaling_bench(a.mixer, a.lengths, a.dim, a.repeats,
                                    a.seed);
  if (!a.out_csv.empty()) {
    std::ofstream csv(a.out_csv);
    if (!csv) throw DataError("cannot open '" + a.out_csv + "' for writing");
    csv << "length,seconds\n";
    for (const auto& p : res.points)
      csv << p.length << "," << p.seconds << "\n";
  }
  if (a.as_json) {
    json pts = json::array();
    for (const auto& p : res.points)
      pts.push_back({{"length", p.length}, {"seconds", p.seconds}});
    json out = {{"config",
                 {{"mixer", a.mixer},
                  {"lengths", a.lengths},
                  {"dim", a.dim},
                  {"repeats", a.repeats},
                  {"seed", a.seed}}},
                {"points", pts},
                {"slope", res.slope}};
    if (!a.out_csv.empty()) out["csv"] = a.out_csv;
    std::cout << out.dump(2) << "\n";
  } else {
    json echo = {{"command", "bench"}, {"mixer", a.mixer},
                 {"lengths", a.lengths}, {"dim", a.dim},
                 {"repeats", a.repeats}, {"seed", a.seed}};
    echo_line(echo);
    for (const auto& p : res.points)
      std::printf("length %zu seconds %.6g\n", p.length, p.seconds);
    std::printf("slope %.4f\n", res.slope);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"point cloud classifier: grouped transformer encoder, "
               "importance-driven ordering, selective-scan mixer"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* sub_gen = app.add_subcommand("gen", "generate a synthetic dataset");
  sub_gen->add_option("--out", gen.out, "output directory")->required();
  sub_gen->add_option("--classes", gen.classes, "class names")
      ->delimiter(',');
  sub_gen->add_option("--train-per-class", gen.train_per_class,
                      "training clouds per class");
  sub_gen->add_option("--test-per-class", gen.test_per_class,
                      "test clouds per class");
  sub_gen->add_option("--points", gen.points, "points per cloud");
  sub_gen->add_option("--jitter", gen.jitter, "surface noise sigma");
  sub_gen->add_option("--seed", gen.seed, "generator seed");

  TrainArgs train;
  CLI::App* sub_train = app.add_subcommand("train", "train a classifier");
  sub_train->add_option("--config", train.config_path, "JSON config file");
  sub_train->add_option("--data", train.data_dir, "dataset directory")
      ->required();
  sub_train->add_option("--out", train.out_dir, "output directory")
      ->required();
  sub_train->add_option("--seed", train.seed, "override config seed");
  sub_train->add_option("--epochs", train.epochs, "override config epochs");
  sub_train->add_option("--dtype", train.dtype, "checkpoint dtype (f32|f64)");
  sub_train->add_flag("--rotate", train.rotate, "enable z-rotation augmentation");
  sub_train->add_flag("--verbose", train.verbose, "print one line per epoch");

  EvalArgs eval;
  CLI::App* sub_eval = app.add_subcommand("eval", "evaluate a checkpoint");
  sub_eval->add_option("--checkpoint", eval.checkpoint, "checkpoint file")
      ->required();
  sub_eval->add_option("--data", eval.data_dir, "dataset directory")
      ->required();
  sub_eval->add_option("--split", eval.split, "manifest name to evaluate");
  sub_eval->add_option("--voting", eval.votes, "average logits over N scaled copies");
  sub_eval->add_option("--seed", eval.seed, "voting seed");
  sub_eval->add_option("--batch-size", eval.batch_size, "override batch size");
  sub_eval->add_flag("--json", eval.as_json, "machine-readable output");

  OrderArgs order;
  CLI::App* sub_order =
      app.add_subcommand("order", "inspect the group ordering of one cloud");
  sub_order->add_option("--checkpoint", order.checkpoint, "checkpoint file")
      ->required();
  sub_order->add_option("--input", order.input, "cloud file (off|ply|xyz)")
      ->required();
  sub_order->add_option("--strategy", order.strategy,
                        "override ordering strategy");
  sub_order->add_option("--emit-ply", order.emit_ply,
                        "write a score-colored PLY here");
  sub_order->add_option("--points", order.points,
                        "resample the cloud to this many points first");
  sub_order->add_option("--seed", order.seed, "stream seed (random strategy)");
  sub_order->add_flag("--json", order.as_json, "machine-readable output");

  BenchArgs bench;
  CLI::App* sub_bench =
      app.add_subcommand("bench", "time a sequence mixer across lengths");
  sub_bench->add_option("--mixer", bench.mixer, "ssm or attention")
      ->required();
  sub_bench->add_option("--lengths", bench.lengths, "sequence lengths")
      ->delimiter(',');
  sub_bench->add_option("--dim", bench.dim, "token width");
  sub_bench->add_option("--repeats", bench.repeats, "timed runs per length");
  sub_bench->add_option("--seed", bench.seed, "input seed");
  sub_bench->add_option("--out", bench.out_csv, "write length,seconds CSV here");
  sub_bench->add_flag("--json", bench.as_json, "machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (sub_gen->parsed()) return cmd_gen(gen);
    if (sub_train->parsed()) return cmd_train(train);
    if (sub_eval->parsed()) return cmd_eval(eval);
    if (sub_order->parsed()) return cmd_order(order);
    if (sub_bench->parsed()) return cmd_bench(bench);
    std::cerr << "error: no subcommand selected\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ArgError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
