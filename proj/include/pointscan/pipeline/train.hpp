#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "pointscan/io/augment.hpp"
#include "pointscan/io/dataset.hpp"
#include "pointscan/pipeline/checkpoint.hpp"
#include "pointscan/pipeline/model.hpp"
#include "pointscan/pipeline/optim.hpp"

namespace pointscan {

struct EvalResult {
  double accuracy = 0.0;
  std::vector<std::size_t> per_class_correct;
  std::vector<std::size_t> per_class_total;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> predictions;
  std::size_t degenerate_pools = 0;
};

inline void check_labels(const Dataset& ds, std::size_t num_classes,
                         const char* which) {
  for (const auto& c : ds.clouds)
    if (c.label < 0 || std::size_t(c.label) >= num_classes)
      throw DataError(std::string(which) + " set contains label " +
                      std::to_string(c.label) + " outside " +
                      std::to_string(num_classes) + " classes");
}

// Deterministic evaluation. With votes > 1, each cloud is classified from
// logits averaged over `votes` uniformly rescaled copies of itself, each
// scale drawn from a stream keyed by (cloud index, vote index).
inline EvalResult evaluate(const Model& model, const Dataset& data,
                           std::size_t batch_size, std::size_t votes = 1,
                           std::uint64_t vote_seed = 0) {
  if (batch_size == 0) throw ArgError("evaluate: batch_size must be positive");
  if (votes == 0) throw ArgError("evaluate: votes must be positive");
  const std::size_t classes = model.config().num_classes;
  check_labels(data, classes, "evaluation");
  EvalResult res;
  res.per_class_correct.assign(classes, 0);
  res.per_class_total.assign(classes, 0);
  if (data.clouds.empty()) return res;
  NoGradScope ng;
  // The random ordering baseline draws from this stream; it is keyed by the
  // vote seed so repeated evaluations stay bit-identical.
  RngStream order_rng(vote_seed, "eval-order");
  RunContext ctx;
  ctx.order_rng = &order_rng;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t stop = std::min(data.size(), start + batch_size);
    std::vector<double> vote_logits((stop - start) * classes, 0.0);
    for (std::size_t v = 0; v < votes; ++v) {
      std::vector<PointCloud> scaled;
      std::vector<const PointCloud*> ptrs;
      ptrs.reserve(stop - start);
      if (votes > 1) {
        scaled.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) {
          RngStream rng(vote_seed, "vote", i, v);
          scaled.push_back(scaled_cloud(data.clouds[i], rng.uniform(0.8, 1.2)));
        }
        for (const auto& c : scaled) ptrs.push_back(&c);
      } else {
        for (std::size_t i = start; i < stop; ++i)
          ptrs.push_back(&data.clouds[i]);
      }
      ModelOutput out = model.run(ptrs, ctx);
      res.degenerate_pools += out.degenerate_pools.size();
      for (std::size_t j = 0; j < stop - start; ++j)
        for (std::size_t c = 0; c < classes; ++c)
          vote_logits[j * classes + c] += out.logits->data[j * classes + c];
    }
    for (std::size_t j = 0; j < stop - start; ++j) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < classes; ++c)
        if (vote_logits[j * classes + c] > vote_logits[j * classes + best])
          best = c;
      const std::size_t truth = std::size_t(data.clouds[start + j].label);
      res.labels.push_back(truth);
      res.predictions.push_back(best);
      res.per_class_total[truth] += 1;
      if (best == truth) {
        res.per_class_correct[truth] += 1;
        correct += 1;
      }
    }
  }
  res.accuracy = double(correct) / double(data.size());
  return res;
}

struct EpochRow {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double task = 0.0;
  double importance = 0.0;
  double alignment = 0.0;
  double total = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

inline std::string training_log_header() {
  return "epoch,lr,task,importance,alignment,total,train_acc,val_acc";
}

inline std::string format_epoch_row(const EpochRow& r) {
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", r.epoch,
                r.lr, r.task, r.importance, r.alignment, r.total, r.train_acc,
                r.val_acc);
  return buf;
}

struct TrainOptions {
  std::string out_dir;  // empty: keep everything in memory
  CheckpointDtype checkpoint_dtype = CheckpointDtype::f32;
  bool stop_when_train_perfect = false;
  bool verbose = false;
};

struct TrainReport {
  std::vector<EpochRow> rows;
  double best_val_acc = 0.0;
  std::size_t best_epoch = 0;  // 1-based, 0 if validation never ran
  double final_train_acc = 0.0;
  std::string csv_path;
  std::string best_checkpoint_path;
  std::string final_checkpoint_path;
};

// Full training run. All randomness (shuffling, augmentation, dropout, the
// random ordering baseline) comes from streams keyed on (seed, purpose,
// epoch, position), so two runs with the same seed produce bit-identical
// parameters and logs.
inline TrainReport train_model(const Dataset& train_set,
                               const Dataset& val_set, const ModelConfig& cfg,
                               const TrainOptions& opt = {}) {
  cfg.validate();
  if (train_set.clouds.empty()) throw DataError("train_model: empty training set");
  check_labels(train_set, cfg.num_classes, "training");
  check_labels(val_set, cfg.num_classes, "validation");

  ParamStore ps(cfg.seed);
  Model model(cfg, ps);
  const std::string config_json = cfg.to_json().dump();

  namespace fs = std::filesystem;
  TrainReport report;
  if (!opt.out_dir.empty()) {
    fs::create_directories(opt.out_dir);
    report.csv_path = (fs::path(opt.out_dir) / "training_log.csv").string();
    report.best_checkpoint_path =
        (fs::path(opt.out_dir) / "best.ckpt").string();
    report.final_checkpoint_path =
        (fs::path(opt.out_dir) / "final.ckpt").string();
  }

  AugmentOptions aug;
  aug.scale = cfg.aug_scale;
  aug.translate = cfg.aug_translate;
  aug.rotate_z = cfg.aug_rotate;

  const std::size_t n = train_set.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const OrderStrategy strategy = parse_order_strategy(cfg.ordering);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream shuffle_rng(cfg.seed, "shuffle", epoch);
    shuffle_rng.shuffle(order);

    double sum_task = 0.0, sum_imp = 0.0, sum_align = 0.0, sum_total = 0.0;
    std::size_t correct = 0;
    std::size_t step = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++step) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::size_t bs = stop - start;
      std::vector<PointCloud> batch;
      batch.reserve(bs);
      std::vector<std::size_t> labels;
      labels.reserve(bs);
      for (std::size_t j = 0; j < bs; ++j) {
        const PointCloud& src = train_set.clouds[order[start + j]];
        RngStream aug_rng(cfg.seed, "augment", epoch, start + j);
        batch.push_back(augment_cloud(src, aug, aug_rng));
        labels.push_back(std::size_t(src.label));
      }
      std::vector<const PointCloud*> ptrs;
      ptrs.reserve(bs);
      for (const auto& c : batch) ptrs.push_back(&c);

      RngStream dropout_rng(cfg.seed, "dropout", epoch, step);
      RngStream order_rng(cfg.seed, "order", epoch, step);
      RunContext ctx;
      ctx.training = true;
      ctx.with_projections = true;
      ctx.dropout_rng = &dropout_rng;
      if (strategy == OrderStrategy::random) ctx.order_rng = &order_rng;

      Tape tape;
      {
        TapeScope scope(tape);
        ps.zero_grad();
        ModelOutput out = model.run(ptrs, ctx);
        LossBreakdown lb = model.losses(out, labels);
        sum_task += lb.task->item() * double(bs);
        sum_imp += lb.importance->item() * double(bs);
        sum_align += lb.alignment->item() * double(bs);
        sum_total += lb.total->item() * double(bs);
        for (std::size_t j = 0; j < bs; ++j)
          if (argmax_row(out.logits, j) == labels[j]) correct += 1;
        tape.backward(lb.total);
      }
      const double frac_epoch =
          double(epoch) + double(step) / double(steps_per_epoch);
      adamw_step(ps, lr_at(frac_epoch, cfg.lr, cfg.lr_min, cfg.warmup_epochs,
                           cfg.epochs),
                 cfg.weight_decay);
    }

    EpochRow row;
    row.epoch = epoch + 1;
    row.lr = lr_at(double(epoch), cfg.lr, cfg.lr_min, cfg.warmup_epochs,
                   cfg.epochs);
    row.task = sum_task / double(n);
    row.importance = sum_imp / double(n);
    row.alignment = sum_align / double(n);
    row.total = sum_total / double(n);
    row.train_acc = double(correct) / double(n);
    if (!val_set.clouds.empty()) {
      EvalResult ev = evaluate(model, val_set, cfg.batch_size);
      row.val_acc = ev.accuracy;
      if (ev.accuracy > report.best_val_acc || report.best_epoch == 0) {
        report.best_val_acc = ev.accuracy;
        report.best_epoch = row.epoch;
        if (!report.best_checkpoint_path.empty())
          save_checkpoint(report.best_checkpoint_path, config_json, ps,
                          opt.checkpoint_dtype);
      }
    }
    report.rows.push_back(row);
    report.final_train_acc = row.train_acc;
    if (opt.verbose)
      std::fprintf(stderr, "%s\n", format_epoch_row(row).c_str());
    if (opt.stop_when_train_perfect && row.train_acc == 1.0) break;
  }

  if (!report.final_checkpoint_path.empty())
    save_checkpoint(report.final_checkpoint_path, config_json, ps,
                    opt.checkpoint_dtype);
  if (!report.csv_path.empty()) {
    std::ofstream csv(report.csv_path);
    if (!csv)
      throw DataError("cannot open '" + report.csv_path + "' for writing");
    csv << training_log_header() << "\n";
    for (const auto& row : report.rows) csv << format_epoch_row(row) << "\n";
    if (!csv) throw DataError("write failure on '" + report.csv_path + "'");
  }
  return report;
}

// Rebuilds a model from a checkpoint: config comes from the embedded JSON,
// parameters from the records.
struct RestoredModel {
  ModelConfig config;
  std::shared_ptr<ParamStore> params;
  std::shared_ptr<Model> model;
};

inline RestoredModel restore_model(const std::string& checkpoint_path) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  RestoredModel rm;
  try {
    rm.config = ModelConfig::from_text(ck.config_json);
    rm.config.validate();
  } catch (const ConfigError& e) {
    throw DataError("checkpoint '" + checkpoint_path +
                    "' carries a bad config: " + e.what());
  }
  rm.params = std::make_shared<ParamStore>(rm.config.seed);
  rm.model = std::make_shared<Model>(rm.config, *rm.params);
  load_into_store(ck, *rm.params);
  return rm;
}

}  // namespace pointscan
