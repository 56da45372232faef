#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pointscan/core/ops.hpp"
#include "pointscan/encoder/group_encoder.hpp"
#include "pointscan/geometry/cloud.hpp"
#include "pointscan/importance/importance.hpp"
#include "pointscan/mixer/mamba.hpp"
#include "pointscan/pipeline/config.hpp"

namespace pointscan {

// Two-layer classifier over the pooled global feature.
struct ClassifierHead {
  Linear l1;
  Linear l2;
  double dropout_rate = 0.0;

  ClassifierHead() = default;

  ClassifierHead(ParamStore& ps, const std::string& prefix, std::size_t in,
                 std::size_t hidden, std::size_t classes, double dropout)
      : l1(ps, prefix + ".l1", in, hidden),
        l2(ps, prefix + ".l2", hidden, classes),
        dropout_rate(dropout) {}

  TensorPtr operator()(const TensorPtr& x, bool training,
                       RngStream* rng) const {
    auto h = relu(l1(x));
    if (training && dropout_rate > 0.0) {
      if (!rng)
        throw ArgError("ClassifierHead: dropout needs a random stream");
      h = dropout(h, dropout_rate, *rng);
    }
    return l2(h);
  }
};

struct RunContext {
  bool training = false;
  bool with_projections = false;  // alignment/importance-target branch
  RngStream* dropout_rng = nullptr;
  RngStream* order_rng = nullptr;  // consumed by the random ordering only
};

// Everything one forward pass produces. Loss construction happens on top of
// these tensors so the graph stays connected end to end.
struct ModelOutput {
  TensorPtr logits;                       // (N, classes)
  TensorPtr embeddings;                   // (N*G, channel)
  TensorPtr scores;                       // (N*G, 1)
  TensorPtr group_proj;                   // (N*G, proj_dim), projections only
  TensorPtr global_proj;                  // (N, proj_dim), projections only
  std::vector<OrderedSequence> sequences; // per cloud
  std::vector<std::size_t> degenerate_pools;  // cloud indices with zero pool
};

struct LossBreakdown {
  TensorPtr task;
  TensorPtr importance;
  TensorPtr alignment;
  TensorPtr total;
};

// The full classifier: group geometry -> intra-group transformer encoder ->
// importance scoring -> ordering -> selective-scan mixer -> importance-aware
// pooling -> classification head, with projection heads feeding the two
// auxiliary losses during training.
class Model {
 public:
  Model(const ModelConfig& cfg, ParamStore& ps)
      : cfg_(cfg),
        encoder_(ps, "encoder", cfg.channel, cfg.transformer_layers, cfg.heads),
        importance_(ps, "importance", cfg.channel, cfg.proj_hidden),
        mixer_(ps, "mixer", cfg.mamba_layers,
               MambaDims{cfg.channel, cfg.inner_dim(), cfg.state_dim,
                         cfg.conv_width, cfg.resolved_dt_rank()}),
        group_projection_(ps, "proj.group", cfg.channel, cfg.proj_hidden,
                          cfg.proj_dim),
        global_projection_(ps, "proj.global", cfg.channel, cfg.proj_hidden,
                           cfg.proj_dim),
        head_(ps, "head", cfg.channel, cfg.head_hidden, cfg.num_classes,
              cfg.head_dropout) {
    cfg.validate();
  }

  const ModelConfig& config() const { return cfg_; }

  // Keypoint selection plus neighborhood gathering; pure geometry. Clouds
  // are expected to be normalized already.
  GroupedCloud make_groups(const PointCloud& cloud) const {
    if (cloud.points.size() < cfg_.groups ||
        cloud.points.size() < cfg_.group_size)
      throw DataError("cloud has " + std::to_string(cloud.points.size()) +
                      " points but the model needs at least " +
                      std::to_string(std::max(cfg_.groups, cfg_.group_size)));
    return group_cloud(cloud.points, cfg_.groups, cfg_.group_size, 0);
  }

  ModelOutput run(const std::vector<const PointCloud*>& clouds,
                  const RunContext& ctx) const {
    if (clouds.empty()) throw ArgError("Model::run: empty batch");
    const std::size_t n = clouds.size();
    const OrderStrategy strategy = parse_order_strategy(cfg_.ordering);
    const PoolStrategy pooling = parse_pool_strategy(cfg_.pooling);

    std::vector<GroupedCloud> grouped;
    grouped.reserve(n);
    for (const PointCloud* c : clouds) grouped.push_back(make_groups(*c));

    std::vector<TensorPtr> per_cloud_emb;
    per_cloud_emb.reserve(n);
    for (const auto& g : grouped)
      per_cloud_emb.push_back(encoder_.encode_groups(g));

    ModelOutput out;
    out.embeddings = concat_rows(per_cloud_emb);
    out.scores = importance_(out.embeddings, ctx.training);

    std::vector<TensorPtr> pooled_rows;
    pooled_rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto positions = encoder_.embed_keypoint_positions(grouped[i].keypoints);
      auto cloud_scores =
          slice_rows(out.scores, i * cfg_.groups, (i + 1) * cfg_.groups);
      auto seq = order_groups(per_cloud_emb[i], positions, cloud_scores,
                              grouped[i].keypoints, strategy, ctx.order_rng,
                              cfg_.curve_bits);
      auto mixed = mixer_(seq.tokens);
      auto pooled = pool_tokens(mixed, seq.scores, pooling);
      if (pooled.degenerate) out.degenerate_pools.push_back(i);
      pooled_rows.push_back(pooled.f);
      out.sequences.push_back(std::move(seq));
    }
    auto global_features = concat_rows(pooled_rows);
    out.logits = head_(global_features, ctx.training, ctx.dropout_rng);

    if (ctx.with_projections) {
      out.group_proj = group_projection_(out.embeddings, ctx.training);
      out.global_proj = global_projection_(global_features, ctx.training);
    }
    return out;
  }

  ModelOutput run_one(const PointCloud& cloud, const RunContext& ctx) const {
    return run({&cloud}, ctx);
  }

  // Importance scores of already-grouped neighborhoods, evaluation mode.
  // Used by inspection tools that want scores without the full pipeline.
  TensorPtr score_groups(const GroupedCloud& grouped) const {
    return importance_(encoder_.encode_groups(grouped), false);
  }

  // Task loss plus the two auxiliary losses, combined with the configured
  // weights. Cosine targets are taken between each group projection and its
  // own cloud's global projection, detached so only the score head moves.
  LossBreakdown losses(const ModelOutput& out,
                       const std::vector<std::size_t>& labels) const {
    if (!out.group_proj || !out.global_proj)
      throw ArgError("Model::losses: run with with_projections enabled");
    LossBreakdown lb;
    lb.task = cross_entropy(out.logits, labels);
    std::vector<std::size_t> owners(out.group_proj->shape[0]);
    for (std::size_t r = 0; r < owners.size(); ++r)
      owners[r] = r / cfg_.groups;
    auto target =
        rows_dot(out.group_proj, gather_rows(out.global_proj, owners));
    lb.importance = importance_loss(out.scores, target);
    lb.alignment = alignment_loss(out.group_proj, out.global_proj,
                                  cfg_.groups, cfg_.temperature);
    lb.total = add(add(scale(lb.task, cfg_.alpha), scale(lb.importance, cfg_.beta)),
                   scale(lb.alignment, cfg_.gamma));
    return lb;
  }

 private:
  ModelConfig cfg_;
  GroupEncoder encoder_;
  ImportanceHead importance_;
  SequenceMixer mixer_;
  ProjectionHead group_projection_;
  ProjectionHead global_projection_;
  ClassifierHead head_;
};

}  // namespace pointscan
