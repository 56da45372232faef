#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "pointscan/core/ops.hpp"
#include "pointscan/geometry/ordering.hpp"
#include "pointscan/nn/layers.hpp"
#include "pointscan/nn/params.hpp"

namespace pointscan {

// Maps group embeddings (or the pooled global feature) onto the unit sphere
// of a shared comparison space.
struct ProjectionHead {
  Linear l1;
  BatchNormModule bn;
  Linear l2;

  ProjectionHead() = default;

  ProjectionHead(ParamStore& ps, const std::string& prefix, std::size_t in,
                 std::size_t hidden, std::size_t out)
      : l1(ps, prefix + ".l1", in, hidden),
        bn(ps, prefix + ".bn", hidden),
        l2(ps, prefix + ".l2", hidden, out) {}

  TensorPtr operator()(const TensorPtr& x, bool training,
                       bool* degenerate = nullptr) const {
    return l2_normalize_rows(l2(relu(bn(l1(x), training))), degenerate);
  }
};

// Predicts one unbounded importance score per embedding row.
struct ImportanceHead {
  Linear l1;
  BatchNormModule bn;
  Linear l2;

  ImportanceHead() = default;

  ImportanceHead(ParamStore& ps, const std::string& prefix, std::size_t in,
                 std::size_t hidden)
      : l1(ps, prefix + ".l1", in, hidden),
        bn(ps, prefix + ".bn", hidden),
        l2(ps, prefix + ".l2", hidden, 1) {}

  TensorPtr operator()(const TensorPtr& x, bool training) const {
    return l2(relu(bn(l1(x), training)));
  }
};

// ---------------------------------------------------------------------------
// score-driven orderings

inline void check_scores_finite(const std::vector<double>& scores,
                                const char* where) {
  for (double s : scores)
    if (!std::isfinite(s))
      throw NumericError(std::string(where) +
                         ": non-finite importance score");
}

// Scores descending; equal scores keep the smaller group index first.
inline std::vector<std::size_t> descending_order(
    const std::vector<double>& scores) {
  check_scores_finite(scores, "descending_order");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  return idx;
}

// Scores ascending; equal scores put the larger group index first, which
// makes this pass the exact reverse of descending_order.
inline std::vector<std::size_t> ascending_order(
    const std::vector<double>& scores) {
  check_scores_finite(scores, "ascending_order");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return a > b;
  });
  return idx;
}

inline std::vector<std::size_t> sio_perm(const std::vector<double>& scores) {
  if (scores.empty()) throw ArgError("sio_perm: no scores");
  return descending_order(scores);
}

// Both passes back to back: most-important-first, then least-important-first.
// Every group appears exactly twice in the 2G-length result.
inline std::vector<std::size_t> bio_perm(const std::vector<double>& scores) {
  if (scores.empty()) throw ArgError("bio_perm: no scores");
  std::vector<std::size_t> perm = descending_order(scores);
  std::vector<std::size_t> up = ascending_order(scores);
  perm.insert(perm.end(), up.begin(), up.end());
  return perm;
}

// A group sequence arranged for the mixer: tokens are embedding + position
// rows gathered by the permutation, scores ride along in the same order. The
// permutation is plain index bookkeeping; gradients flow through the gathers
// into the original rows (twice per group for the bi-directional case).
struct OrderedSequence {
  std::vector<std::size_t> perm;
  TensorPtr tokens;  // (len, D)
  TensorPtr scores;  // (len, 1)
};

inline OrderedSequence arrange_sequence(const TensorPtr& embeddings,
                                        const TensorPtr& positions,
                                        const TensorPtr& scores,
                                        std::vector<std::size_t> perm) {
  require_2d(embeddings, "arrange_sequence");
  require_same_shape(embeddings, positions, "arrange_sequence");
  if (scores->size() != embeddings->shape[0])
    throw DimError("arrange_sequence: one score per group required");
  OrderedSequence seq;
  seq.tokens = add(gather_rows(embeddings, perm), gather_rows(positions, perm));
  seq.scores = gather_rows(scores, perm);
  seq.perm = std::move(perm);
  return seq;
}

// Builds the permutation for any strategy and applies it. Score-free
// strategies use keypoint geometry; sio/bio order by the score values.
inline OrderedSequence order_groups(const TensorPtr& embeddings,
                                    const TensorPtr& positions,
                                    const TensorPtr& scores,
                                    const std::vector<Point3>& keypoints,
                                    OrderStrategy strategy,
                                    RngStream* rng = nullptr, int bits = 10) {
  switch (strategy) {
    case OrderStrategy::sio:
      return arrange_sequence(embeddings, positions, scores,
                              sio_perm(scores->data));
    case OrderStrategy::bio:
      return arrange_sequence(embeddings, positions, scores,
                              bio_perm(scores->data));
    default:
      return arrange_sequence(embeddings, positions, scores,
                              order_baseline(keypoints, strategy, rng, bits));
  }
}

// ---------------------------------------------------------------------------
// pooling

enum class PoolStrategy { iap, iap_step, avg, max, wsum };

inline PoolStrategy parse_pool_strategy(const std::string& name) {
  if (name == "iap") return PoolStrategy::iap;
  if (name == "iap_step") return PoolStrategy::iap_step;
  if (name == "avg") return PoolStrategy::avg;
  if (name == "max") return PoolStrategy::max;
  if (name == "wsum") return PoolStrategy::wsum;
  throw ConfigError("unknown pooling strategy '" + name + "'");
}

inline const char* pool_strategy_name(PoolStrategy s) {
  switch (s) {
    case PoolStrategy::iap: return "iap";
    case PoolStrategy::iap_step: return "iap_step";
    case PoolStrategy::avg: return "avg";
    case PoolStrategy::max: return "max";
    case PoolStrategy::wsum: return "wsum";
  }
  throw ArgError("pool_strategy_name: bad enum value");
}

struct PooledFeature {
  TensorPtr f;  // (1, D)
  bool degenerate = false;
};

// Importance-aware pooling: a score-weighted sum of token rows where
// non-positive scores contribute nothing. The default reweights by the
// clamped score value max(I, 0); the step variant keeps unit weight for
// every strictly positive score. If no score is positive the result is the
// zero vector and the feature is flagged degenerate.
inline PooledFeature iap_pool(const TensorPtr& tokens, const TensorPtr& scores,
                              bool step_mask = false) {
  require_2d(tokens, "iap_pool");
  const std::size_t L = tokens->shape[0];
  if (scores->size() != L)
    throw DimError("iap_pool: one score per token required");
  PooledFeature out;
  out.degenerate = true;
  for (std::size_t i = 0; i < L; ++i)
    if (scores->data[i] > 0.0) {
      out.degenerate = false;
      break;
    }
  if (step_mask) {
    auto mask = Tensor::zeros({1, L});
    for (std::size_t i = 0; i < L; ++i)
      mask->data[i] = scores->data[i] > 0.0 ? 1.0 : 0.0;
    out.f = matmul(mask, tokens);
  } else {
    auto w = relu(scores->ndim() == 2 ? scores : reshape(scores, {L, 1}));
    out.f = matmul(transpose(w), tokens);
  }
  return out;
}

inline PooledFeature pool_tokens(const TensorPtr& tokens,
                                 const TensorPtr& scores, PoolStrategy s) {
  require_2d(tokens, "pool_tokens");
  const std::size_t L = tokens->shape[0];
  switch (s) {
    case PoolStrategy::iap:
      return iap_pool(tokens, scores, false);
    case PoolStrategy::iap_step:
      return iap_pool(tokens, scores, true);
    case PoolStrategy::avg: {
      PooledFeature out;
      out.f = matmul(Tensor::full({1, L}, 1.0 / double(L)), tokens);
      return out;
    }
    case PoolStrategy::max: {
      PooledFeature out;
      out.f = colwise_max(tokens);
      return out;
    }
    case PoolStrategy::wsum: {
      if (scores->size() != L)
        throw DimError("pool_tokens: one score per token required");
      PooledFeature out;
      auto col = scores->ndim() == 2 ? scores : reshape(scores, {L, 1});
      out.f = matmul(transpose(col), tokens);
      return out;
    }
  }
  throw ArgError("pool_tokens: bad enum value");
}

// ---------------------------------------------------------------------------
// auxiliary losses

// Smooth-L1 regression of predicted scores onto cosine targets. The targets
// are detached copies: only the score head learns from this loss.
inline TensorPtr importance_loss(const TensorPtr& predicted,
                                 const TensorPtr& targets) {
  return smooth_l1(predicted, detach(targets));
}

// Contrastive alignment between group projections and the global projections
// of the batch: each group row should match its own cloud's global feature
// among all clouds. Softmax cross-entropy over the similarity matrix.
inline TensorPtr alignment_loss(const TensorPtr& group_proj,
                                const TensorPtr& global_proj,
                                std::size_t groups_per_cloud,
                                double temperature = 1.0) {
  require_2d(group_proj, "alignment_loss");
  require_2d(global_proj, "alignment_loss");
  if (temperature <= 0.0)
    throw ConfigError("alignment_loss: temperature must be positive");
  const std::size_t clouds = global_proj->shape[0];
  if (groups_per_cloud == 0 ||
      group_proj->shape[0] != clouds * groups_per_cloud)
    throw DimError("alignment_loss: group rows must be clouds * groups");
  auto logits = matmul(group_proj, transpose(global_proj));
  if (temperature != 1.0) logits = scale(logits, 1.0 / temperature);
  std::vector<std::size_t> labels(group_proj->shape[0]);
  for (std::size_t r = 0; r < labels.size(); ++r)
    labels[r] = r / groups_per_cloud;
  return cross_entropy(logits, labels);
}

}  // namespace pointscan
