#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "pointscan/core/ops.hpp"
#include "pointscan/geometry/cloud.hpp"
#include "pointscan/nn/layers.hpp"
#include "pointscan/nn/params.hpp"

namespace pointscan {

// Two-layer perceptron lifting raw 3-d coordinates into model width.
struct CoordMlp {
  Linear l1;
  Linear l2;

  CoordMlp() = default;

  CoordMlp(ParamStore& ps, const std::string& prefix, std::size_t dim)
      : l1(ps, prefix + ".l1", 3, dim), l2(ps, prefix + ".l2", dim, dim) {}

  TensorPtr operator()(const TensorPtr& coords) const {
    return l2(gelu(l1(coords)));
  }
};

struct MultiHeadSelfAttention {
  Linear wq, wk, wv, wo;
  std::size_t heads = 1;
  std::size_t dim = 0;

  MultiHeadSelfAttention() = default;

  MultiHeadSelfAttention(ParamStore& ps, const std::string& prefix,
                         std::size_t model_dim, std::size_t head_count)
      : wq(ps, prefix + ".wq", model_dim, model_dim),
        wk(ps, prefix + ".wk", model_dim, model_dim),
        wv(ps, prefix + ".wv", model_dim, model_dim),
        wo(ps, prefix + ".wo", model_dim, model_dim),
        heads(head_count),
        dim(model_dim) {
    if (head_count == 0 || model_dim % head_count != 0)
      throw ConfigError("attention width " + std::to_string(model_dim) +
                        " is not divisible by " + std::to_string(head_count) +
                        " heads");
  }

  TensorPtr operator()(const TensorPtr& tokens) const {
    const std::size_t dh = dim / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(double(dh));
    auto q = wq(tokens);
    auto k = wk(tokens);
    auto v = wv(tokens);
    std::vector<TensorPtr> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      auto qh = slice_cols(q, h * dh, (h + 1) * dh);
      auto kh = slice_cols(k, h * dh, (h + 1) * dh);
      auto vh = slice_cols(v, h * dh, (h + 1) * dh);
      auto attn = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt_dh));
      outs.push_back(matmul(attn, vh));
    }
    return wo(concat_cols(outs));
  }
};

// Pre-norm transformer block: attention and feed-forward sublayers, each
// wrapped in LayerNorm and a residual connection.
struct TransformerLayer {
  LayerNormModule ln_attn;
  MultiHeadSelfAttention attn;
  LayerNormModule ln_ff;
  Linear ff1;
  Linear ff2;

  TransformerLayer() = default;

  TransformerLayer(ParamStore& ps, const std::string& prefix, std::size_t dim,
                   std::size_t heads, std::size_t ff_hidden)
      : ln_attn(ps, prefix + ".ln_attn", dim),
        attn(ps, prefix + ".attn", dim, heads),
        ln_ff(ps, prefix + ".ln_ff", dim),
        ff1(ps, prefix + ".ff1", dim, ff_hidden),
        ff2(ps, prefix + ".ff2", ff_hidden, dim) {}

  TensorPtr operator()(const TensorPtr& tokens) const {
    auto x = add(tokens, attn(ln_attn(tokens)));
    return add(x, ff2(gelu(ff1(ln_ff(x)))));
  }
};

// Encodes one keypoint-centered neighborhood into a single embedding row.
// Point tokens are the sum of a feature lift and a positional lift of the
// same relative coordinates; a transformer stack mixes the tokens and a
// channel-wise max collapses them. Tokens are order-free by construction
// (self-attention plus max pooling), and encode_group additionally sorts the
// points canonically so the output is bit-identical under input permutation.
struct GroupEncoder {
  CoordMlp point_embed;
  CoordMlp point_pos;
  CoordMlp keypoint_pos;
  std::vector<TransformerLayer> layers;
  std::size_t dim = 0;

  GroupEncoder() = default;

  GroupEncoder(ParamStore& ps, const std::string& prefix, std::size_t model_dim,
               std::size_t layer_count, std::size_t heads)
      : point_embed(ps, prefix + ".point_embed", model_dim),
        point_pos(ps, prefix + ".point_pos", model_dim),
        keypoint_pos(ps, prefix + ".keypoint_pos", model_dim),
        dim(model_dim) {
    layers.reserve(layer_count);
    for (std::size_t i = 0; i < layer_count; ++i)
      layers.emplace_back(ps, prefix + ".layer" + std::to_string(i), model_dim,
                          heads, 4 * model_dim);
  }

  static TensorPtr coords_tensor(const std::vector<Point3>& pts) {
    auto t = Tensor::zeros({pts.size(), 3});
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (int k = 0; k < 3; ++k) t->data[i * 3 + std::size_t(k)] = pts[i][std::size_t(k)];
    return t;
  }

  // (K, 3) relative coordinates -> (K, dim) tokens.
  TensorPtr embed_points(const TensorPtr& coords) const {
    return add(point_embed(coords), point_pos(coords));
  }

  TensorPtr encode_group(const std::vector<Point3>& group) const {
    if (group.empty()) throw ArgError("encode_group: empty group");
    std::vector<Point3> canon = group;
    std::sort(canon.begin(), canon.end());
    auto tokens = embed_points(coords_tensor(canon));
    for (const auto& layer : layers) tokens = layer(tokens);
    return colwise_max(tokens);
  }

  // (G, dim) embeddings, one row per group.
  TensorPtr encode_groups(const GroupedCloud& grouped) const {
    std::vector<TensorPtr> rows;
    rows.reserve(grouped.group_count());
    for (const auto& grp : grouped.groups) rows.push_back(encode_group(grp));
    return concat_rows(rows);
  }

  // (G, dim) positional embeddings of the absolute keypoint locations.
  TensorPtr embed_keypoint_positions(const std::vector<Point3>& keypoints) const {
    return keypoint_pos(coords_tensor(keypoints));
  }
};

}  // namespace pointscan
