#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pointscan/core/ops.hpp"
#include "pointscan/encoder/group_encoder.hpp"
#include "pointscan/mixer/selective_scan.hpp"
#include "pointscan/nn/layers.hpp"
#include "pointscan/nn/params.hpp"

namespace pointscan {

inline std::size_t default_dt_rank(std::size_t model_dim) {
  return (model_dim + 15) / 16;
}

struct MambaDims {
  std::size_t model = 0;      // embedding width D
  std::size_t inner = 0;      // expanded width
  std::size_t state = 16;     // hidden states per channel
  std::size_t conv_width = 4;
  std::size_t dt_rank = 0;
};

// One selective state-space block:
//
//   z   = conv(silu-free path of in_proj(LN(x)))      (causal depth-wise)
//   y   = scan(silu(z)) with input-dependent delta/B/C
//   out = out_proj( LN(y) * silu(gate) ) + x
//
// where in_proj splits into the scan path and the gate, delta comes from a
// low-rank projection through softplus, A = -exp(A_log), and the scan carries
// a learned per-channel passthrough.
struct MambaLayer {
  MambaDims dims;
  LayerNormModule ln_in;
  Linear in_proj;
  TensorPtr conv_kernel;
  TensorPtr conv_bias;
  Linear x_proj;
  Linear dt_proj;
  TensorPtr a_log;
  TensorPtr skip;
  LayerNormModule ln_ssm;
  Linear out_proj;

  MambaLayer() = default;

  MambaLayer(ParamStore& ps, const std::string& prefix, const MambaDims& d)
      : dims(d),
        ln_in(ps, prefix + ".ln_in", d.model),
        in_proj(ps, prefix + ".in_proj", d.model, 2 * d.inner),
        x_proj(ps, prefix + ".x_proj", d.inner, d.dt_rank + 2 * d.state,
               /*bias=*/false),
        dt_proj(ps, prefix + ".dt_proj", d.dt_rank, d.inner),
        ln_ssm(ps, prefix + ".ln_ssm", d.inner),
        out_proj(ps, prefix + ".out_proj", d.inner, d.model) {
    if (d.model == 0 || d.inner == 0 || d.state == 0 || d.conv_width == 0 ||
        d.dt_rank == 0)
      throw ConfigError("MambaLayer: all dimensions must be positive");
    conv_kernel = ps.uniform(prefix + ".conv.kernel",
                             {d.conv_width, d.inner},
                             1.0 / std::sqrt(double(d.conv_width)));
    conv_bias = ps.uniform(prefix + ".conv.bias", {d.inner},
                           1.0 / std::sqrt(double(d.conv_width)));
    // A starts at -1..-S per channel, stored through its log.
    std::vector<double> alog(d.inner * d.state);
    for (std::size_t ch = 0; ch < d.inner; ++ch)
      for (std::size_t s = 0; s < d.state; ++s)
        alog[ch * d.state + s] = std::log(double(s + 1));
    a_log = ps.values(prefix + ".a_log", {d.inner, d.state}, std::move(alog));
    skip = ps.full(prefix + ".skip", {d.inner}, 1.0);
    // Bias of dt_proj is chosen so softplus(bias) lands log-uniformly in
    // [1e-3, 0.1]: the step sizes start small but not degenerate.
    RngStream rng(ps.seed(), "param-init",
                  fnv1a(prefix + ".dt_proj.bias_floor"));
    std::vector<double> dt_bias(d.inner);
    for (auto& v : dt_bias) {
      const double rate =
          std::exp(rng.uniform(std::log(1e-3), std::log(0.1)));
      v = std::log(std::expm1(rate));
    }
    dt_proj.b->data = std::move(dt_bias);
  }

  TensorPtr operator()(const TensorPtr& x) const {
    const std::size_t di = dims.inner, r = dims.dt_rank, s = dims.state;
    auto normed = ln_in(x);
    auto proj = in_proj(normed);
    auto conv_in = slice_cols(proj, 0, di);
    auto gate = slice_cols(proj, di, 2 * di);
    auto u = silu(depthwise_conv1d(conv_in, conv_kernel, conv_bias));
    auto mixed = x_proj(u);
    auto dt_low = slice_cols(mixed, 0, r);
    auto b_seq = slice_cols(mixed, r, r + s);
    auto c_seq = slice_cols(mixed, r + s, r + 2 * s);
    auto delta = softplus(dt_proj(dt_low));
    auto y = selective_scan(u, delta, neg_exp(a_log), b_seq, c_seq, skip);
    auto gated = mul(ln_ssm(y), silu(gate));
    return add(out_proj(gated), x);
  }
};

// Stack of residual scan blocks applied to an ordered token sequence.
struct SequenceMixer {
  std::vector<MambaLayer> layers;

  SequenceMixer() = default;

  SequenceMixer(ParamStore& ps, const std::string& prefix,
                std::size_t layer_count, const MambaDims& dims) {
    layers.reserve(layer_count);
    for (std::size_t i = 0; i < layer_count; ++i)
      layers.emplace_back(ps, prefix + ".layer" + std::to_string(i), dims);
  }

  TensorPtr operator()(const TensorPtr& sequence) const {
    auto x = sequence;
    for (const auto& layer : layers) x = layer(x);
    return x;
  }
};

// Quadratic-cost baseline used by the scaling benchmark: a single
// self-attention layer over the same token sequence.
struct AttentionMixer {
  MultiHeadSelfAttention attn;

  AttentionMixer() = default;

  AttentionMixer(ParamStore& ps, const std::string& prefix, std::size_t dim,
                 std::size_t heads)
      : attn(ps, prefix + ".attn", dim, heads) {}

  TensorPtr operator()(const TensorPtr& sequence) const {
    return attn(sequence);
  }
};

}  // namespace pointscan
