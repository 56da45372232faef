#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pointscan/core/error.hpp"
#include "pointscan/core/rng.hpp"
#include "pointscan/core/tensor.hpp"

namespace pointscan {

// ---------------------------------------------------------------------------
// shared checks

inline void require_2d(const TensorPtr& t, const char* op) {
  if (t->ndim() != 2)
    throw DimError(std::string(op) + ": expected rank-2 tensor, got " +
                   shape_str(t->shape));
}

inline void require_same_shape(const TensorPtr& a, const TensorPtr& b,
                               const char* op) {
  if (a->shape != b->shape)
    throw DimError(std::string(op) + ": shape mismatch " +
                   shape_str(a->shape) + " vs " + shape_str(b->shape));
}

inline Tape* grad_tape(const TensorPtr& a) {
  Tape* t = active_tape();
  return (t && a->requires_grad) ? t : nullptr;
}

inline Tape* grad_tape(const TensorPtr& a, const TensorPtr& b) {
  Tape* t = active_tape();
  return (t && (a->requires_grad || b->requires_grad)) ? t : nullptr;
}

// ---------------------------------------------------------------------------
// arithmetic

inline TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape(a, b, "add");
  auto out = Tensor::zeros(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i)
    out->data[i] = a->data[i] + b->data[i];
  if (Tape* tape = grad_tape(a, b)) {
    out->requires_grad = true;
    tape->record([a, b, out] {
      if (out->grad.empty()) return;
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < b->size(); ++i) b->grad[i] += out->grad[i];
      }
    });
  }
  return out;
}

inline TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape(a, b, "sub");
  auto out = Tensor::zeros(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i)
    out->data[i] = a->data[i] - b->data[i];
  if (Tape* tape = grad_tape(a, b)) {
    out->requires_grad = true;
    tape->record([a, b, out] {
      if (out->grad.empty()) return;
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < b->size(); ++i) b->grad[i] -= out->grad[i];
      }
    });
  }
  return out;
}

inline TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape(a, b, "mul");
  auto out = Tensor::zeros(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i)
    out->data[i] = a->data[i] * b->data[i];
  if (Tape* tape = grad_tape(a, b)) {
    out->requires_grad = true;
    tape->record([a, b, out] {
      if (out->grad.empty()) return;
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < a->size(); ++i)
          a->grad[i] += out->grad[i] * b->data[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < b->size(); ++i)
          b->grad[i] += out->grad[i] * a->data[i];
      }
    });
  }
  return out;
}

inline TensorPtr scale(const TensorPtr& a, double c) {
  auto out = Tensor::zeros(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) out->data[i] = a->data[i] * c;
  if (Tape* tape = grad_tape(a)) {
    out->requires_grad = true;
    tape->record([a, out, c] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i)
        a->grad[i] += out->grad[i] * c;
    });
  }
  return out;
}

// m: (R, D), v: (D) or (1, D); adds v to every row of m.
inline TensorPtr add_rowvec(const TensorPtr& m, const TensorPtr& v) {
  require_2d(m, "add_rowvec");
  const std::size_t R = m->rows(), D = m->cols();
  if (v->size() != D)
    throw DimError("add_rowvec: vector length " + std::to_string(v->size()) +
                   " does not match row width " + std::to_string(D));
  auto out = Tensor::zeros(m->shape);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t d = 0; d < D; ++d)
      out->data[r * D + d] = m->data[r * D + d] + v->data[d];
  if (Tape* tape = grad_tape(m, v)) {
    out->requires_grad = true;
    tape->record([m, v, out, R, D] {
      if (out->grad.empty()) return;
      if (m->requires_grad) {
        m->ensure_grad();
        for (std::size_t i = 0; i < m->size(); ++i)
          m->grad[i] += out->grad[i];
      }
      if (v->requires_grad) {
        v->ensure_grad();
        for (std::size_t r = 0; r < R; ++r)
          for (std::size_t d = 0; d < D; ++d)
            v->grad[d] += out->grad[r * D + d];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// linear algebra

inline TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t R = a->shape[0], K = a->shape[1], C = b->shape[1];
  if (b->shape[0] != K)
    throw DimError("matmul: inner dimensions disagree, " +
                   shape_str(a->shape) + " x " + shape_str(b->shape));
  auto out = Tensor::zeros({R, C});
  for (std::size_t r = 0; r < R; ++r) {
    double* orow = &out->data[r * C];
    for (std::size_t k = 0; k < K; ++k) {
      const double v = a->data[r * K + k];
      const double* brow = &b->data[k * C];
      for (std::size_t c = 0; c < C; ++c) orow[c] += v * brow[c];
    }
  }
  if (Tape* tape = grad_tape(a, b)) {
    out->requires_grad = true;
    tape->record([a, b, out, R, K, C] {
      if (out->grad.empty()) return;
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t r = 0; r < R; ++r) {
          const double* grow = &out->grad[r * C];
          for (std::size_t k = 0; k < K; ++k) {
            const double* brow = &b->data[k * C];
            double acc = 0.0;
            for (std::size_t c = 0; c < C; ++c) acc += grow[c] * brow[c];
            a->grad[r * K + k] += acc;
          }
        }
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t r = 0; r < R; ++r) {
          const double* grow = &out->grad[r * C];
          for (std::size_t k = 0; k < K; ++k) {
            const double v = a->data[r * K + k];
            double* brow = &b->grad[k * C];
            for (std::size_t c = 0; c < C; ++c) brow[c] += v * grow[c];
          }
        }
      }
    });
  }
  return out;
}

inline TensorPtr transpose(const TensorPtr& a) {
  require_2d(a, "transpose");
  const std::size_t R = a->shape[0], C = a->shape[1];
  auto out = Tensor::zeros({C, R});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c)
      out->data[c * R + r] = a->data[r * C + c];
  if (Tape* tape = grad_tape(a)) {
    out->requires_grad = true;
    tape->record([a, out, R, C] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c)
          a->grad[r * C + c] += out->grad[c * R + r];
    });
  }
  return out;
}

inline TensorPtr reshape(const TensorPtr& a, std::vector<std::size_t> s) {
  if (Tensor::count(s) != a->size())
    throw DimError("reshape: element count changes from " +
                   shape_str(a->shape) + " to " + shape_str(s));
  auto out = Tensor::zeros(std::move(s));
  out->data = a->data;
  if (Tape* tape = grad_tape(a)) {
    out->requires_grad = true;
    tape->record([a, out] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// indexing

// Duplicated indices are allowed; the backward pass scatter-adds, so a row
// gathered twice receives the sum of both downstream gradients.
inline TensorPtr gather_rows(const TensorPtr& a,
                             const std::vector<std::size_t>& idx) {
  require_2d(a, "gather_rows");
  const std::size_t R = a->shape[0], D = a->shape[1];
  for (std::size_t i : idx)
    if (i >= R)
      throw DimError("gather_rows: index " + std::to_string(i) +
                     " out of range for " + std::to_string(R) + " rows");
  auto out = Tensor::zeros({idx.size(), D});
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy_n(&a->data[idx[r] * D], D, &out->data[r * D]);
  if (Tape* tape = grad_tape(a)) {
    out->requires_grad = true;
    tape->record([a, out, idx, D] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t d = 0; d < D; ++d)
          a->grad[idx[r] * D + d] += out->grad[r * D + d];
    });
  }
  return out;
}

inline TensorPtr slice_rows(const TensorPtr& a, std::size_t r0,
                            std::size_t r1) {
  require_2d(a, "slice_rows");
  const std::size_t R = a->shape[0], D = a->shape[1];
  if (r0 > r1 || r1 > R)
    throw DimError("slice_rows: range [" + std::to_string(r0) + ", " +
                   std::to_string(r1) + ") invalid for " + std::to_string(R) +
                   " rows");
  auto out = Tensor::zeros({r1 - r0, D});
  std::copy_n(&a->data[r0 * D], (r1 - r0) * D, out->data.data());
  if (Tape* tape = grad_tape(a)) {
    out->requires_grad = true;
    tape->record([a, out, r0, D] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i)
        a->grad[r0 * D + i] += out->grad[i];
    });
  }
  return out;
}

inline TensorPtr slice_cols(const TensorPtr& a, std::size_t c0,
                            std::size_t c1) {
  require_2d(a, "slice_cols");
  const std::size_t R = a->shape[0], D = a->shape[1];
  if (c0 > c1 || c1 > D)
    throw DimError("slice_cols: range [" + std::to_string(c0) + ", " +
                   std::to_string(c1) + ") invalid for " + std::to_string(D) +
                   " columns");
  const std::size_t W = c1 - c0;
  auto out = Tensor::zeros({R, W});
  for (std::size_t r = 0; r < R; ++r)
    std::copy_n(&a->data[r * D + c0], W, &out->data[r * W]);
  if (Tape* tape = grad_tape(a)) {
    out->requires_grad = true;
    tape->record([a, out, R, D, c0, W] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t w = 0; w < W; ++w)
          a->grad[r * D + c0 + w] += out->grad[r * W + w];
    });
  }
  return out;
}

inline TensorPtr concat_rows(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw DimError("concat_rows: no inputs");
  const std::size_t D = parts[0]->cols();
  std::size_t R = 0;
  bool rg = false;
  for (const auto& p : parts) {
    require_2d(p, "concat_rows");
    if (p->shape[1] != D)
      throw DimError("concat_rows: column widths differ");
    R += p->shape[0];
    rg = rg || p->requires_grad;
  }
  auto out = Tensor::zeros({R, D});
  std::size_t row = 0;
  std::vector<std::size_t> offsets(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    offsets[i] = row;
    std::copy_n(parts[i]->data.data(), parts[i]->size(),
                &out->data[row * D]);
    row += parts[i]->shape[0];
  }
  Tape* tape = active_tape();
  if (tape && rg) {
    out->requires_grad = true;
    tape->record([parts, out, offsets, D] {
      if (out->grad.empty()) return;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!parts[i]->requires_grad) continue;
        parts[i]->ensure_grad();
        const std::size_t base = offsets[i] * D;
        for (std::size_t j = 0; j < parts[i]->size(); ++j)
          parts[i]->grad[j] += out->grad[base + j];
      }
    });
  }
  return out;
}

inline TensorPtr concat_cols(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw DimError("concat_cols: no inputs");
  const std::size_t R = parts[0]->rows();
  std::size_t D = 0;
  bool rg = false;
  for (const auto& p : parts) {
    require_2d(p, "concat_cols");
    if (p->shape[0] != R) throw DimError("concat_cols: row counts differ");
    D += p->shape[1];
    rg = rg || p->requires_grad;
  }
  auto out = Tensor::zeros({R, D});
  std::size_t col = 0;
  std::vector<std::size_t> offsets(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    offsets[i] = col;
    const std::size_t W = parts[i]->shape[1];
    for (std::size_t r = 0; r < R; ++r)
      std::copy_n(&parts[i]->data[r * W], W, &out->data[r * D + col]);
    col += W;
  }
  Tape* tape = active_tape();
  if (tape && rg) {
    out->requires_grad = true;
    tape->record([parts, out, offsets, R, D] {
      if (out->grad.empty()) return;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!parts[i]->requires_grad) continue;
        parts[i]->ensure_grad();
        const std::size_t W = parts[i]->shape[1];
        for (std::size_t r = 0; r < R; ++r)
          for (std::size_t w = 0; w < W; ++w)
            parts[i]->grad[r * W + w] += out->grad[r * D + offsets[i] + w];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// reductions

inline TensorPtr sum(const TensorPtr& a) {
  double acc = 0.0;
  for (double v : a->data) acc += v;
  auto out = Tensor::scalar(acc);
  if (Tape* tape = grad_tape(a)) {
    out->requires_grad = true;
    tape->record([a, out] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[0];
    });
  }
  return out;
}

inline TensorPtr mean(const TensorPtr& a) {
  if (a->size() == 0) throw DimError("mean: empty tensor");
  double acc = 0.0;
  for (double v : a->data) acc += v;
  const double inv = 1.0 / double(a->size());
  auto out = Tensor::scalar(acc * inv);
  if (Tape* tape = grad_tape(a)) {
    out->requires_grad = true;
    tape->record([a, out, inv] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i)
        a->grad[i] += out->grad[0] * inv;
    });
  }
  return out;
}

// (R, D) -> (R, 1): sum of each row.
inline TensorPtr rowwise_sum(const TensorPtr& a) {
  require_2d(a, "rowwise_sum");
  const std::size_t R = a->shape[0], D = a->shape[1];
  auto out = Tensor::zeros({R, 1});
  for (std::size_t r = 0; r < R; ++r) {
    double acc = 0.0;
    for (std::size_t d = 0; d < D; ++d) acc += a->data[r * D + d];
    out->data[r] = acc;
  }
  if (Tape* tape = grad_tape(a)) {
    out->requires_grad = true;
    tape->record([a, out, R, D] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t d = 0; d < D; ++d)
          a->grad[r * D + d] += out->grad[r];
    });
  }
  return out;
}

// (R, D) -> (1, D): column-wise max. Ties keep the smallest row index, and
// the backward pass routes the full gradient to that single row.
inline TensorPtr colwise_max(const TensorPtr& a) {
  require_2d(a, "colwise_max");
  const std::size_t R = a->shape[0], D = a->shape[1];
  if (R == 0) throw DimError("colwise_max: no rows");
  auto out = Tensor::zeros({1, D});
  std::vector<std::size_t> argmax(D, 0);
  for (std::size_t d = 0; d < D; ++d) {
    double best = a->data[d];
    std::size_t where = 0;
    for (std::size_t r = 1; r < R; ++r) {
      const double v = a->data[r * D + d];
      if (v > best) {
        best = v;
        where = r;
      }
    }
    out->data[d] = best;
    argmax[d] = where;
  }
  if (Tape* tape = grad_tape(a)) {
    out->requires_grad = true;
    tape->record([a, out, argmax, D] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t d = 0; d < D; ++d)
        a->grad[argmax[d] * D + d] += out->grad[d];
    });
  }
  return out;
}

// (R, D) x (R, D) -> (R, 1): per-row dot product.
inline TensorPtr rows_dot(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape(a, b, "rows_dot");
  require_2d(a, "rows_dot");
  const std::size_t R = a->shape[0], D = a->shape[1];
  auto out = Tensor::zeros({R, 1});
  for (std::size_t r = 0; r < R; ++r) {
    double acc = 0.0;
    for (std::size_t d = 0; d < D; ++d)
      acc += a->data[r * D + d] * b->data[r * D + d];
    out->data[r] = acc;
  }
  if (Tape* tape = grad_tape(a, b)) {
    out->requires_grad = true;
    tape->record([a, b, out, R, D] {
      if (out->grad.empty()) return;
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t r = 0; r < R; ++r)
          for (std::size_t d = 0; d < D; ++d)
            a->grad[r * D + d] += out->grad[r] * b->data[r * D + d];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t r = 0; r < R; ++r)
          for (std::size_t d = 0; d < D; ++d)
            b->grad[r * D + d] += out->grad[r] * a->data[r * D + d];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// activations

inline TensorPtr relu(const TensorPtr& a) {
  auto out = Tensor::zeros(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i)
    out->data[i] = a->data[i] > 0.0 ? a->data[i] : 0.0;
  if (Tape* tape = grad_tape(a)) {
    out->requires_grad = true;
    tape->record([a, out] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i)
        if (a->data[i] > 0.0) a->grad[i] += out->grad[i];
    });
  }
  return out;
}

inline double sigmoid_val(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline TensorPtr sigmoid(const TensorPtr& a) {
  auto out = Tensor::zeros(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i)
    out->data[i] = sigmoid_val(a->data[i]);
  if (Tape* tape = grad_tape(a)) {
    out->requires_grad = true;
    tape->record([a, out] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i) {
        const double s = out->data[i];
        a->grad[i] += out->grad[i] * s * (1.0 - s);
      }
    });
  }
  return out;
}

inline TensorPtr silu(const TensorPtr& a) {
  auto out = Tensor::zeros(a->shape);
  std::vector<double> sig(a->size());
  for (std::size_t i = 0; i < a->size(); ++i) {
    sig[i] = sigmoid_val(a->data[i]);
    out->data[i] = a->data[i] * sig[i];
  }
  if (Tape* tape = grad_tape(a)) {
    out->requires_grad = true;
    tape->record([a, out, sig = std::move(sig)] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i) {
        const double s = sig[i];
        a->grad[i] += out->grad[i] * s * (1.0 + a->data[i] * (1.0 - s));
      }
    });
  }
  return out;
}

// Exact (erf-based) form: 0.5 x (1 + erf(x / sqrt(2))).
inline TensorPtr gelu(const TensorPtr& a) {
  static const double inv_sqrt2 = 0.7071067811865475244;
  static const double inv_sqrt2pi = 0.3989422804014326779;
  auto out = Tensor::zeros(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) {
    const double x = a->data[i];
    out->data[i] = 0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
  }
  if (Tape* tape = grad_tape(a)) {
    out->requires_grad = true;
    tape->record([a, out] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i) {
        const double x = a->data[i];
        const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
        const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
        a->grad[i] += out->grad[i] * (cdf + x * pdf);
      }
    });
  }
  return out;
}

inline double softplus_val(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

inline TensorPtr softplus(const TensorPtr& a) {
  auto out = Tensor::zeros(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i)
    out->data[i] = softplus_val(a->data[i]);
  if (Tape* tape = grad_tape(a)) {
    out->requires_grad = true;
    tape->record([a, out] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i)
        a->grad[i] += out->grad[i] * sigmoid_val(a->data[i]);
    });
  }
  return out;
}

// out = -exp(x). Used for state matrices parameterized through their log.
inline TensorPtr neg_exp(const TensorPtr& a) {
  auto out = Tensor::zeros(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i)
    out->data[i] = -std::exp(a->data[i]);
  if (Tape* tape = grad_tape(a)) {
    out->requires_grad = true;
    tape->record([a, out] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i)
        a->grad[i] += out->grad[i] * out->data[i];
    });
  }
  return out;
}

// Row-wise softmax with max subtraction for stability.
inline TensorPtr softmax_rows(const TensorPtr& a) {
  require_2d(a, "softmax_rows");
  const std::size_t R = a->shape[0], D = a->shape[1];
  auto out = Tensor::zeros(a->shape);
  for (std::size_t r = 0; r < R; ++r) {
    const double* x = &a->data[r * D];
    double m = x[0];
    for (std::size_t d = 1; d < D; ++d) m = std::max(m, x[d]);
    double z = 0.0;
    double* y = &out->data[r * D];
    for (std::size_t d = 0; d < D; ++d) {
      y[d] = std::exp(x[d] - m);
      z += y[d];
    }
    const double inv = 1.0 / z;
    for (std::size_t d = 0; d < D; ++d) y[d] *= inv;
  }
  if (Tape* tape = grad_tape(a)) {
    out->requires_grad = true;
    tape->record([a, out, R, D] {
      if (out->grad.empty()) return;
      a->ensure_grad();
      for (std::size_t r = 0; r < R; ++r) {
        const double* y = &out->data[r * D];
        const double* g = &out->grad[r * D];
        double dot = 0.0;
        for (std::size_t d = 0; d < D; ++d) dot += y[d] * g[d];
        for (std::size_t d = 0; d < D; ++d)
          a->grad[r * D + d] += y[d] * (g[d] - dot);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// normalization

inline TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gamma,
                            const TensorPtr& beta, double eps = 1e-5) {
  require_2d(x, "layer_norm");
  const std::size_t R = x->shape[0], D = x->shape[1];
  if (gamma->size() != D || beta->size() != D)
    throw DimError("layer_norm: scale/shift length does not match width " +
                   std::to_string(D));
  auto out = Tensor::zeros(x->shape);
  std::vector<double> xhat(R * D);
  std::vector<double> inv_std(R);
  for (std::size_t r = 0; r < R; ++r) {
    const double* row = &x->data[r * D];
    double m = 0.0;
    for (std::size_t d = 0; d < D; ++d) m += row[d];
    m /= double(D);
    double var = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      const double c = row[d] - m;
      var += c * c;
    }
    var /= double(D);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t d = 0; d < D; ++d) {
      const double h = (row[d] - m) * inv;
      xhat[r * D + d] = h;
      out->data[r * D + d] = gamma->data[d] * h + beta->data[d];
    }
  }
  Tape* tape = active_tape();
  if (tape && (x->requires_grad || gamma->requires_grad ||
               beta->requires_grad)) {
    out->requires_grad = true;
    tape->record([x, gamma, beta, out, xhat = std::move(xhat),
                  inv_std = std::move(inv_std), R, D] {
      if (out->grad.empty()) return;
      if (gamma->requires_grad) gamma->ensure_grad();
      if (beta->requires_grad) beta->ensure_grad();
      if (x->requires_grad) x->ensure_grad();
      for (std::size_t r = 0; r < R; ++r) {
        const double* g = &out->grad[r * D];
        const double* h = &xhat[r * D];
        if (gamma->requires_grad || beta->requires_grad) {
          for (std::size_t d = 0; d < D; ++d) {
            if (gamma->requires_grad) gamma->grad[d] += g[d] * h[d];
            if (beta->requires_grad) beta->grad[d] += g[d];
          }
        }
        if (x->requires_grad) {
          double sum_dh = 0.0, sum_dh_h = 0.0;
          for (std::size_t d = 0; d < D; ++d) {
            const double dh = g[d] * gamma->data[d];
            sum_dh += dh;
            sum_dh_h += dh * h[d];
          }
          const double invD = 1.0 / double(D);
          for (std::size_t d = 0; d < D; ++d) {
            const double dh = g[d] * gamma->data[d];
            x->grad[r * D + d] +=
                inv_std[r] * (dh - sum_dh * invD - h[d] * sum_dh_h * invD);
          }
        }
      }
    });
  }
  return out;
}

// Batch normalization over the row dimension with biased batch variance.
// In training mode the running buffers are updated in place (they are plain
// value tensors, never differentiated); in eval mode they are read instead.
inline TensorPtr batch_norm(const TensorPtr& x, const TensorPtr& gamma,
                            const TensorPtr& beta,
                            const TensorPtr& running_mean,
                            const TensorPtr& running_var, bool training,
                            double momentum = 0.1, double eps = 1e-5) {
  require_2d(x, "batch_norm");
  const std::size_t R = x->shape[0], D = x->shape[1];
  if (gamma->size() != D || beta->size() != D || running_mean->size() != D ||
      running_var->size() != D)
    throw DimError("batch_norm: parameter length does not match width " +
                   std::to_string(D));
  if (R == 0) throw DimError("batch_norm: no rows");
  auto out = Tensor::zeros(x->shape);
  std::vector<double> xhat(R * D);
  std::vector<double> inv_std(D);
  if (training) {
    for (std::size_t d = 0; d < D; ++d) {
      double m = 0.0;
      for (std::size_t r = 0; r < R; ++r) m += x->data[r * D + d];
      m /= double(R);
      double var = 0.0;
      for (std::size_t r = 0; r < R; ++r) {
        const double c = x->data[r * D + d] - m;
        var += c * c;
      }
      var /= double(R);
      const double inv = 1.0 / std::sqrt(var + eps);
      inv_std[d] = inv;
      for (std::size_t r = 0; r < R; ++r) {
        const double h = (x->data[r * D + d] - m) * inv;
        xhat[r * D + d] = h;
        out->data[r * D + d] = gamma->data[d] * h + beta->data[d];
      }
      running_mean->data[d] = (1.0 - momentum) * running_mean->data[d] +
                              momentum * m;
      running_var->data[d] = (1.0 - momentum) * running_var->data[d] +
                             momentum * var;
    }
  } else {
    for (std::size_t d = 0; d < D; ++d) {
      const double inv = 1.0 / std::sqrt(running_var->data[d] + eps);
      inv_std[d] = inv;
      for (std::size_t r = 0; r < R; ++r) {
        const double h = (x->data[r * D + d] - running_mean->data[d]) * inv;
        xhat[r * D + d] = h;
        out->data[r * D + d] = gamma->data[d] * h + beta->data[d];
      }
    }
  }
  Tape* tape = active_tape();
  if (tape && (x->requires_grad || gamma->requires_grad ||
               beta->requires_grad)) {
    out->requires_grad = true;
    tape->record([x, gamma, beta, out, xhat = std::move(xhat),
                  inv_std = std::move(inv_std), training, R, D] {
      if (out->grad.empty()) return;
      if (gamma->requires_grad) gamma->ensure_grad();
      if (beta->requires_grad) beta->ensure_grad();
      if (x->requires_grad) x->ensure_grad();
      for (std::size_t d = 0; d < D; ++d) {
        double sum_g = 0.0, sum_gh = 0.0;
        for (std::size_t r = 0; r < R; ++r) {
          const double g = out->grad[r * D + d];
          sum_g += g;
          sum_gh += g * xhat[r * D + d];
        }
        if (gamma->requires_grad) gamma->grad[d] += sum_gh;
        if (beta->requires_grad) beta->grad[d] += sum_g;
        if (x->requires_grad) {
          const double k = gamma->data[d] * inv_std[d];
          if (training) {
            const double invR = 1.0 / double(R);
            for (std::size_t r = 0; r < R; ++r) {
              const double g = out->grad[r * D + d];
              x->grad[r * D + d] +=
                  k * (g - sum_g * invR - xhat[r * D + d] * sum_gh * invR);
            }
          } else {
            for (std::size_t r = 0; r < R; ++r)
              x->grad[r * D + d] += k * out->grad[r * D + d];
          }
        }
      }
    });
  }
  return out;
}

// Row-wise L2 normalization. An exactly-zero row cannot be normalized; it is
// replaced by the first basis vector, reported through `degenerate`, and its
// gradient is dropped.
inline TensorPtr l2_normalize_rows(const TensorPtr& x,
                                   bool* degenerate = nullptr) {
  require_2d(x, "l2_normalize_rows");
  const std::size_t R = x->shape[0], D = x->shape[1];
  auto out = Tensor::zeros(x->shape);
  std::vector<double> inv_norm(R, 0.0);
  bool any_degenerate = false;
  for (std::size_t r = 0; r < R; ++r) {
    const double* row = &x->data[r * D];
    double n2 = 0.0;
    for (std::size_t d = 0; d < D; ++d) n2 += row[d] * row[d];
    if (n2 == 0.0) {
      any_degenerate = true;
      out->data[r * D] = 1.0;
      continue;
    }
    const double inv = 1.0 / std::sqrt(n2);
    inv_norm[r] = inv;
    for (std::size_t d = 0; d < D; ++d) out->data[r * D + d] = row[d] * inv;
  }
  if (degenerate) *degenerate = any_degenerate;
  if (Tape* tape = grad_tape(x)) {
    out->requires_grad = true;
    tape->record([x, out, inv_norm = std::move(inv_norm), R, D] {
      if (out->grad.empty()) return;
      x->ensure_grad();
      for (std::size_t r = 0; r < R; ++r) {
        if (inv_norm[r] == 0.0) continue;
        const double* g = &out->grad[r * D];
        const double* y = &out->data[r * D];
        double dot = 0.0;
        for (std::size_t d = 0; d < D; ++d) dot += g[d] * y[d];
        for (std::size_t d = 0; d < D; ++d)
          x->grad[r * D + d] += inv_norm[r] * (g[d] - y[d] * dot);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// regularization / convolution

// Inverted dropout: kept activations are rescaled by 1/(1-rate) so the
// expected value is unchanged. rate = 0 is the identity and draws nothing.
inline TensorPtr dropout(const TensorPtr& x, double rate, RngStream& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ArgError("dropout: rate must lie in [0, 1)");
  if (rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  auto out = Tensor::zeros(x->shape);
  std::vector<double> mask(x->size());
  for (std::size_t i = 0; i < x->size(); ++i) {
    mask[i] = rng.uniform() >= rate ? keep_scale : 0.0;
    out->data[i] = x->data[i] * mask[i];
  }
  if (Tape* tape = grad_tape(x)) {
    out->requires_grad = true;
    tape->record([x, out, mask = std::move(mask)] {
      if (out->grad.empty()) return;
      x->ensure_grad();
      for (std::size_t i = 0; i < x->size(); ++i)
        x->grad[i] += out->grad[i] * mask[i];
    });
  }
  return out;
}

// Causal depth-wise 1-d convolution along the row (time) axis.
// x: (L, D), kernel: (W, D), bias: (D) or null. Row t mixes rows
// t-W+1 .. t of its own channel only; the left edge is zero-padded.
inline TensorPtr depthwise_conv1d(const TensorPtr& x, const TensorPtr& kernel,
                                  const TensorPtr& bias) {
  require_2d(x, "depthwise_conv1d");
  require_2d(kernel, "depthwise_conv1d");
  const std::size_t L = x->shape[0], D = x->shape[1];
  const std::size_t W = kernel->shape[0];
  if (kernel->shape[1] != D)
    throw DimError("depthwise_conv1d: kernel width does not match channels");
  if (W == 0) throw DimError("depthwise_conv1d: empty kernel");
  if (bias && bias->size() != D)
    throw DimError("depthwise_conv1d: bias length does not match channels");
  auto out = Tensor::zeros(x->shape);
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t d = 0; d < D; ++d) {
      double acc = bias ? bias->data[d] : 0.0;
      for (std::size_t j = 0; j < W; ++j) {
        const std::ptrdiff_t s =
            std::ptrdiff_t(t) - std::ptrdiff_t(W - 1) + std::ptrdiff_t(j);
        if (s >= 0) acc += kernel->data[j * D + d] * x->data[std::size_t(s) * D + d];
      }
      out->data[t * D + d] = acc;
    }
  }
  Tape* tape = active_tape();
  const bool rec = tape && (x->requires_grad || kernel->requires_grad ||
                            (bias && bias->requires_grad));
  if (rec) {
    out->requires_grad = true;
    tape->record([x, kernel, bias, out, L, D, W] {
      if (out->grad.empty()) return;
      if (x->requires_grad) x->ensure_grad();
      if (kernel->requires_grad) kernel->ensure_grad();
      if (bias && bias->requires_grad) bias->ensure_grad();
      for (std::size_t t = 0; t < L; ++t) {
        for (std::size_t d = 0; d < D; ++d) {
          const double g = out->grad[t * D + d];
          if (g == 0.0) continue;
          if (bias && bias->requires_grad) bias->grad[d] += g;
          for (std::size_t j = 0; j < W; ++j) {
            const std::ptrdiff_t s =
                std::ptrdiff_t(t) - std::ptrdiff_t(W - 1) + std::ptrdiff_t(j);
            if (s < 0) continue;
            if (kernel->requires_grad)
              kernel->grad[j * D + d] += g * x->data[std::size_t(s) * D + d];
            if (x->requires_grad)
              x->grad[std::size_t(s) * D + d] += g * kernel->data[j * D + d];
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// losses

// Mean negative log-likelihood over rows, computed through a stable
// log-sum-exp. labels[r] indexes the true column of row r.
inline TensorPtr cross_entropy(const TensorPtr& logits,
                               const std::vector<std::size_t>& labels) {
  require_2d(logits, "cross_entropy");
  const std::size_t R = logits->shape[0], C = logits->shape[1];
  if (labels.size() != R)
    throw DimError("cross_entropy: " + std::to_string(labels.size()) +
                   " labels for " + std::to_string(R) + " rows");
  for (std::size_t l : labels)
    if (l >= C)
      throw DimError("cross_entropy: label " + std::to_string(l) +
                     " out of range for " + std::to_string(C) + " classes");
  std::vector<double> probs(R * C);
  double loss = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    const double* x = &logits->data[r * C];
    double m = x[0];
    for (std::size_t c = 1; c < C; ++c) m = std::max(m, x[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      probs[r * C + c] = std::exp(x[c] - m);
      z += probs[r * C + c];
    }
    const double inv = 1.0 / z;
    for (std::size_t c = 0; c < C; ++c) probs[r * C + c] *= inv;
    loss += m + std::log(z) - x[labels[r]];
  }
  auto out = Tensor::scalar(loss / double(R));
  if (Tape* tape = grad_tape(logits)) {
    out->requires_grad = true;
    tape->record([logits, out, probs = std::move(probs), labels, R, C] {
      if (out->grad.empty()) return;
      logits->ensure_grad();
      const double g = out->grad[0] / double(R);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c)
          logits->grad[r * C + c] +=
              g * (probs[r * C + c] - (c == labels[r] ? 1.0 : 0.0));
    });
  }
  return out;
}

// Mean element-wise smooth L1 (Huber with transition at |d| = 1).
inline TensorPtr smooth_l1(const TensorPtr& pred, const TensorPtr& target) {
  require_same_shape(pred, target, "smooth_l1");
  const std::size_t N = pred->size();
  if (N == 0) throw DimError("smooth_l1: empty tensors");
  double loss = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double d = pred->data[i] - target->data[i];
    const double a = std::abs(d);
    loss += a < 1.0 ? 0.5 * d * d : a - 0.5;
  }
  auto out = Tensor::scalar(loss / double(N));
  if (Tape* tape = grad_tape(pred, target)) {
    out->requires_grad = true;
    tape->record([pred, target, out, N] {
      if (out->grad.empty()) return;
      const double g = out->grad[0] / double(N);
      if (pred->requires_grad) pred->ensure_grad();
      if (target->requires_grad) target->ensure_grad();
      for (std::size_t i = 0; i < N; ++i) {
        const double d = pred->data[i] - target->data[i];
        const double w = std::abs(d) < 1.0 ? d : (d > 0.0 ? 1.0 : -1.0);
        if (pred->requires_grad) pred->grad[i] += g * w;
        if (target->requires_grad) target->grad[i] -= g * w;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// graph utilities

// Copies values and severs the tensor from the tape: no gradient flows back
// through the result.
inline TensorPtr detach(const TensorPtr& x) {
  auto out = Tensor::zeros(x->shape);
  out->data = x->data;
  return out;
}

inline std::size_t argmax_row(const TensorPtr& t, std::size_t row) {
  require_2d(t, "argmax_row");
  const std::size_t C = t->shape[1];
  const double* x = &t->data[row * C];
  std::size_t best = 0;
  for (std::size_t c = 1; c < C; ++c)
    if (x[c] > x[best]) best = c;
  return best;
}

}  // namespace pointscan
