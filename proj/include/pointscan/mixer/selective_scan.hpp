#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pointscan/core/ops.hpp"
#include "pointscan/core/tensor.hpp"

namespace pointscan {

namespace detail {

inline void scan_check_shapes(const TensorPtr& u, const TensorPtr& delta,
                              const TensorPtr& a, const TensorPtr& b,
                              const TensorPtr& c, const TensorPtr& skip) {
  require_2d(u, "selective_scan");
  require_2d(delta, "selective_scan");
  require_2d(a, "selective_scan");
  require_2d(b, "selective_scan");
  require_2d(c, "selective_scan");
  const std::size_t L = u->shape[0], D = u->shape[1], S = a->shape[1];
  if (delta->shape != u->shape)
    throw DimError("selective_scan: delta shape " + shape_str(delta->shape) +
                   " does not match input " + shape_str(u->shape));
  if (a->shape[0] != D)
    throw DimError("selective_scan: state matrix rows " +
                   std::to_string(a->shape[0]) + " do not match channels " +
                   std::to_string(D));
  if (b->shape[0] != L || b->shape[1] != S || c->shape[0] != L ||
      c->shape[1] != S)
    throw DimError("selective_scan: input/output mixers must be (L, S)");
  if (skip->size() != D)
    throw DimError("selective_scan: skip length does not match channels");
  if (L == 0) throw DimError("selective_scan: empty sequence");
}

}  // namespace detail

// Input-dependent linear recurrence over the row (time) axis:
//
//   h[t]    = exp(delta[t,d] * A[d,:]) (*) h[t-1] + delta[t,d] * B[t,:] * u[t,d]
//   y[t,d]  = <C[t,:], h[t]> + skip[d] * u[t,d]
//
// with h[-1] = 0, run independently per channel d against S hidden states.
// The backward pass replays the recurrence channel by channel (states are
// recomputed, not stored, so memory stays at O(L*S) scratch) and then walks
// it in reverse, accumulating into every input.
inline TensorPtr selective_scan(const TensorPtr& u, const TensorPtr& delta,
                                const TensorPtr& a, const TensorPtr& b,
                                const TensorPtr& c, const TensorPtr& skip) {
  detail::scan_check_shapes(u, delta, a, b, c, skip);
  const std::size_t L = u->shape[0], D = u->shape[1], S = a->shape[1];
  auto out = Tensor::zeros({L, D});
  std::vector<double> h(D * S, 0.0);
  for (std::size_t t = 0; t < L; ++t) {
    const double* brow = &b->data[t * S];
    const double* crow = &c->data[t * S];
    for (std::size_t d = 0; d < D; ++d) {
      const double dt = delta->data[t * D + d];
      const double ut = u->data[t * D + d];
      const double* arow = &a->data[d * S];
      double* hrow = &h[d * S];
      double acc = 0.0;
      for (std::size_t s = 0; s < S; ++s) {
        hrow[s] = std::exp(dt * arow[s]) * hrow[s] + dt * brow[s] * ut;
        acc += crow[s] * hrow[s];
      }
      const double y = acc + skip->data[d] * ut;
      if (!std::isfinite(y))
        throw NumericError("selective_scan: non-finite value at step " +
                           std::to_string(t));
      out->data[t * D + d] = y;
    }
  }
  Tape* tape = active_tape();
  const bool rec =
      tape && (u->requires_grad || delta->requires_grad || a->requires_grad ||
               b->requires_grad || c->requires_grad || skip->requires_grad);
  if (rec) {
    out->requires_grad = true;
    tape->record([u, delta, a, b, c, skip, out, L, D, S] {
      if (out->grad.empty()) return;
      if (u->requires_grad) u->ensure_grad();
      if (delta->requires_grad) delta->ensure_grad();
      if (a->requires_grad) a->ensure_grad();
      if (b->requires_grad) b->ensure_grad();
      if (c->requires_grad) c->ensure_grad();
      if (skip->requires_grad) skip->ensure_grad();
      std::vector<double> states((L + 1) * S);
      std::vector<double> dh(S);
      for (std::size_t d = 0; d < D; ++d) {
        const double* arow = &a->data[d * S];
        // forward replay of channel d to recover every hidden state
        for (std::size_t s = 0; s < S; ++s) states[s] = 0.0;
        for (std::size_t t = 0; t < L; ++t) {
          const double dt = delta->data[t * D + d];
          const double ut = u->data[t * D + d];
          const double* brow = &b->data[t * S];
          const double* prev = &states[t * S];
          double* cur = &states[(t + 1) * S];
          for (std::size_t s = 0; s < S; ++s)
            cur[s] = std::exp(dt * arow[s]) * prev[s] + dt * brow[s] * ut;
        }
        // reverse sweep
        for (std::size_t s = 0; s < S; ++s) dh[s] = 0.0;
        for (std::size_t t = L; t-- > 0;) {
          const double g = out->grad[t * D + d];
          const double dt = delta->data[t * D + d];
          const double ut = u->data[t * D + d];
          const double* brow = &b->data[t * S];
          const double* crow = &c->data[t * S];
          const double* prev = &states[t * S];
          const double* cur = &states[(t + 1) * S];
          double du_local = g * skip->data[d];
          if (skip->requires_grad) skip->grad[d] += g * ut;
          for (std::size_t s = 0; s < S; ++s) {
            if (c->requires_grad) c->grad[t * S + s] += g * cur[s];
            dh[s] += g * crow[s];
          }
          double ddelta_local = 0.0;
          for (std::size_t s = 0; s < S; ++s) {
            const double decay = std::exp(dt * arow[s]);
            if (b->requires_grad) b->grad[t * S + s] += dh[s] * dt * ut;
            du_local += dh[s] * dt * brow[s];
            ddelta_local +=
                dh[s] * (decay * arow[s] * prev[s] + brow[s] * ut);
            if (a->requires_grad)
              a->grad[d * S + s] += dh[s] * decay * dt * prev[s];
            dh[s] *= decay;
          }
          if (u->requires_grad) u->grad[t * D + d] += du_local;
          if (delta->requires_grad)
            delta->grad[t * D + d] += ddelta_local;
        }
      }
    });
  }
  return out;
}

// Value-only blocked evaluation of the same recurrence. Within each block the
// decay prefix product is accumulated first and applied to the carried state
// once, so the arithmetic is associated differently from the step-by-step
// reference; agreement between the two is a meaningful cross-check. Never
// records onto the tape.
inline TensorPtr selective_scan_chunked(const TensorPtr& u,
                                        const TensorPtr& delta,
                                        const TensorPtr& a, const TensorPtr& b,
                                        const TensorPtr& c,
                                        const TensorPtr& skip,
                                        std::size_t chunk = 64) {
  detail::scan_check_shapes(u, delta, a, b, c, skip);
  if (chunk == 0) throw ArgError("selective_scan_chunked: chunk must be > 0");
  const std::size_t L = u->shape[0], D = u->shape[1], S = a->shape[1];
  auto out = Tensor::zeros({L, D});
  std::vector<double> carry(D * S, 0.0);
  std::vector<double> prefix(S), local(S);
  for (std::size_t t0 = 0; t0 < L; t0 += chunk) {
    const std::size_t t1 = std::min(L, t0 + chunk);
    for (std::size_t d = 0; d < D; ++d) {
      const double* arow = &a->data[d * S];
      double* carry_row = &carry[d * S];
      for (std::size_t s = 0; s < S; ++s) {
        prefix[s] = 1.0;
        local[s] = 0.0;
      }
      for (std::size_t t = t0; t < t1; ++t) {
        const double dt = delta->data[t * D + d];
        const double ut = u->data[t * D + d];
        const double* brow = &b->data[t * S];
        const double* crow = &c->data[t * S];
        double acc = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
          const double decay = std::exp(dt * arow[s]);
          prefix[s] *= decay;
          local[s] = decay * local[s] + dt * brow[s] * ut;
          acc += crow[s] * (prefix[s] * carry_row[s] + local[s]);
        }
        const double y = acc + skip->data[d] * ut;
        if (!std::isfinite(y))
          throw NumericError(
              "selective_scan_chunked: non-finite value at step " +
              std::to_string(t));
        out->data[t * D + d] = y;
      }
      for (std::size_t s = 0; s < S; ++s)
        carry_row[s] = prefix[s] * carry_row[s] + local[s];
    }
  }
  return out;
}

}  // namespace pointscan
