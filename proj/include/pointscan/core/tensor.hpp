#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "pointscan/core/error.hpp"

namespace pointscan {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major tensor of doubles. Gradients live beside the data and are
// allocated lazily on first accumulation; an empty grad means "no gradient
// has reached this tensor yet" and reads as zero.
class Tensor {
 public:
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
      : shape(std::move(s)), data(count(shape), fill) {}

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
  }

  static TensorPtr zeros(std::vector<std::size_t> s, bool rg = false) {
    auto t = std::make_shared<Tensor>(std::move(s));
    t->requires_grad = rg;
    return t;
  }

  static TensorPtr full(std::vector<std::size_t> s, double v, bool rg = false) {
    auto t = std::make_shared<Tensor>(std::move(s), v);
    t->requires_grad = rg;
    return t;
  }

  static TensorPtr of(std::vector<std::size_t> s, std::vector<double> values,
                      bool rg = false) {
    if (count(s) != values.size())
      throw DimError("Tensor::of: value count does not match shape");
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(s);
    t->data = std::move(values);
    t->requires_grad = rg;
    return t;
  }

  static TensorPtr scalar(double v, bool rg = false) {
    return of({1}, {v}, rg);
  }

  std::size_t size() const { return data.size(); }

  std::size_t ndim() const { return shape.size(); }

  // Row/column view used by the 2-d kernels. Rank-1 tensors act as a single
  // row, which lets bias vectors and score columns share the same ops.
  std::size_t rows() const { return shape.size() < 2 ? 1 : shape[0]; }

  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }

  bool is_scalar() const { return size() == 1; }

  double item() const {
    if (!is_scalar()) throw DimError("Tensor::item: tensor is not a scalar");
    return data[0];
  }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }

  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }

  void zero_grad() { grad.clear(); }
};

inline std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

// Records one backward closure per differentiable op, replayed in reverse.
// Closures capture their operand TensorPtrs by value, so intermediates stay
// alive for exactly as long as the tape does.
class Tape {
 public:
  void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }

  std::size_t size() const { return ops_.size(); }

  bool empty() const { return ops_.empty(); }

  void clear() { ops_.clear(); }

  // Seeds d(root)/d(root) = 1 and runs the recorded closures last to first.
  // The tape is consumed: a second backward needs a fresh forward pass.
  void backward(const TensorPtr& root) {
    if (!root->is_scalar())
      throw DimError("Tape::backward: root must be a scalar");
    root->ensure_grad();
    root->grad[0] += 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    clear();
  }

 private:
  std::vector<std::function<void()>> ops_;
};

inline Tape*& tape_slot() {
  static thread_local Tape* active = nullptr;
  return active;
}

inline Tape* active_tape() { return tape_slot(); }

// Makes a tape the recording target for the enclosing scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape) : prev_(tape_slot()) { tape_slot() = &tape; }
  ~TapeScope() { tape_slot() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

// Suspends recording; ops run value-only and their outputs do not require
// gradients. Used for evaluation passes and finite-difference probes.
class NoGradScope {
 public:
  NoGradScope() : prev_(tape_slot()) { tape_slot() = nullptr; }
  ~NoGradScope() { tape_slot() = prev_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* prev_;
};

}  // namespace pointscan
