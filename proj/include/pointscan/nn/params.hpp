#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pointscan/core/error.hpp"
#include "pointscan/core/rng.hpp"
#include "pointscan/core/tensor.hpp"

namespace pointscan {

struct ParamEntry {
  TensorPtr value;
  std::vector<double> m;  // first/second Adam moments, sized on first step
  std::vector<double> v;
  std::int64_t step = 0;
  bool trainable = true;
};

// Registry of named parameters and buffers. Randomized initializers draw from
// a stream keyed by (seed, name), so the values of one parameter never depend
// on registration order or on the shapes of other parameters. `names()`
// preserves insertion order, which fixes checkpoint layout and the optimizer
// update order.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  TensorPtr zeros(const std::string& name, std::vector<std::size_t> shape,
                  bool trainable = true) {
    return insert(name, Tensor::zeros(std::move(shape)), trainable);
  }

  TensorPtr full(const std::string& name, std::vector<std::size_t> shape,
                 double value, bool trainable = true) {
    return insert(name, Tensor::full(std::move(shape), value), trainable);
  }

  TensorPtr values(const std::string& name, std::vector<std::size_t> shape,
                   std::vector<double> data, bool trainable = true) {
    return insert(name, Tensor::of(std::move(shape), std::move(data)),
                  trainable);
  }

  // U(-bound, bound), element order fixed by the flat index.
  TensorPtr uniform(const std::string& name, std::vector<std::size_t> shape,
                    double bound, bool trainable = true) {
    auto t = Tensor::zeros(std::move(shape));
    RngStream rng(seed_, "param-init", fnv1a(name));
    for (auto& v : t->data) v = rng.uniform(-bound, bound);
    return insert(name, std::move(t), trainable);
  }

  // Fan-in scaled uniform init for (in, out) weight matrices.
  TensorPtr fan_in_uniform(const std::string& name,
                           std::vector<std::size_t> shape) {
    if (shape.empty()) throw DimError("fan_in_uniform: scalar weight");
    const double bound = 1.0 / std::sqrt(double(shape[0]));
    return uniform(name, std::move(shape), bound);
  }

  // Non-trainable value state (e.g. normalization running statistics). Saved
  // in checkpoints, skipped by the optimizer, never differentiated.
  TensorPtr buffer(const std::string& name, std::vector<std::size_t> shape,
                   double fill = 0.0) {
    return insert(name, Tensor::full(std::move(shape), fill), false);
  }

  bool has(const std::string& name) const { return entries_.count(name) > 0; }

  ParamEntry& entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw ArgError("ParamStore: unknown parameter '" + name + "'");
    return it->second;
  }

  const ParamEntry& entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw ArgError("ParamStore: unknown parameter '" + name + "'");
    return it->second;
  }

  TensorPtr get(const std::string& name) const { return entry(name).value; }

  const std::vector<std::string>& names() const { return order_; }

  void zero_grad() {
    for (auto& [name, e] : entries_) e.value->zero_grad();
  }

  std::size_t parameter_count(bool trainable_only = false) const {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_)
      if (!trainable_only || e.trainable) n += e.value->size();
    return n;
  }

 private:
  TensorPtr insert(const std::string& name, TensorPtr t, bool trainable) {
    if (name.empty()) throw ArgError("ParamStore: empty parameter name");
    if (entries_.count(name))
      throw ArgError("ParamStore: duplicate parameter '" + name + "'");
    t->requires_grad = trainable;
    ParamEntry e;
    e.value = t;
    e.trainable = trainable;
    entries_.emplace(name, std::move(e));
    order_.push_back(name);
    return t;
  }

  std::uint64_t seed_;
  std::map<std::string, ParamEntry> entries_;
  std::vector<std::string> order_;
};

}  // namespace pointscan
