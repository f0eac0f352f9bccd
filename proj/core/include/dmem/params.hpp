#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "dmem/errors.hpp"
#include "dmem/rng.hpp"
#include "dmem/tensor.hpp"

namespace dmem {

// Named parameter tensors with stable iteration order. Insertion order is
// the serialization order, which keeps checkpoints byte-reproducible.
class ParamStore {
 public:
  void add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw ContractError("ParamStore: duplicate parameter " + name);
    index_[name] = names_.size();
    names_.push_back(name);
    values_.push_back(std::move(t));
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Tensor& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("ParamStore: unknown parameter " + name);
    return values_[it->second];
  }
  const Tensor& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("ParamStore: unknown parameter " + name);
    return values_[it->second];
  }

  const std::vector<std::string>& names() const { return names_; }
  size_t count() const { return names_.size(); }

  size_t total_size() const {
    size_t n = 0;
    for (const Tensor& t : values_) n += t.size();
    return n;
  }

  ParamStore zeros_like() const {
    ParamStore z;
    for (size_t i = 0; i < names_.size(); ++i) z.add(names_[i], Tensor::zeros(values_[i].shape));
    return z;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::unordered_map<std::string, size_t> index_;
};

// One forward pass's view of a ParamStore: every parameter inserted into the
// tape as a leaf, addressable by name. Gradients are read back off the tape
// through the same handles.
class Bound {
 public:
  Bound(Tape& tape, const ParamStore& store) : tape_(&tape), store_(&store) {
    for (const std::string& name : store.names()) vars_[name] = tape.leaf(store.at(name));
  }

  Var operator[](const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw ContractError("Bound: unknown parameter " + name);
    return it->second;
  }

  Tape& tape() const { return *tape_; }

  // Accumulate tape gradients into `grads` (shape-mirrored store).
  void collect_grads(ParamStore& grads) const {
    for (const auto& [name, var] : vars_) {
      const Tensor& g = tape_->grad(var);
      Tensor& dst = grads.at(name);
      for (size_t i = 0; i < g.size(); ++i) dst.data[i] += g.data[i];
    }
  }

 private:
  Tape* tape_;
  const ParamStore* store_;
  std::unordered_map<std::string, Var> vars_;
};

}  // namespace dmem
