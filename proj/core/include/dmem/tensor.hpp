#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "dmem/errors.hpp"

namespace dmem {

// Dense n-dimensional double array. Rank 1 and 2 are the only ranks the
// architecture needs; scalars are represented as shape {1}.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (numel(shape) != data.size()) throw ShapeError("Tensor: shape/data size mismatch");
  }

  static size_t numel(const std::vector<size_t>& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<size_t> s) {
    size_t n = numel(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }

  static Tensor full(std::vector<size_t> s, double v) {
    size_t n = numel(s);
    return Tensor(std::move(s), std::vector<double>(n, v));
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor vec(std::vector<double> d) {
    size_t n = d.size();
    return Tensor({n}, std::move(d));
  }

  static Tensor mat(size_t r, size_t c, std::vector<double> d) { return Tensor({r, c}, std::move(d)); }

  size_t size() const { return data.size(); }
  size_t rank() const { return shape.size(); }
  bool is_scalar() const { return size() == 1; }

  size_t rows() const {
    if (rank() != 2) throw ShapeError("Tensor::rows: not a matrix");
    return shape[0];
  }
  size_t cols() const {
    if (rank() != 2) throw ShapeError("Tensor::cols: not a matrix");
    return shape[1];
  }

  double& at(size_t i) { return data[i]; }
  double at(size_t i) const { return data[i]; }
  double& at(size_t i, size_t j) { return data[i * shape[1] + j]; }
  double at(size_t i, size_t j) const { return data[i * shape[1] + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

class Tape;

// Handle into a Tape; cheap to copy, invalid when default-constructed.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

namespace testing {
// Test hook: deliberately corrupts the tanh gradient rule so negative
// controls can observe a failing gradient check.
inline bool corrupt_tanh_grad = false;
}  // namespace testing

// Define-by-run reverse-mode tape. Nodes are recorded in forward execution
// order; backward() walks them in reverse and accumulates adjoints
// additively across fan-out. One tape serves one forward/backward pass.
class Tape {
 public:
  Tape() { nodes_.reserve(1024); }

  Var leaf(Tensor value);

  Var matmul(Var a, Var b);
  Var matvec(Var w, Var x);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var softmax(Var a);
  Var concat(Var a, Var b);
  Var sum(Var a);
  Var pick(Var vec, size_t index);
  // Row of a matrix as a vector (embedding lookup).
  Var row(Var mat, size_t index);
  Var stack(const std::vector<Var>& scalars);
  // Negative log-likelihood of `target` under softmax(logits); fused so the
  // backward rule is the numerically clean softmax-minus-onehot form.
  Var cross_entropy(Var logits, size_t target);

  // affine(w, x, b) = w·x + b, the ubiquitous building block.
  Var affine(Var w, Var x, Var b) { return add(matvec(w, x), b); }

  void backward(Var loss);

  const Tensor& val(Var v) const { return nodes_[check(v)].value; }
  const Tensor& grad(Var v) const;
  size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    kLeaf,
    kMatMul,
    kMatVec,
    kAdd,
    kSub,
    kMul,
    kTanh,
    kSigmoid,
    kExp,
    kSoftmax,
    kConcat,
    kSum,
    kPick,
    kRow,
    kStack,
    kCrossEnt,
  };

  struct Node {
    Op op;
    Tensor value;
    std::vector<int> parents;
    size_t aux = 0;  // pick index / cross-entropy target
  };

  int check(Var v) const {
    if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size())
      throw ContractError("Tape: invalid Var handle");
    return v.id;
  }

  Var push(Op op, Tensor value, std::vector<int> parents, size_t aux = 0);
  void backward_node(int i);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool ran_backward_ = false;
};

}  // namespace dmem
