#include "dmem/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace dmem {

Var Tape::push(Op op, Tensor value, std::vector<int> parents, size_t aux) {
  nodes_.push_back(Node{op, std::move(value), std::move(parents), aux});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor value) { return push(Op::kLeaf, std::move(value), {}); }

Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows())
    throw ShapeError("matmul: inner dimensions disagree");
  size_t m = ta.rows(), k = ta.cols(), n = tb.cols();
  Tensor out = Tensor::zeros({m, n});
  for (size_t i = 0; i < m; ++i)
    for (size_t p = 0; p < k; ++p) {
      double av = ta.at(i, p);
      for (size_t j = 0; j < n; ++j) out.at(i, j) += av * tb.at(p, j);
    }
  return push(Op::kMatMul, std::move(out), {check(a), check(b)});
}

Var Tape::matvec(Var w, Var x) {
  const Tensor& tw = val(w);
  const Tensor& tx = val(x);
  if (tw.rank() != 2 || tx.rank() != 1 || tw.cols() != tx.size())
    throw ShapeError("matvec: dimensions disagree");
  size_t m = tw.rows(), k = tw.cols();
  Tensor out = Tensor::zeros({m});
  const double* wd = tw.data.data();
  const double* xd = tx.data.data();
  for (size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    const double* row = wd + i * k;
    for (size_t p = 0; p < k; ++p) acc += row[p] * xd[p];
    out.data[i] = acc;
  }
  return push(Op::kMatVec, std::move(out), {check(w), check(x)});
}

namespace {

// Broadcasting is restricted to equal shapes or scalar-with-tensor.
enum class Bcast { kEqual, kLeftScalar, kRightScalar };

Bcast bcast_kind(const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return Bcast::kEqual;
  if (a.is_scalar()) return Bcast::kLeftScalar;
  if (b.is_scalar()) return Bcast::kRightScalar;
  throw ShapeError("elementwise: shapes incompatible (only scalar broadcast supported)");
}

}  // namespace

Var Tape::add(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  Bcast k = bcast_kind(ta, tb);
  Tensor out = (k == Bcast::kLeftScalar) ? tb : ta;
  if (k == Bcast::kEqual) {
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = ta.data[i] + tb.data[i];
  } else if (k == Bcast::kLeftScalar) {
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = ta.data[0] + tb.data[i];
  } else {
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = ta.data[i] + tb.data[0];
  }
  return push(Op::kAdd, std::move(out), {check(a), check(b)});
}

Var Tape::sub(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  Bcast k = bcast_kind(ta, tb);
  Tensor out = (k == Bcast::kLeftScalar) ? tb : ta;
  if (k == Bcast::kEqual) {
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = ta.data[i] - tb.data[i];
  } else if (k == Bcast::kLeftScalar) {
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = ta.data[0] - tb.data[i];
  } else {
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = ta.data[i] - tb.data[0];
  }
  return push(Op::kSub, std::move(out), {check(a), check(b)});
}

Var Tape::mul(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  Bcast k = bcast_kind(ta, tb);
  Tensor out = (k == Bcast::kLeftScalar) ? tb : ta;
  if (k == Bcast::kEqual) {
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = ta.data[i] * tb.data[i];
  } else if (k == Bcast::kLeftScalar) {
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = ta.data[0] * tb.data[i];
  } else {
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = ta.data[i] * tb.data[0];
  }
  return push(Op::kMul, std::move(out), {check(a), check(b)});
}

Var Tape::tanh(Var a) {
  Tensor out = val(a);
  for (double& v : out.data) v = std::tanh(v);
  return push(Op::kTanh, std::move(out), {check(a)});
}

Var Tape::sigmoid(Var a) {
  Tensor out = val(a);
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return push(Op::kSigmoid, std::move(out), {check(a)});
}

Var Tape::exp(Var a) {
  Tensor out = val(a);
  for (double& v : out.data) v = std::exp(v);
  return push(Op::kExp, std::move(out), {check(a)});
}

Var Tape::softmax(Var a) {
  const Tensor& ta = val(a);
  if (ta.rank() != 1 || ta.size() == 0) throw DomainError("softmax: needs a nonempty vector");
  double mx = *std::max_element(ta.data.begin(), ta.data.end());
  Tensor out = ta;
  double z = 0.0;
  for (double& v : out.data) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : out.data) v /= z;
  return push(Op::kSoftmax, std::move(out), {check(a)});
}

Var Tape::concat(Var a, Var b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  if (ta.rank() != 1 || tb.rank() != 1) throw ShapeError("concat: rank-1 operands required");
  Tensor out = Tensor::zeros({ta.size() + tb.size()});
  std::copy(ta.data.begin(), ta.data.end(), out.data.begin());
  std::copy(tb.data.begin(), tb.data.end(), out.data.begin() + ta.size());
  return push(Op::kConcat, std::move(out), {check(a), check(b)});
}

Var Tape::sum(Var a) {
  const Tensor& ta = val(a);
  double s = 0.0;
  for (double v : ta.data) s += v;
  return push(Op::kSum, Tensor::scalar(s), {check(a)});
}

Var Tape::pick(Var vec, size_t index) {
  const Tensor& tv = val(vec);
  if (tv.rank() != 1) throw ShapeError("pick: rank-1 operand required");
  if (index >= tv.size()) throw IndexError("pick: index out of range");
  return push(Op::kPick, Tensor::scalar(tv.data[index]), {check(vec)}, index);
}

Var Tape::row(Var mat, size_t index) {
  const Tensor& tm = val(mat);
  if (tm.rank() != 2) throw ShapeError("row: rank-2 operand required");
  if (index >= tm.rows()) throw IndexError("row: index out of range");
  size_t c = tm.cols();
  Tensor out = Tensor::zeros({c});
  std::copy(tm.data.begin() + index * c, tm.data.begin() + (index + 1) * c, out.data.begin());
  return push(Op::kRow, std::move(out), {check(mat)}, index);
}

Var Tape::stack(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw DomainError("stack: empty input");
  Tensor out = Tensor::zeros({scalars.size()});
  std::vector<int> parents;
  parents.reserve(scalars.size());
  for (size_t i = 0; i < scalars.size(); ++i) {
    const Tensor& s = val(scalars[i]);
    if (!s.is_scalar()) throw ShapeError("stack: operands must be scalars");
    out.data[i] = s.data[0];
    parents.push_back(check(scalars[i]));
  }
  return push(Op::kStack, std::move(out), std::move(parents));
}

Var Tape::cross_entropy(Var logits, size_t target) {
  const Tensor& tl = val(logits);
  if (tl.rank() != 1 || tl.size() == 0) throw ShapeError("cross_entropy: needs a logit vector");
  if (target >= tl.size()) throw IndexError("cross_entropy: target out of range");
  double mx = *std::max_element(tl.data.begin(), tl.data.end());
  double z = 0.0;
  for (double v : tl.data) z += std::exp(v - mx);
  double nll = std::log(z) + mx - tl.data[target];
  return push(Op::kCrossEnt, Tensor::scalar(nll), {check(logits)}, target);
}

const Tensor& Tape::grad(Var v) const {
  if (!ran_backward_) throw ContractError("Tape::grad: backward() not yet run");
  return grads_[check(v)];
}

void Tape::backward(Var loss) {
  int root = check(loss);
  if (!nodes_[root].value.is_scalar()) throw ContractError("backward: loss must be scalar");
  grads_.clear();
  grads_.resize(nodes_.size());
  for (size_t i = 0; i < nodes_.size(); ++i) grads_[i] = Tensor::zeros(nodes_[i].value.shape);
  grads_[root].data[0] = 1.0;
  for (int i = root; i >= 0; --i) backward_node(i);
  ran_backward_ = true;
}

namespace {

// Adjoint of a broadcast operand: sum-reduce when the operand was scalar.
void accumulate(Tensor& dst, const std::vector<double>& contrib) {
  if (dst.size() == contrib.size()) {
    for (size_t i = 0; i < contrib.size(); ++i) dst.data[i] += contrib[i];
  } else {
    double s = 0.0;
    for (double v : contrib) s += v;
    dst.data[0] += s;
  }
}

}  // namespace

void Tape::backward_node(int i) {
  const Node& n = nodes_[i];
  const Tensor& g = grads_[i];
  bool all_zero = true;
  for (double v : g.data)
    if (v != 0.0) {
      all_zero = false;
      break;
    }
  if (all_zero) return;

  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kMatMul: {
      const Tensor& a = nodes_[n.parents[0]].value;
      const Tensor& b = nodes_[n.parents[1]].value;
      Tensor& da = grads_[n.parents[0]];
      Tensor& db = grads_[n.parents[1]];
      size_t m = a.rows(), k = a.cols(), c = b.cols();
      for (size_t r = 0; r < m; ++r)
        for (size_t j = 0; j < c; ++j) {
          double gv = g.at(r, j);
          if (gv == 0.0) continue;
          for (size_t p = 0; p < k; ++p) {
            da.at(r, p) += gv * b.at(p, j);
            db.at(p, j) += gv * a.at(r, p);
          }
        }
      break;
    }
    case Op::kMatVec: {
      const Tensor& w = nodes_[n.parents[0]].value;
      const Tensor& x = nodes_[n.parents[1]].value;
      Tensor& dw = grads_[n.parents[0]];
      Tensor& dx = grads_[n.parents[1]];
      size_t m = w.rows(), k = w.cols();
      const double* xd = x.data.data();
      for (size_t r = 0; r < m; ++r) {
        double gv = g.data[r];
        if (gv == 0.0) continue;
        double* dwrow = dw.data.data() + r * k;
        const double* wrow = w.data.data() + r * k;
        for (size_t p = 0; p < k; ++p) {
          dwrow[p] += gv * xd[p];
          dx.data[p] += gv * wrow[p];
        }
      }
      break;
    }
    case Op::kAdd: {
      accumulate(grads_[n.parents[0]], g.data);
      accumulate(grads_[n.parents[1]], g.data);
      break;
    }
    case Op::kSub: {
      accumulate(grads_[n.parents[0]], g.data);
      std::vector<double> neg(g.data);
      for (double& v : neg) v = -v;
      accumulate(grads_[n.parents[1]], neg);
      break;
    }
    case Op::kMul: {
      const Tensor& a = nodes_[n.parents[0]].value;
      const Tensor& b = nodes_[n.parents[1]].value;
      std::vector<double> ca(g.size()), cb(g.size());
      for (size_t j = 0; j < g.size(); ++j) {
        double av = a.is_scalar() ? a.data[0] : a.data[j];
        double bv = b.is_scalar() ? b.data[0] : b.data[j];
        ca[j] = g.data[j] * bv;
        cb[j] = g.data[j] * av;
      }
      accumulate(grads_[n.parents[0]], ca);
      accumulate(grads_[n.parents[1]], cb);
      break;
    }
    case Op::kTanh: {
      Tensor& d = grads_[n.parents[0]];
      double kick = testing::corrupt_tanh_grad ? 0.5 : 0.0;
      for (size_t j = 0; j < g.size(); ++j) {
        double y = n.value.data[j];
        d.data[j] += g.data[j] * (1.0 - y * y + kick);
      }
      break;
    }
    case Op::kSigmoid: {
      Tensor& d = grads_[n.parents[0]];
      for (size_t j = 0; j < g.size(); ++j) {
        double y = n.value.data[j];
        d.data[j] += g.data[j] * y * (1.0 - y);
      }
      break;
    }
    case Op::kExp: {
      Tensor& d = grads_[n.parents[0]];
      for (size_t j = 0; j < g.size(); ++j) d.data[j] += g.data[j] * n.value.data[j];
      break;
    }
    case Op::kSoftmax: {
      Tensor& d = grads_[n.parents[0]];
      double dot = 0.0;
      for (size_t j = 0; j < g.size(); ++j) dot += g.data[j] * n.value.data[j];
      for (size_t j = 0; j < g.size(); ++j) d.data[j] += n.value.data[j] * (g.data[j] - dot);
      break;
    }
    case Op::kConcat: {
      Tensor& da = grads_[n.parents[0]];
      Tensor& db = grads_[n.parents[1]];
      size_t na = da.size();
      for (size_t j = 0; j < na; ++j) da.data[j] += g.data[j];
      for (size_t j = 0; j < db.size(); ++j) db.data[j] += g.data[na + j];
      break;
    }
    case Op::kSum: {
      Tensor& d = grads_[n.parents[0]];
      for (double& v : d.data) v += g.data[0];
      break;
    }
    case Op::kPick: {
      grads_[n.parents[0]].data[n.aux] += g.data[0];
      break;
    }
    case Op::kRow: {
      Tensor& d = grads_[n.parents[0]];
      size_t c = d.shape[1];
      for (size_t j = 0; j < c; ++j) d.data[n.aux * c + j] += g.data[j];
      break;
    }
    case Op::kStack: {
      for (size_t j = 0; j < n.parents.size(); ++j) grads_[n.parents[j]].data[0] += g.data[j];
      break;
    }
    case Op::kCrossEnt: {
      const Tensor& logits = nodes_[n.parents[0]].value;
      Tensor& d = grads_[n.parents[0]];
      double mx = *std::max_element(logits.data.begin(), logits.data.end());
      double z = 0.0;
      for (double v : logits.data) z += std::exp(v - mx);
      for (size_t j = 0; j < logits.size(); ++j) {
        double p = std::exp(logits.data[j] - mx) / z;
        d.data[j] += g.data[0] * (p - (j == n.aux ? 1.0 : 0.0));
      }
      break;
    }
  }
}

}  // namespace dmem
