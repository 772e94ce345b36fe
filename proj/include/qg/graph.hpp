#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "qg/error.hpp"
#include "qg/rng.hpp"
#include "qg/tensor.hpp"

namespace qg {

// Additive guard inside every log()-of-probability, part of the numeric contract.
inline constexpr double kLogEps = 1e-12;

// A trainable tensor. Models own Params (through a ParamSet); graphs reference
// them. Gradients accumulate across backward() calls until zero_grad(), which
// is what minibatch accumulation relies on.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor(value.rows, value.cols);
  }
  void zero_grad() { grad.fill(0.0); }
};

// Name-addressable registry of Params with stable addresses. Checkpoints and
// the optimizer walk it in insertion order.
class ParamSet {
 public:
  Param& add(const std::string& name, Tensor init) {
    if (by_name_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    owned_.push_back(std::make_unique<Param>(name, std::move(init)));
    by_name_[name] = owned_.back().get();
    return *owned_.back();
  }

  Param* find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
  }

  std::vector<Param*> all() const {
    std::vector<Param*> out;
    out.reserve(owned_.size());
    for (const auto& p : owned_) out.push_back(p.get());
    return out;
  }

  std::size_t size() const { return owned_.size(); }

  void zero_grads() {
    for (const auto& p : owned_) p->zero_grad();
  }

 private:
  std::vector<std::unique_ptr<Param>> owned_;
  std::unordered_map<std::string, Param*> by_name_;
};

enum class Op : std::uint8_t {
  Constant,
  Parameter,
  MatMul,
  Transpose,
  Add,
  Mul,
  Affine,
  AddRowVec,
  Tanh,
  Sigmoid,
  Exp,
  Log,
  SoftmaxRows,
  MaskedSoftmaxRow,
  ConcatCols,
  ConcatRows,
  SliceRows,
  Dropout,
  Lookup,
  NllOfProb,
  SumAll,
  MaxAll,
  ScaleByScalar,
  SelectSum,
};

enum class UnaryKind { Tanh, Sigmoid, Exp, Log };
enum class DropoutMode { Train, Eval };

class Graph;

// Lightweight handle to a node inside one Graph. Valid only while the graph lives.
struct Var {
  Graph* g = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  double item() const;
};

// Define-by-run tape. Nodes are appended in execution order, so inputs always
// precede their consumers and the reverse sweep is just a backward scan.
// A Graph is rebuilt per example/minibatch and confined to one thread.
class Graph {
 public:
  struct Node {
    Op op;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;                   // allocated by backward()
    Param* param = nullptr;        // Op::Parameter only
    std::vector<std::size_t> idx;  // per-op index payload (targets, bounds, masks)
    std::vector<double> aux;       // per-op numeric payload (affine coeffs, dropout mask)
  };

  std::vector<Node> nodes;

  Var constant(Tensor t) { return push(Op::Constant, {}, std::move(t)); }

  // One node per Param per graph; repeated uses share it so gradient
  // contributions from multiple consumers sum on a single buffer.
  Var param(Param& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var{this, it->second};
    Var v = push(Op::Parameter, {}, p.value);
    nodes[v.id].param = &p;
    param_nodes_.emplace(&p, v.id);
    return v;
  }

  void backward(Var loss);

  // -- builders (free functions below forward here) --

  Var push(Op op, std::vector<std::size_t> inputs, Tensor value,
           std::vector<std::size_t> idx = {}, std::vector<double> aux = {}) {
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    n.idx = std::move(idx);
    n.aux = std::move(aux);
    nodes.push_back(std::move(n));
    return Var{this, nodes.size() - 1};
  }

 private:
  std::unordered_map<const Param*, std::size_t> param_nodes_;

  void backprop_node(std::size_t id);
};

inline const Tensor& Var::value() const { return g->nodes[id].value; }
inline const Tensor& Var::grad() const { return g->nodes[id].grad; }
inline double Var::item() const {
  const Tensor& v = value();
  if (v.size() != 1) throw ShapeError("item() on non-scalar " + v.shape_str());
  return v.data[0];
}

namespace detail {
inline Graph& same_graph(Var a, Var b) {
  if (a.g != b.g) throw ShapeError("operands belong to different graphs");
  return *a.g;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// forward builders
// ---------------------------------------------------------------------------

inline Var matmul(Var a, Var b) {
  Graph& g = detail::same_graph(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (ta.cols != tb.rows) {
    throw ShapeError("matmul inner dimensions disagree: " + ta.shape_str() + " * " +
                     tb.shape_str());
  }
  Tensor out(ta.rows, tb.cols);
  mm_accum(ta, tb, out);
  return g.push(Op::MatMul, {a.id, b.id}, std::move(out));
}

inline Var transpose(Var x) {
  const Tensor& t = x.value();
  Tensor out(t.cols, t.rows);
  for (std::size_t i = 0; i < t.rows; ++i)
    for (std::size_t j = 0; j < t.cols; ++j) out.at(j, i) = t.at(i, j);
  return x.g->push(Op::Transpose, {x.id}, std::move(out));
}

inline Var add(Var a, Var b) {
  Graph& g = detail::same_graph(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (!ta.same_shape(tb))
    throw ShapeError("add shapes disagree: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += tb.data[i];
  return g.push(Op::Add, {a.id, b.id}, std::move(out));
}

inline Var mul(Var a, Var b) {
  Graph& g = detail::same_graph(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (!ta.same_shape(tb))
    throw ShapeError("mul shapes disagree: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= tb.data[i];
  return g.push(Op::Mul, {a.id, b.id}, std::move(out));
}

// Elementwise a*x + b with scalar constants.
inline Var affine(Var x, double a, double b) {
  Tensor out = x.value();
  for (double& v : out.data) v = a * v + b;
  return x.g->push(Op::Affine, {x.id}, std::move(out), {}, {a, b});
}

// X[n x m] + row broadcast r[1 x m].
inline Var add_rowvec(Var x, Var r) {
  Graph& g = detail::same_graph(x, r);
  const Tensor& tx = x.value();
  const Tensor& tr = r.value();
  if (tr.rows != 1 || tr.cols != tx.cols) {
    throw ShapeError("add_rowvec expects [1x" + std::to_string(tx.cols) + "], got " +
                     tr.shape_str());
  }
  Tensor out = tx;
  for (std::size_t i = 0; i < tx.rows; ++i) {
    double* orow = out.row_ptr(i);
    for (std::size_t j = 0; j < tx.cols; ++j) orow[j] += tr.data[j];
  }
  return g.push(Op::AddRowVec, {x.id, r.id}, std::move(out));
}

inline Var apply_unary(UnaryKind kind, Var x) {
  Tensor out = x.value();
  Op op;
  switch (kind) {
    case UnaryKind::Tanh:
      op = Op::Tanh;
      for (double& v : out.data) v = std::tanh(v);
      break;
    case UnaryKind::Sigmoid:
      op = Op::Sigmoid;
      for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
      break;
    case UnaryKind::Exp:
      op = Op::Exp;
      for (double& v : out.data) v = std::exp(v);
      break;
    case UnaryKind::Log:
      op = Op::Log;
      for (double& v : out.data) {
        if (v <= 0.0) throw DomainError("log of non-positive value " + std::to_string(v));
        v = std::log(v);
      }
      break;
    default:
      throw ConfigError("unknown unary kind");
  }
  return x.g->push(op, {x.id}, std::move(out));
}

inline Var tanh(Var x) { return apply_unary(UnaryKind::Tanh, x); }
inline Var sigmoid(Var x) { return apply_unary(UnaryKind::Sigmoid, x); }
inline Var exp(Var x) { return apply_unary(UnaryKind::Exp, x); }
inline Var log(Var x) { return apply_unary(UnaryKind::Log, x); }

namespace detail {
inline void softmax_row_inplace(double* row, std::size_t n) {
  double mx = row[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = std::exp(row[j] - mx);
    sum += row[j];
  }
  for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
}
}  // namespace detail

// Row-wise softmax, stabilized by per-row max subtraction.
inline Var softmax_rows(Var x) {
  const Tensor& t = x.value();
  if (t.cols < 1) throw ShapeError("softmax_rows on empty rows");
  Tensor out = t;
  for (std::size_t i = 0; i < out.rows; ++i) detail::softmax_row_inplace(out.row_ptr(i), out.cols);
  return x.g->push(Op::SoftmaxRows, {x.id}, std::move(out));
}

// Softmax over the first valid_len entries of a single row; the padded tail
// gets exactly zero mass (equivalent to scoring it at -inf).
inline Var masked_softmax_row(Var x, std::size_t valid_len) {
  const Tensor& t = x.value();
  if (t.rows != 1) throw ShapeError("masked_softmax_row expects a row vector, got " + t.shape_str());
  if (valid_len == 0 || valid_len > t.cols)
    throw ShapeError("masked_softmax_row valid_len " + std::to_string(valid_len) + " out of " +
                     t.shape_str());
  Tensor out(1, t.cols);
  std::copy(t.data.begin(), t.data.begin() + static_cast<std::ptrdiff_t>(valid_len),
            out.data.begin());
  detail::softmax_row_inplace(out.data.data(), valid_len);
  return x.g->push(Op::MaskedSoftmaxRow, {x.id}, std::move(out), {valid_len});
}

// Columns appended in argument order; rows must agree.
inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat of zero parts");
  Graph& g = *parts[0].g;
  std::size_t rows = parts[0].value().rows;
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  for (Var p : parts) {
    detail::same_graph(parts[0], p);
    if (p.value().rows != rows)
      throw ShapeError("concat row mismatch: " + parts[0].value().shape_str() + " vs " +
                       p.value().shape_str());
    cols += p.value().cols;
    ids.push_back(p.id);
  }
  Tensor out(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& t = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      std::copy(t.row_ptr(i), t.row_ptr(i) + t.cols, out.row_ptr(i) + off);
    off += t.cols;
  }
  return g.push(Op::ConcatCols, std::move(ids), std::move(out));
}

inline Var concat(const std::vector<Var>& parts) { return concat_cols(parts); }

// Rows stacked in argument order; columns must agree.
inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows of zero parts");
  Graph& g = *parts[0].g;
  std::size_t cols = parts[0].value().cols;
  std::size_t rows = 0;
  std::vector<std::size_t> ids;
  for (Var p : parts) {
    detail::same_graph(parts[0], p);
    if (p.value().cols != cols)
      throw ShapeError("concat_rows column mismatch: " + parts[0].value().shape_str() + " vs " +
                       p.value().shape_str());
    rows += p.value().rows;
    ids.push_back(p.id);
  }
  Tensor out(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& t = p.value();
    std::copy(t.data.begin(), t.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += t.size();
  }
  return g.push(Op::ConcatRows, std::move(ids), std::move(out));
}

// Rows [r0, r1) as a view-copy.
inline Var slice_rows(Var x, std::size_t r0, std::size_t r1) {
  const Tensor& t = x.value();
  if (r0 >= r1 || r1 > t.rows)
    throw IndexError("slice_rows [" + std::to_string(r0) + "," + std::to_string(r1) + ") of " +
                     t.shape_str());
  Tensor out(r1 - r0, t.cols);
  std::copy(t.row_ptr(r0), t.row_ptr(r0) + out.size(), out.data.begin());
  return x.g->push(Op::SliceRows, {x.id}, std::move(out), {r0, r1});
}

inline Var pick_row(Var x, std::size_t r) { return slice_rows(x, r, r + 1); }

// Inverted dropout: in Train mode each element is zeroed with probability
// `rate` and survivors are scaled by 1/(1-rate), so the expectation matches
// the input. Eval mode (and rate 0) returns the input node unchanged.
inline Var dropout(Var x, double rate, DropoutMode mode, RngStream& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0,1)");
  if (mode == DropoutMode::Eval || rate == 0.0) return x;
  const Tensor& t = x.value();
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(t.size());
  for (double& m : mask) m = rng.uniform01() < rate ? 0.0 : keep_scale;
  Tensor out = t;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= mask[i];
  return x.g->push(Op::Dropout, {x.id}, std::move(out), {}, std::move(mask));
}

// Row `index` of an embedding table; the gradient flows only into that row.
inline Var lookup(Var table, std::size_t index) {
  const Tensor& t = table.value();
  if (index >= t.rows)
    throw IndexError("lookup index " + std::to_string(index) + " out of table " + t.shape_str());
  Tensor out(1, t.cols);
  std::copy(t.row_ptr(index), t.row_ptr(index) + t.cols, out.data.begin());
  return table.g->push(Op::Lookup, {table.id}, std::move(out), {index});
}

// -log(p[target] + kLogEps) for a probability row p.
inline Var nll_of_prob(Var p, std::size_t target) {
  const Tensor& t = p.value();
  if (t.rows != 1) throw ShapeError("nll_of_prob expects a probability row, got " + t.shape_str());
  if (target >= t.cols)
    throw IndexError("nll target " + std::to_string(target) + " out of row of length " +
                     std::to_string(t.cols));
  double sum = 0.0;
  for (double v : t.data) sum += v;
  if (std::fabs(sum - 1.0) > 1e-6)
    throw DomainError("nll_of_prob input sums to " + std::to_string(sum) + ", not 1");
  Tensor out = Tensor::scalar(-std::log(t.data[target] + kLogEps));
  return p.g->push(Op::NllOfProb, {p.id}, std::move(out), {target});
}

inline Var sum_all(Var x) {
  double s = 0.0;
  for (double v : x.value().data) s += v;
  return x.g->push(Op::SumAll, {x.id}, Tensor::scalar(s));
}

// Maximum entry; gradient routes to the first argmax.
inline Var max_all(Var x) {
  const Tensor& t = x.value();
  if (t.size() == 0) throw ShapeError("max_all of empty tensor");
  std::size_t arg = 0;
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t.data[i] > t.data[arg]) arg = i;
  return x.g->push(Op::MaxAll, {x.id}, Tensor::scalar(t.data[arg]), {arg});
}

// s * x with s a [1x1] graph scalar.
inline Var scale_by(Var s, Var x) {
  Graph& g = detail::same_graph(s, x);
  if (s.value().size() != 1) throw ShapeError("scale_by scalar must be [1x1], got " + s.value().shape_str());
  const double sv = s.value().data[0];
  Tensor out = x.value();
  for (double& v : out.data) v *= sv;
  return g.push(Op::ScaleByScalar, {s.id, x.id}, std::move(out));
}

// Sum of x[positions] (duplicates allowed; each occurrence receives gradient).
inline Var select_sum(Var x, const std::vector<std::size_t>& positions) {
  const Tensor& t = x.value();
  if (t.rows != 1) throw ShapeError("select_sum expects a row vector, got " + t.shape_str());
  double s = 0.0;
  for (std::size_t p : positions) {
    if (p >= t.cols)
      throw IndexError("select_sum position " + std::to_string(p) + " out of row of length " +
                       std::to_string(t.cols));
    s += t.data[p];
  }
  return x.g->push(Op::SelectSum, {x.id}, Tensor::scalar(s), positions);
}

inline Var mean_all(Var x) {
  return affine(sum_all(x), 1.0 / static_cast<double>(x.value().size()), 0.0);
}

// Shannon entropy in nats of a probability row: -sum p log(p + kLogEps).
inline Var entropy_nats(Var p) {
  Var lg = log(affine(p, 1.0, kLogEps));
  return affine(sum_all(mul(p, lg)), -1.0, 0.0);
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

inline void Graph::backprop_node(std::size_t id) {
  Node& n = nodes[id];
  const Tensor& G = n.grad;
  switch (n.op) {
    case Op::Constant:
    case Op::Parameter:
      break;
    case Op::MatMul: {
      Node& a = nodes[n.inputs[0]];
      Node& b = nodes[n.inputs[1]];
      mm_nt_accum(G, b.value, a.grad);
      mm_tn_accum(a.value, G, b.grad);
      break;
    }
    case Op::Transpose: {
      Node& a = nodes[n.inputs[0]];
      for (std::size_t i = 0; i < G.rows; ++i)
        for (std::size_t j = 0; j < G.cols; ++j) a.grad.at(j, i) += G.at(i, j);
      break;
    }
    case Op::Add: {
      for (int k = 0; k < 2; ++k) {
        Tensor& ig = nodes[n.inputs[k]].grad;
        for (std::size_t i = 0; i < G.size(); ++i) ig.data[i] += G.data[i];
      }
      break;
    }
    case Op::Mul: {
      Node& a = nodes[n.inputs[0]];
      Node& b = nodes[n.inputs[1]];
      for (std::size_t i = 0; i < G.size(); ++i) {
        a.grad.data[i] += G.data[i] * b.value.data[i];
        b.grad.data[i] += G.data[i] * a.value.data[i];
      }
      break;
    }
    case Op::Affine: {
      Tensor& ig = nodes[n.inputs[0]].grad;
      const double a = n.aux[0];
      for (std::size_t i = 0; i < G.size(); ++i) ig.data[i] += a * G.data[i];
      break;
    }
    case Op::AddRowVec: {
      Tensor& gx = nodes[n.inputs[0]].grad;
      Tensor& gr = nodes[n.inputs[1]].grad;
      for (std::size_t i = 0; i < G.size(); ++i) gx.data[i] += G.data[i];
      for (std::size_t i = 0; i < G.rows; ++i) {
        const double* grow = G.row_ptr(i);
        for (std::size_t j = 0; j < G.cols; ++j) gr.data[j] += grow[j];
      }
      break;
    }
    case Op::Tanh: {
      Tensor& ig = nodes[n.inputs[0]].grad;
      for (std::size_t i = 0; i < G.size(); ++i) {
        const double y = n.value.data[i];
        ig.data[i] += G.data[i] * (1.0 - y * y);
      }
      break;
    }
    case Op::Sigmoid: {
      Tensor& ig = nodes[n.inputs[0]].grad;
      for (std::size_t i = 0; i < G.size(); ++i) {
        const double y = n.value.data[i];
        ig.data[i] += G.data[i] * y * (1.0 - y);
      }
      break;
    }
    case Op::Exp: {
      Tensor& ig = nodes[n.inputs[0]].grad;
      for (std::size_t i = 0; i < G.size(); ++i) ig.data[i] += G.data[i] * n.value.data[i];
      break;
    }
    case Op::Log: {
      Node& a = nodes[n.inputs[0]];
      for (std::size_t i = 0; i < G.size(); ++i) a.grad.data[i] += G.data[i] / a.value.data[i];
      break;
    }
    case Op::SoftmaxRows: {
      Tensor& ig = nodes[n.inputs[0]].grad;
      for (std::size_t i = 0; i < G.rows; ++i) {
        const double* y = n.value.row_ptr(i);
        const double* grow = G.row_ptr(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < G.cols; ++j) dot += grow[j] * y[j];
        double* igrow = ig.row_ptr(i);
        for (std::size_t j = 0; j < G.cols; ++j) igrow[j] += y[j] * (grow[j] - dot);
      }
      break;
    }
    case Op::MaskedSoftmaxRow: {
      Tensor& ig = nodes[n.inputs[0]].grad;
      const std::size_t len = n.idx[0];
      const double* y = n.value.data.data();
      const double* grow = G.data.data();
      double dot = 0.0;
      for (std::size_t j = 0; j < len; ++j) dot += grow[j] * y[j];
      for (std::size_t j = 0; j < len; ++j) ig.data[j] += y[j] * (grow[j] - dot);
      break;
    }
    case Op::ConcatCols: {
      std::size_t off = 0;
      for (std::size_t inp : n.inputs) {
        Node& a = nodes[inp];
        for (std::size_t i = 0; i < a.value.rows; ++i) {
          const double* grow = G.row_ptr(i) + off;
          double* arow = a.grad.row_ptr(i);
          for (std::size_t j = 0; j < a.value.cols; ++j) arow[j] += grow[j];
        }
        off += a.value.cols;
      }
      break;
    }
    case Op::ConcatRows: {
      std::size_t off = 0;
      for (std::size_t inp : n.inputs) {
        Node& a = nodes[inp];
        for (std::size_t i = 0; i < a.value.size(); ++i) a.grad.data[i] += G.data[off + i];
        off += a.value.size();
      }
      break;
    }
    case Op::SliceRows: {
      Node& a = nodes[n.inputs[0]];
      const std::size_t r0 = n.idx[0];
      double* base = a.grad.row_ptr(r0);
      for (std::size_t i = 0; i < G.size(); ++i) base[i] += G.data[i];
      break;
    }
    case Op::Dropout: {
      Tensor& ig = nodes[n.inputs[0]].grad;
      for (std::size_t i = 0; i < G.size(); ++i) ig.data[i] += G.data[i] * n.aux[i];
      break;
    }
    case Op::Lookup: {
      Node& a = nodes[n.inputs[0]];
      double* row = a.grad.row_ptr(n.idx[0]);
      for (std::size_t j = 0; j < G.cols; ++j) row[j] += G.data[j];
      break;
    }
    case Op::NllOfProb: {
      Node& a = nodes[n.inputs[0]];
      const std::size_t t = n.idx[0];
      a.grad.data[t] += G.data[0] * (-1.0 / (a.value.data[t] + kLogEps));
      break;
    }
    case Op::SumAll: {
      Tensor& ig = nodes[n.inputs[0]].grad;
      for (double& v : ig.data) v += G.data[0];
      break;
    }
    case Op::MaxAll: {
      nodes[n.inputs[0]].grad.data[n.idx[0]] += G.data[0];
      break;
    }
    case Op::ScaleByScalar: {
      Node& s = nodes[n.inputs[0]];
      Node& x = nodes[n.inputs[1]];
      const double sv = s.value.data[0];
      double acc = 0.0;
      for (std::size_t i = 0; i < G.size(); ++i) {
        acc += G.data[i] * x.value.data[i];
        x.grad.data[i] += sv * G.data[i];
      }
      s.grad.data[0] += acc;
      break;
    }
    case Op::SelectSum: {
      Tensor& ig = nodes[n.inputs[0]].grad;
      for (std::size_t p : n.idx) ig.data[p] += G.data[0];
      break;
    }
  }
}

// Reverse topological sweep from a scalar loss. Seeds gradient 1 at the loss,
// propagates through every node at or below it, then flushes Parameter node
// gradients into their Param buffers (accumulating).
inline void Graph::backward(Var loss) {
  if (loss.g != this) throw ShapeError("loss belongs to a different graph");
  Node& ln = nodes[loss.id];
  if (ln.value.rows != 1 || ln.value.cols != 1)
    throw ShapeError("backward requires a scalar loss, got " + ln.value.shape_str());
  for (Node& n : nodes) n.grad = Tensor(n.value.rows, n.value.cols);
  nodes[loss.id].grad.data[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) backprop_node(id);
  for (const auto& [p, nid] : param_nodes_) {
    Param* param = const_cast<Param*>(p);
    const Tensor& g = nodes[nid].grad;
    for (std::size_t i = 0; i < g.size(); ++i) param->grad.data[i] += g.data[i];
  }
}

}  // namespace qg
