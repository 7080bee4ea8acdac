// SPDX-License-Identifier: Apache-2.0

#include "graphpoison/tape.hpp"

#include <algorithm>
#include <cmath>

namespace graphpoison {

namespace {

struct OpInfo {
  const char* name;
  int arity;
};

OpInfo op_info(Op op) {
  switch (op) {
    case Op::Leaf: return {"leaf", 0};
    case Op::Constant: return {"constant", 0};
    case Op::MatMul: return {"matmul", 2};
    case Op::MatMulTN: return {"matmul_tn", 2};
    case Op::MatMulNT: return {"matmul_nt", 2};
    case Op::Add: return {"add", 2};
    case Op::Sub: return {"sub", 2};
    case Op::Mul: return {"mul", 2};
    case Op::MaskMul: return {"mask_mul", 2};
    case Op::Scale: return {"scale", 1};
    case Op::Smul: return {"smul", 2};
    case Op::RowSoftmax: return {"row_softmax", 1};
    case Op::Log: return {"log", 1};
    case Op::Exp: return {"exp", 1};
    case Op::Relu: return {"relu", 1};
    case Op::GtZeroMask: return {"gtzero_mask", 1};
    case Op::Reciprocal: return {"reciprocal", 1};
    case Op::Rsqrt: return {"rsqrt", 1};
    case Op::RowSum: return {"row_sum", 1};
    case Op::ColSum: return {"col_sum", 1};
    case Op::SumAll: return {"sum_all", 1};
    case Op::Transpose: return {"transpose", 1};
    case Op::Diag: return {"diag", 1};
    case Op::DiagPart: return {"diag_part", 1};
    case Op::GatherRows: return {"gather_rows", 1};
    case Op::ScatterRows: return {"scatter_rows", 1};
    case Op::SelectCols: return {"select_cols", 1};
    case Op::ScatterCols: return {"scatter_cols", 1};
  }
  throw std::invalid_argument("unsupported op-kind");
}

// Forward dispatch shared by recording and scratch (backward_values) paths.
Tensor eval_op(Op op, std::span<const Tensor* const> a, double scalar,
               const IndexVec& idx, int extent) {
  namespace k = kernels;
  switch (op) {
    case Op::MatMul: return k::matmul(*a[0], *a[1]);
    case Op::MatMulTN: return k::matmul_tn(*a[0], *a[1]);
    case Op::MatMulNT: return k::matmul_nt(*a[0], *a[1]);
    case Op::Add: return k::add(*a[0], *a[1]);
    case Op::Sub: return k::sub(*a[0], *a[1]);
    case Op::Mul: return k::mul(*a[0], *a[1]);
    case Op::MaskMul: return k::mul(*a[0], *a[1]);
    case Op::Scale: return k::scale(*a[0], scalar);
    case Op::Smul: return k::smul(*a[0], *a[1]);
    case Op::RowSoftmax: return k::row_softmax(*a[0]);
    case Op::Log: return k::log_elem(*a[0]);
    case Op::Exp: return k::exp_elem(*a[0]);
    case Op::Relu: return k::relu(*a[0]);
    case Op::GtZeroMask: return k::gtzero_mask(*a[0]);
    case Op::Reciprocal: return k::reciprocal(*a[0]);
    case Op::Rsqrt: return k::rsqrt(*a[0]);
    case Op::RowSum: return k::row_sum(*a[0]);
    case Op::ColSum: return k::col_sum(*a[0]);
    case Op::SumAll: return k::sum_all(*a[0]);
    case Op::Transpose: return k::transpose(*a[0]);
    case Op::Diag: return k::diag(*a[0]);
    case Op::DiagPart: return k::diag_part(*a[0]);
    case Op::GatherRows: return k::gather_rows(*a[0], *idx);
    case Op::ScatterRows: return k::scatter_rows(*a[0], *idx, extent);
    case Op::SelectCols: return k::select_cols(*a[0], *idx);
    case Op::ScatterCols: return k::scatter_cols(*a[0], *idx, extent);
    case Op::Leaf:
    case Op::Constant:
      throw std::invalid_argument("record: leaf/constant carry a value, not parents");
  }
  throw std::invalid_argument("unsupported op-kind");
}

// A value inside a backward sweep: a node id when the sweep records onto the
// tape, a scratch tensor when it only evaluates.
struct BVal {
  NodeId id = kNoNode;
  TensorPtr t;
  bool valid() const { return id != kNoNode || t != nullptr; }
};

class Emitter {
 public:
  virtual ~Emitter() = default;
  virtual BVal emit(Op op, std::span<const BVal> args, double scalar,
                    IndexVec idx, int extent) = 0;
  virtual BVal wrap(NodeId existing) = 0;
  virtual BVal constant(Tensor t) = 0;
  virtual const Tensor& val(const BVal& v) const = 0;

  BVal emit1(Op op, BVal a, double scalar = 0.0, IndexVec idx = nullptr, int extent = 0) {
    const BVal args[1] = {std::move(a)};
    return emit(op, args, scalar, std::move(idx), extent);
  }
  BVal emit2(Op op, BVal a, BVal b) {
    const BVal args[2] = {std::move(a), std::move(b)};
    return emit(op, args, 0.0, nullptr, 0);
  }
  BVal matmul(BVal a, BVal b) { return emit2(Op::MatMul, std::move(a), std::move(b)); }
  BVal matmul_tn(BVal a, BVal b) { return emit2(Op::MatMulTN, std::move(a), std::move(b)); }
  BVal matmul_nt(BVal a, BVal b) { return emit2(Op::MatMulNT, std::move(a), std::move(b)); }
  BVal add(BVal a, BVal b) { return emit2(Op::Add, std::move(a), std::move(b)); }
  BVal sub(BVal a, BVal b) { return emit2(Op::Sub, std::move(a), std::move(b)); }
  BVal mul(BVal a, BVal b) { return emit2(Op::Mul, std::move(a), std::move(b)); }
  BVal mask_mul(BVal a, BVal m) { return emit2(Op::MaskMul, std::move(a), std::move(m)); }
  BVal scale(BVal a, double f) { return emit1(Op::Scale, std::move(a), f); }
  BVal smul(BVal a, BVal s) { return emit2(Op::Smul, std::move(a), std::move(s)); }
  BVal row_sum(BVal a) { return emit1(Op::RowSum, std::move(a)); }
  BVal sum_all(BVal a) { return emit1(Op::SumAll, std::move(a)); }
  BVal transpose(BVal a) { return emit1(Op::Transpose, std::move(a)); }
  BVal reciprocal(BVal a) { return emit1(Op::Reciprocal, std::move(a)); }
  BVal gtzero_mask(BVal a) { return emit1(Op::GtZeroMask, std::move(a)); }
  BVal diag(BVal a) { return emit1(Op::Diag, std::move(a)); }
  BVal diag_part(BVal a) { return emit1(Op::DiagPart, std::move(a)); }
};

class RecordEmitter : public Emitter {
 public:
  explicit RecordEmitter(Tape& tape) : tape_(tape) {}

  BVal emit(Op op, std::span<const BVal> args, double scalar, IndexVec idx,
            int extent) override {
    std::vector<NodeId> parents(args.size());
    for (std::size_t i = 0; i < args.size(); ++i) parents[i] = args[i].id;
    return BVal{tape_.record(op, parents, scalar, std::move(idx), extent), nullptr};
  }
  BVal wrap(NodeId existing) override { return BVal{existing, nullptr}; }
  BVal constant(Tensor t) override { return BVal{tape_.constant(std::move(t)), nullptr}; }
  const Tensor& val(const BVal& v) const override { return tape_.value(v.id); }

 private:
  Tape& tape_;
};

class EvalEmitter : public Emitter {
 public:
  explicit EvalEmitter(const Tape& tape) : tape_(tape) {}

  BVal emit(Op op, std::span<const BVal> args, double scalar, IndexVec idx,
            int extent) override {
    std::vector<const Tensor*> vals(args.size());
    for (std::size_t i = 0; i < args.size(); ++i) vals[i] = &val(args[i]);
    return BVal{kNoNode, make_tensor(eval_op(op, vals, scalar, idx, extent))};
  }
  BVal wrap(NodeId existing) override { return BVal{kNoNode, tape_.value_ptr(existing)}; }
  BVal constant(Tensor t) override { return BVal{kNoNode, make_tensor(std::move(t))}; }
  const Tensor& val(const BVal& v) const override {
    return v.t ? *v.t : tape_.value(v.id);
  }

 private:
  const Tape& tape_;
};

// Per-op adjoint propagation. `self` wraps the node's own output, `pa`/`pb`
// its parents, `adj` the incoming adjoint. Emits contributions only for the
// sides flagged as needed.
void op_vjp(const Node& nd, const BVal& self, const BVal& pa, const BVal& pb,
            const BVal& adj, bool need0, bool need1, Emitter& em,
            std::array<BVal, 2>& out) {
  switch (nd.op) {
    case Op::MatMul:
      // y = a.b : da = g.b^T, db = a^T.g
      if (need0) out[0] = em.matmul_nt(adj, pb);
      if (need1) out[1] = em.matmul_tn(pa, adj);
      return;
    case Op::MatMulTN:
      // y = a^T.b : da = b.g^T, db = a.g
      if (need0) out[0] = em.matmul_nt(pb, adj);
      if (need1) out[1] = em.matmul(pa, adj);
      return;
    case Op::MatMulNT:
      // y = a.b^T : da = g.b, db = g^T.a
      if (need0) out[0] = em.matmul(adj, pb);
      if (need1) out[1] = em.matmul_tn(adj, pa);
      return;
    case Op::Add:
      if (need0) out[0] = adj;
      if (need1) out[1] = adj;
      return;
    case Op::Sub:
      if (need0) out[0] = adj;
      if (need1) out[1] = em.scale(adj, -1.0);
      return;
    case Op::Mul:
      if (need0) out[0] = em.mul(adj, pb);
      if (need1) out[1] = em.mul(adj, pa);
      return;
    case Op::MaskMul:
      // the mask operand never receives gradient
      if (need0) out[0] = em.mask_mul(adj, pb);
      return;
    case Op::Scale:
      if (need0) out[0] = em.scale(adj, nd.scalar);
      return;
    case Op::Smul:
      // y = s*a : da = s*g, ds = sum(g*a)
      if (need0) out[0] = em.smul(adj, pb);
      if (need1) out[1] = em.sum_all(em.mul(adj, pa));
      return;
    case Op::RowSoftmax: {
      // da = y * (g - rowsum(g*y) . 1^T)
      if (!need0) return;
      const int k = em.val(self).cols();
      BVal srow = em.row_sum(em.mul(adj, self));
      BVal bcast = em.matmul(srow, em.constant(Tensor::full(1, k, 1.0)));
      out[0] = em.mul(self, em.sub(adj, bcast));
      return;
    }
    case Op::Log:
      if (need0) out[0] = em.mul(adj, em.reciprocal(pa));
      return;
    case Op::Exp:
      if (need0) out[0] = em.mul(adj, self);
      return;
    case Op::Relu:
      if (need0) out[0] = em.mul(adj, em.gtzero_mask(pa));
      return;
    case Op::Reciprocal:
      // y = 1/a : da = -g*y^2
      if (need0) out[0] = em.scale(em.mul(adj, em.mul(self, self)), -1.0);
      return;
    case Op::Rsqrt:
      // y = a^{-1/2} : da = -g*y^3/2
      if (need0) out[0] = em.scale(em.mul(adj, em.mul(self, em.mul(self, self))), -0.5);
      return;
    case Op::RowSum:
      if (need0) {
        const int k = em.val(pa).cols();
        out[0] = em.matmul(adj, em.constant(Tensor::full(1, k, 1.0)));
      }
      return;
    case Op::ColSum:
      if (need0) {
        const int n = em.val(pa).rows();
        out[0] = em.matmul(em.constant(Tensor::full(n, 1, 1.0)), adj);
      }
      return;
    case Op::SumAll:
      if (need0) {
        const Tensor& p = em.val(pa);
        out[0] = em.smul(em.constant(Tensor::full(p.rows(), p.cols(), 1.0)), adj);
      }
      return;
    case Op::Transpose:
      if (need0) out[0] = em.transpose(adj);
      return;
    case Op::Diag:
      if (need0) out[0] = em.diag_part(adj);
      return;
    case Op::DiagPart:
      if (need0) out[0] = em.diag(adj);
      return;
    case Op::GatherRows:
      if (need0)
        out[0] = em.emit1(Op::ScatterRows, adj, 0.0, nd.indices, em.val(pa).rows());
      return;
    case Op::ScatterRows:
      if (need0) out[0] = em.emit1(Op::GatherRows, adj, 0.0, nd.indices, 0);
      return;
    case Op::SelectCols:
      if (need0)
        out[0] = em.emit1(Op::ScatterCols, adj, 0.0, nd.indices, em.val(pa).cols());
      return;
    case Op::ScatterCols:
      if (need0) out[0] = em.emit1(Op::SelectCols, adj, 0.0, nd.indices, 0);
      return;
    case Op::GtZeroMask:  // derivative is zero almost everywhere
    case Op::Leaf:
    case Op::Constant:
      return;
  }
}

// Reverse sweep shared by both backward flavors. Adjoints are propagated only
// along nodes from which some wrt target is reachable, so e.g. a sweep w.r.t.
// parameters does not build the (expensive) adjacency-side adjoints.
std::unordered_map<NodeId, BVal> sweep(Tape& tape, NodeId loss,
                                       std::span<const NodeId> wrt, Emitter& em) {
  const auto pre = static_cast<NodeId>(tape.size());
  if (loss < 0 || loss >= pre) throw std::invalid_argument("backward: invalid loss node");
  if (!tape.value(loss).is_scalar())
    throw std::invalid_argument("backward: loss must be a 1x1 scalar");

  std::vector<char> is_wrt(pre, 0);
  for (NodeId w : wrt) {
    if (w < 0 || w >= pre) throw std::invalid_argument("backward: invalid wrt node");
    is_wrt[w] = 1;
  }

  // reach[n]: some wrt node is in n's ancestor cone (including n itself).
  std::vector<char> reach(pre, 0);
  for (NodeId n = 0; n < pre; ++n) {
    if (is_wrt[n]) {
      reach[n] = 1;
      continue;
    }
    const Node& nd = tape.node(n);
    for (int i = 0; i < nd.arity; ++i)
      if (reach[nd.parent[i]]) {
        reach[n] = 1;
        break;
      }
  }

  std::vector<BVal> adj(pre);
  adj[loss] = em.constant(Tensor::scalar(1.0));

  std::unordered_map<NodeId, BVal> result;
  for (NodeId n = loss; n >= 0; --n) {
    if (!adj[n].valid()) continue;
    if (is_wrt[n]) result.emplace(n, adj[n]);
    const Node nd = tape.node(n);  // copy: emissions may reallocate node storage
    if (nd.arity > 0) {
      const bool need0 = reach[nd.parent[0]];
      const bool need1 = nd.arity > 1 && reach[nd.parent[1]];
      if (need0 || need1) {
        BVal self = em.wrap(n);
        BVal pa = em.wrap(nd.parent[0]);
        BVal pb = nd.arity > 1 ? em.wrap(nd.parent[1]) : BVal{};
        std::array<BVal, 2> contrib;
        op_vjp(nd, self, pa, pb, adj[n], need0, need1, em, contrib);
        for (int i = 0; i < nd.arity; ++i) {
          if (!contrib[i].valid()) continue;
          NodeId p = nd.parent[i];
          adj[p] = adj[p].valid() ? em.add(adj[p], contrib[i]) : contrib[i];
        }
      }
    }
    if (!is_wrt[n]) adj[n] = BVal{};  // free scratch adjoints eagerly
  }
  return result;
}

}  // namespace

const char* op_name(Op op) { return op_info(op).name; }

NodeId Tape::push(Node n) {
  if (nodes_.size() >= static_cast<std::size_t>(std::numeric_limits<NodeId>::max()))
    throw std::runtime_error("Tape: node limit exceeded");
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Tensor v) { return leaf(make_tensor(std::move(v))); }

NodeId Tape::leaf(TensorPtr v) {
  if (!v || !v->all_finite()) throw std::invalid_argument("leaf: non-finite value");
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(v);
  return push(std::move(n));
}

NodeId Tape::constant(Tensor v) { return constant(make_tensor(std::move(v))); }

NodeId Tape::constant(TensorPtr v) {
  if (!v || !v->all_finite()) throw std::invalid_argument("constant: non-finite value");
  Node n;
  n.op = Op::Constant;
  n.value = std::move(v);
  return push(std::move(n));
}

NodeId Tape::record(Op op, std::span<const NodeId> parents, double scalar,
                    IndexVec indices, int extent) {
  const OpInfo info = op_info(op);
  if (static_cast<int>(parents.size()) != info.arity)
    throw std::invalid_argument(std::string("record: ") + info.name + " expects " +
                                std::to_string(info.arity) + " parents");
  std::array<const Tensor*, 2> vals{nullptr, nullptr};
  Node n;
  n.op = op;
  n.arity = static_cast<std::uint8_t>(info.arity);
  n.scalar = scalar;
  n.indices = indices;
  n.extent = extent;
  for (int i = 0; i < info.arity; ++i) {
    n.parent[i] = check(parents[i]);
    vals[i] = nodes_[parents[i]].value.get();
  }
  n.value = make_tensor(
      eval_op(op, std::span<const Tensor* const>(vals.data(), info.arity), scalar,
              indices, extent));
  return push(std::move(n));
}

NodeId Tape::gather_rows(NodeId a, IndexVec idx) {
  const NodeId p[1] = {a};
  return record(Op::GatherRows, p, 0.0, std::move(idx));
}

NodeId Tape::scatter_rows(NodeId a, IndexVec idx, int target_rows) {
  const NodeId p[1] = {a};
  return record(Op::ScatterRows, p, 0.0, std::move(idx), target_rows);
}

NodeId Tape::select_cols(NodeId a, IndexVec idx) {
  const NodeId p[1] = {a};
  return record(Op::SelectCols, p, 0.0, std::move(idx));
}

NodeId Tape::scatter_cols(NodeId a, IndexVec idx, int target_cols) {
  const NodeId p[1] = {a};
  return record(Op::ScatterCols, p, 0.0, std::move(idx), target_cols);
}

NodeId Tape::cross_entropy(NodeId probs, IndexVec labels) {
  const Tensor& p = value(probs);
  if (!labels || static_cast<int>(labels->size()) != p.rows())
    throw std::invalid_argument("cross_entropy: one label per row required");
  const NodeId picked = select_cols(probs, std::move(labels));
  return scale(sum_all(log(picked)), -1.0 / p.rows());
}

void Tape::truncate(std::size_t mark) {
  if (mark > nodes_.size()) throw std::invalid_argument("truncate: mark beyond end");
  nodes_.resize(mark);
}

std::unordered_map<NodeId, NodeId> Tape::backward_nodes(NodeId loss,
                                                        std::span<const NodeId> wrt) {
  RecordEmitter em(*this);
  auto raw = sweep(*this, loss, wrt, em);
  std::unordered_map<NodeId, NodeId> out;
  for (NodeId w : wrt) {
    auto it = raw.find(w);
    if (it != raw.end() && it->second.valid())
      out[w] = it->second.id;
    else
      out[w] = constant(Tensor::zeros(value(w).rows(), value(w).cols()));
  }
  return out;
}

std::unordered_map<NodeId, Tensor> Tape::backward_values(NodeId loss,
                                                         std::span<const NodeId> wrt) {
  EvalEmitter em(*this);
  auto raw = sweep(*this, loss, wrt, em);
  std::unordered_map<NodeId, Tensor> out;
  for (NodeId w : wrt) {
    auto it = raw.find(w);
    if (it != raw.end() && it->second.valid())
      out.emplace(w, em.val(it->second));
    else
      out.emplace(w, Tensor::zeros(value(w).rows(), value(w).cols()));
  }
  return out;
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& at, double step) {
  if (step <= 0.0) throw std::invalid_argument("finite_difference_gradient: step > 0");
  Tensor grad(at.rows(), at.cols());
  Tensor x = at;
  for (int i = 0; i < at.rows(); ++i) {
    for (int j = 0; j < at.cols(); ++j) {
      const double orig = x(i, j);
      x(i, j) = orig + step;
      const double up = f(x);
      x(i, j) = orig - step;
      const double down = f(x);
      x(i, j) = orig;
      grad(i, j) = (up - down) / (2.0 * step);
    }
  }
  return grad;
}

}  // namespace graphpoison
