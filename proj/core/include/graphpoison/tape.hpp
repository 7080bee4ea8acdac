// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation on a linear tape of dense-tensor ops.
//
// The backward pass comes in two flavors:
//   backward_nodes  — emits every adjoint computation as new ops on the same
//                     tape, so each returned gradient is itself a
//                     differentiable node. Differentiating a loss that
//                     contains such gradients (an unrolled training run) is
//                     just a second backward pass.
//   backward_values — identical arithmetic, but adjoints live in scratch
//                     tensors that are freed as soon as they are consumed;
//                     nothing is appended to the tape.
// Both flavors route every operation through the same kernels in the same
// order, so their results are bit-identical.

#pragma once

#include "graphpoison/tensor.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

namespace graphpoison {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

enum class Op : std::uint8_t {
  Leaf,
  Constant,
  MatMul,
  MatMulTN,  // a^T . b
  MatMulNT,  // a . b^T
  Add,
  Sub,
  Mul,
  MaskMul,  // elementwise multiply; no gradient to the mask operand
  Scale,    // multiply by a compile-time scalar
  Smul,     // multiply by a 1x1 node, broadcast
  RowSoftmax,
  Log,
  Exp,
  Relu,
  GtZeroMask,
  Reciprocal,
  Rsqrt,
  RowSum,
  ColSum,
  SumAll,
  Transpose,
  Diag,
  DiagPart,
  GatherRows,
  ScatterRows,
  SelectCols,
  ScatterCols,
};

const char* op_name(Op op);

using IndexVec = std::shared_ptr<const std::vector<int>>;

inline IndexVec make_indices(std::vector<int> v) {
  return std::make_shared<const std::vector<int>>(std::move(v));
}

struct Node {
  Op op = Op::Leaf;
  std::array<NodeId, 2> parent{kNoNode, kNoNode};
  std::uint8_t arity = 0;
  double scalar = 0.0;  // Scale factor
  IndexVec indices;     // GatherRows / ScatterRows / SelectCols / ScatterCols
  int extent = 0;       // scatter target size
  TensorPtr value;
};

class Tape {
 public:
  // --- recording ------------------------------------------------------

  NodeId leaf(Tensor v);
  NodeId leaf(TensorPtr v);
  NodeId constant(Tensor v);
  NodeId constant(TensorPtr v);

  // Generic entry point; validates op/parent shapes and computes the forward
  // value. The named wrappers below are thin conveniences over it.
  NodeId record(Op op, std::span<const NodeId> parents, double scalar = 0.0,
                IndexVec indices = nullptr, int extent = 0);

  NodeId matmul(NodeId a, NodeId b) { return record2(Op::MatMul, a, b); }
  NodeId matmul_tn(NodeId a, NodeId b) { return record2(Op::MatMulTN, a, b); }
  NodeId matmul_nt(NodeId a, NodeId b) { return record2(Op::MatMulNT, a, b); }
  NodeId add(NodeId a, NodeId b) { return record2(Op::Add, a, b); }
  NodeId sub(NodeId a, NodeId b) { return record2(Op::Sub, a, b); }
  NodeId mul(NodeId a, NodeId b) { return record2(Op::Mul, a, b); }
  NodeId mask_mul(NodeId a, NodeId mask) { return record2(Op::MaskMul, a, mask); }
  NodeId scale(NodeId a, double f) { return record1(Op::Scale, a, f); }
  NodeId smul(NodeId a, NodeId s) { return record2(Op::Smul, a, s); }
  NodeId row_softmax(NodeId a) { return record1(Op::RowSoftmax, a); }
  NodeId log(NodeId a) { return record1(Op::Log, a); }
  NodeId exp(NodeId a) { return record1(Op::Exp, a); }
  NodeId relu(NodeId a) { return record1(Op::Relu, a); }
  NodeId reciprocal(NodeId a) { return record1(Op::Reciprocal, a); }
  NodeId rsqrt(NodeId a) { return record1(Op::Rsqrt, a); }
  NodeId row_sum(NodeId a) { return record1(Op::RowSum, a); }
  NodeId col_sum(NodeId a) { return record1(Op::ColSum, a); }
  NodeId sum_all(NodeId a) { return record1(Op::SumAll, a); }
  NodeId transpose(NodeId a) { return record1(Op::Transpose, a); }
  NodeId diag(NodeId v) { return record1(Op::Diag, v); }
  NodeId diag_part(NodeId m) { return record1(Op::DiagPart, m); }
  NodeId gather_rows(NodeId a, IndexVec idx);
  NodeId scatter_rows(NodeId a, IndexVec idx, int target_rows);
  NodeId select_cols(NodeId a, IndexVec idx);
  NodeId scatter_cols(NodeId a, IndexVec idx, int target_cols);

  // Mean cross-entropy of row-stochastic probabilities against integer
  // labels: -(1/M) sum_i log p[i, y_i]. Recorded as a composition of
  // primitive ops so any-order differentiation works unchanged.
  NodeId cross_entropy(NodeId probs, IndexVec labels);

  // --- inspection / lifecycle -----------------------------------------

  const Tensor& value(NodeId id) const { return *nodes_[check(id)].value; }
  TensorPtr value_ptr(NodeId id) const { return nodes_[check(id)].value; }
  const Node& node(NodeId id) const { return nodes_[check(id)]; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  // Drops every node with id >= mark. Gradients extracted as values survive;
  // node ids above the mark become invalid.
  void truncate(std::size_t mark);

  // --- backward --------------------------------------------------------

  // Gradients as differentiable nodes appended to this tape. Leaves (or
  // intermediate nodes) in `wrt` that the loss does not depend on get a
  // zero-constant gradient node.
  std::unordered_map<NodeId, NodeId> backward_nodes(NodeId loss,
                                                    std::span<const NodeId> wrt);

  // Gradients as plain tensors; the tape is left unchanged.
  std::unordered_map<NodeId, Tensor> backward_values(NodeId loss,
                                                     std::span<const NodeId> wrt);

 private:
  NodeId record1(Op op, NodeId a, double scalar = 0.0) {
    const NodeId p[1] = {a};
    return record(op, p, scalar);
  }
  NodeId record2(Op op, NodeId a, NodeId b) {
    const NodeId p[2] = {a, b};
    return record(op, p);
  }
  NodeId push(Node n);
  NodeId check(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
      throw std::invalid_argument("Tape: invalid node id");
    return id;
  }

  std::vector<Node> nodes_;
};

// Central finite differences of a scalar-valued function of one tensor,
// (f(x+h) - f(x-h)) / 2h per entry. Test oracle.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& at, double step);

}  // namespace graphpoison
