// SPDX-License-Identifier: Apache-2.0
//
// The attacker's surrogate: a linearized two-layer graph convolution
// softmax(A_hat^2 X W) trained by momentum gradient descent on the labeled
// nodes. Training comes in two flavors: a differentiable unroll whose weight
// updates stay on the tape (the relaxed adjacency is a leaf, so the final
// parameters are a differentiable function of it), and a plain run that
// returns detached per-step parameter snapshots.

#pragma once

#include "graphpoison/graph.hpp"
#include "graphpoison/tape.hpp"

#include <memory>
#include <vector>

namespace graphpoison {

struct SurrogateParams {
  Tensor w1;  // DxH (or DxK in single-matrix mode)
  Tensor w2;  // HxK (unused in single-matrix mode)
  bool single_matrix = false;

  // The effective DxK linear map w1*w2 (w1 alone in single-matrix mode).
  Tensor effective() const;
};

struct InnerTrainConfig {
  int steps = 100;             // T
  double learning_rate = 0.1;  // alpha
  double momentum = 0.9;
  int hidden = 16;
  bool single_matrix = false;
  std::uint64_t init_seed = 0;  // Glorot-uniform draw
};

void validate(const InnerTrainConfig& cfg);

enum class AttackerLossVariant { Train, Self, Both, Oracle };

struct AttackerLossSpec {
  AttackerLossVariant variant = AttackerLossVariant::Self;
  double lambda = 0.5;  // Both only: weight on the labeled-node term
  // Predicted classes for the unlabeled nodes, aligned with split.unlabeled.
  IndexVec predicted_labels;
  // True labels for every node (Oracle only).
  IndexVec oracle_labels;
};

// Glorot-uniform initial parameters, deterministic per seed.
SurrogateParams init_surrogate(int feature_dim, int num_classes,
                               const InnerTrainConfig& cfg);

// Forward pass recorded on a tape / on raw values. The two produce
// bit-identical probabilities for identical inputs.
NodeId surrogate_forward(Tape& tape, NodeId norm_adj, NodeId features, NodeId w1,
                         NodeId w2 = kNoNode);
Tensor surrogate_forward(const Tensor& norm_adj, const Tensor& features,
                         const SurrogateParams& params);

// Inside a training loop the normalized adjacency is fixed, so when the
// feature dimension is small relative to the unrolled propagation cost the
// two hops are applied to X once and reused across steps. Same linear map,
// associated differently; chosen deterministically from the shapes.
struct SurrogateForwardPlan {
  bool propagate_features = false;
};

SurrogateForwardPlan plan_surrogate_forward(int feature_dim, int num_classes,
                                            const InnerTrainConfig& cfg);
// A_hat.(A_hat.X) under the plan, X itself otherwise.
NodeId record_propagated_features(Tape& tape, NodeId norm_adj, NodeId features,
                                  const SurrogateForwardPlan& plan);
NodeId record_surrogate_probs(Tape& tape, NodeId norm_adj, NodeId prop_features,
                              NodeId w1, NodeId w2, const SurrogateForwardPlan& plan);

// Differentiable unrolled training. Everything lives on the returned tape;
// `adjacency` is the relaxed-adjacency leaf the meta-gradient is taken
// against.
struct SurrogateUnroll {
  std::shared_ptr<Tape> tape;
  NodeId adjacency = kNoNode;       // leaf
  NodeId features = kNoNode;        // leaf (feature attacks) or constant
  NodeId norm_adjacency = kNoNode;  // A_hat
  NodeId prop_features = kNoNode;   // features under the forward plan
  SurrogateForwardPlan plan;
  NodeId w1 = kNoNode;  // theta_T
  NodeId w2 = kNoNode;
  double final_train_loss = 0.0;
};

SurrogateUnroll train_surrogate_differentiable(const AttributedGraph& graph,
                                               const DataSplit& split,
                                               const InnerTrainConfig& cfg,
                                               bool features_as_leaf = false);

// Plain training; returns the detached snapshots theta_0..theta_T. Snapshot
// values are bit-identical with the differentiable unroll for the same seed.
struct SurrogateTrajectory {
  Tensor norm_adjacency;
  std::vector<SurrogateParams> steps;  // size T+1
  std::vector<double> losses;          // training loss observed at theta_0..theta_{T-1}
};

SurrogateTrajectory train_surrogate(const AttributedGraph& graph, const DataSplit& split,
                                    const InnerTrainConfig& cfg);

// Trains on the clean graph and returns argmax predictions for the unlabeled
// nodes (aligned with split.unlabeled); ties break toward the smaller class.
std::vector<int> self_train_labels(const AttributedGraph& graph, const DataSplit& split,
                                   const InnerTrainConfig& cfg);

// The attacker objective as a recorded scalar:
//   Train:  -CE(V_L, C_L)
//   Self:   -CE(V_U, predicted labels)
//   Both:   -(lambda*CE(V_L,C_L) + (1-lambda)*CE(V_U, predicted))
//   Oracle: -CE(V_U, true labels)
NodeId attacker_loss(Tape& tape, NodeId probabilities, const AttributedGraph& graph,
                     const DataSplit& split, const AttackerLossSpec& spec);

// Argmax per row; ties toward the smaller index.
std::vector<int> argmax_rows(const Tensor& probabilities);

}  // namespace graphpoison
