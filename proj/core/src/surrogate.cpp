// SPDX-License-Identifier: Apache-2.0

#include "graphpoison/surrogate.hpp"
#include "graphpoison/rng.hpp"

#include <algorithm>
#include <cmath>

namespace graphpoison {

namespace k = kernels;

Tensor SurrogateParams::effective() const {
  return single_matrix ? w1 : k::matmul(w1, w2);
}

void validate(const InnerTrainConfig& cfg) {
  if (cfg.steps < 1) throw std::invalid_argument("inner config: steps must be >= 1");
  if (cfg.learning_rate <= 0.0)
    throw std::invalid_argument("inner config: learning rate must be > 0");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
    throw std::invalid_argument("inner config: momentum must be in [0,1)");
  if (!cfg.single_matrix && cfg.hidden < 1)
    throw std::invalid_argument("inner config: hidden width must be >= 1");
}

namespace {

Tensor glorot_uniform(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform_real(-limit, limit);
  return t;
}

IndexVec labels_of(const AttributedGraph& graph, const std::vector<int>& nodes) {
  std::vector<int> out(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) out[i] = graph.labels[nodes[i]];
  return make_indices(std::move(out));
}

// Training loss at the current parameters: mean cross-entropy on V_L.
NodeId train_loss(Tape& tape, NodeId probs, const AttributedGraph& graph,
                  const DataSplit& split) {
  if (split.labeled.empty()) throw std::invalid_argument("train: labeled set is empty");
  const NodeId picked = tape.gather_rows(probs, make_indices(split.labeled));
  return tape.cross_entropy(picked, labels_of(graph, split.labeled));
}

}  // namespace

SurrogateParams init_surrogate(int feature_dim, int num_classes,
                               const InnerTrainConfig& cfg) {
  Rng rng(cfg.init_seed);
  SurrogateParams p;
  p.single_matrix = cfg.single_matrix;
  if (cfg.single_matrix) {
    p.w1 = glorot_uniform(feature_dim, num_classes, rng);
  } else {
    p.w1 = glorot_uniform(feature_dim, cfg.hidden, rng);
    p.w2 = glorot_uniform(cfg.hidden, num_classes, rng);
  }
  return p;
}

NodeId surrogate_forward(Tape& tape, NodeId norm_adj, NodeId features, NodeId w1,
                         NodeId w2) {
  // softmax(A_hat.(A_hat.(X.W1)).W2), cheapest association first
  NodeId h = tape.matmul(features, w1);
  h = tape.matmul(norm_adj, h);
  h = tape.matmul(norm_adj, h);
  if (w2 != kNoNode) h = tape.matmul(h, w2);
  return tape.row_softmax(h);
}

SurrogateForwardPlan plan_surrogate_forward(int feature_dim, int num_classes,
                                            const InnerTrainConfig& cfg) {
  const long width = cfg.single_matrix ? num_classes : cfg.hidden;
  const long unrolled_hops = 2L * std::max(cfg.steps, 1) * std::max(width, 1L);
  return SurrogateForwardPlan{2L * feature_dim <= unrolled_hops};
}

NodeId record_propagated_features(Tape& tape, NodeId norm_adj, NodeId features,
                                  const SurrogateForwardPlan& plan) {
  if (!plan.propagate_features) return features;
  return tape.matmul(norm_adj, tape.matmul(norm_adj, features));
}

NodeId record_surrogate_probs(Tape& tape, NodeId norm_adj, NodeId prop_features,
                              NodeId w1, NodeId w2, const SurrogateForwardPlan& plan) {
  if (plan.propagate_features) {
    NodeId h = tape.matmul(prop_features, w1);
    if (w2 != kNoNode) h = tape.matmul(h, w2);
    return tape.row_softmax(h);
  }
  return surrogate_forward(tape, norm_adj, prop_features, w1, w2);
}

Tensor surrogate_forward(const Tensor& norm_adj, const Tensor& features,
                         const SurrogateParams& params) {
  Tensor h = k::matmul(features, params.w1);
  h = k::matmul(norm_adj, h);
  h = k::matmul(norm_adj, h);
  if (!params.single_matrix) h = k::matmul(h, params.w2);
  return k::row_softmax(h);
}

SurrogateUnroll train_surrogate_differentiable(const AttributedGraph& graph,
                                               const DataSplit& split,
                                               const InnerTrainConfig& cfg,
                                               bool features_as_leaf) {
  const SurrogateParams init = init_surrogate(graph.feature_dim, graph.num_classes, cfg);

  SurrogateUnroll u;
  u.tape = std::make_shared<Tape>();
  Tape& tape = *u.tape;
  u.adjacency = tape.leaf(graph.adjacency);
  u.features = features_as_leaf ? tape.leaf(graph.features) : tape.constant(graph.features);
  u.norm_adjacency = normalize_adjacency(tape, u.adjacency);
  u.plan = plan_surrogate_forward(graph.feature_dim, graph.num_classes, cfg);
  u.prop_features = record_propagated_features(tape, u.norm_adjacency, u.features, u.plan);

  NodeId w1 = tape.leaf(init.w1);
  NodeId w2 = cfg.single_matrix ? kNoNode : tape.leaf(init.w2);
  NodeId m1 = tape.constant(Tensor::zeros(init.w1.rows(), init.w1.cols()));
  NodeId m2 = cfg.single_matrix
                  ? kNoNode
                  : tape.constant(Tensor::zeros(init.w2.rows(), init.w2.cols()));

  // theta_{t+1} = theta_t - alpha*m_{t+1}, m_{t+1} = mu*m_t + grad. Each
  // backward pass records its adjoint graph, so theta_T keeps its full
  // dependence on the adjacency leaf.
  for (int t = 0; t < cfg.steps; ++t) try {
      const NodeId probs =
          record_surrogate_probs(tape, u.norm_adjacency, u.prop_features, w1, w2, u.plan);
      const NodeId loss = train_loss(tape, probs, graph, split);
      u.final_train_loss = tape.value(loss).scalar_value();
      if (!std::isfinite(u.final_train_loss)) throw std::runtime_error("loss is non-finite");

      std::vector<NodeId> wrt{w1};
      if (w2 != kNoNode) wrt.push_back(w2);
      auto grads = tape.backward_nodes(loss, wrt);

      m1 = tape.add(tape.scale(m1, cfg.momentum), grads.at(w1));
      w1 = tape.sub(w1, tape.scale(m1, cfg.learning_rate));
      if (w2 != kNoNode) {
        m2 = tape.add(tape.scale(m2, cfg.momentum), grads.at(w2));
        w2 = tape.sub(w2, tape.scale(m2, cfg.learning_rate));
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("train_surrogate: diverged at step " + std::to_string(t) +
                               ": " + e.what());
    }
  u.w1 = w1;
  u.w2 = w2;
  return u;
}

SurrogateTrajectory train_surrogate(const AttributedGraph& graph, const DataSplit& split,
                                    const InnerTrainConfig& cfg) {
  SurrogateTrajectory traj;
  traj.norm_adjacency = normalize_adjacency(graph.adjacency);
  SurrogateParams params = init_surrogate(graph.feature_dim, graph.num_classes, cfg);
  Tensor m1 = Tensor::zeros(params.w1.rows(), params.w1.cols());
  Tensor m2 = cfg.single_matrix ? Tensor()
                                : Tensor::zeros(params.w2.rows(), params.w2.cols());
  traj.steps.push_back(params);

  // The per-step tape is truncated back after each update; the arithmetic is
  // the exact sequence the differentiable unroll records.
  Tape tape;
  const NodeId norm_adj = tape.constant(traj.norm_adjacency);
  const NodeId features = tape.constant(graph.features);
  const SurrogateForwardPlan plan =
      plan_surrogate_forward(graph.feature_dim, graph.num_classes, cfg);
  const NodeId prop = record_propagated_features(tape, norm_adj, features, plan);
  const std::size_t mark = tape.size();

  for (int t = 0; t < cfg.steps; ++t) try {
      const NodeId w1 = tape.leaf(params.w1);
      const NodeId w2 = cfg.single_matrix ? kNoNode : tape.leaf(params.w2);
      const NodeId probs = record_surrogate_probs(tape, norm_adj, prop, w1, w2, plan);
      const NodeId loss = train_loss(tape, probs, graph, split);
      const double loss_value = tape.value(loss).scalar_value();
      if (!std::isfinite(loss_value)) throw std::runtime_error("loss is non-finite");
      traj.losses.push_back(loss_value);

      std::vector<NodeId> wrt{w1};
      if (w2 != kNoNode) wrt.push_back(w2);
      auto grads = tape.backward_values(loss, wrt);

      m1 = k::add(k::scale(m1, cfg.momentum), grads.at(w1));
      params.w1 = k::sub(params.w1, k::scale(m1, cfg.learning_rate));
      if (w2 != kNoNode) {
        m2 = k::add(k::scale(m2, cfg.momentum), grads.at(w2));
        params.w2 = k::sub(params.w2, k::scale(m2, cfg.learning_rate));
      }
      tape.truncate(mark);
      traj.steps.push_back(params);
    } catch (const std::exception& e) {
      throw std::runtime_error("train_surrogate: diverged at step " + std::to_string(t) +
                               ": " + e.what());
    }
  return traj;
}

std::vector<int> self_train_labels(const AttributedGraph& graph, const DataSplit& split,
                                   const InnerTrainConfig& cfg) {
  const SurrogateTrajectory traj = train_surrogate(graph, split, cfg);
  const Tensor probs =
      surrogate_forward(traj.norm_adjacency, graph.features, traj.steps.back());
  const std::vector<int> pred = argmax_rows(probs);
  std::vector<int> out(split.unlabeled.size());
  for (std::size_t i = 0; i < split.unlabeled.size(); ++i) out[i] = pred[split.unlabeled[i]];
  return out;
}

NodeId attacker_loss(Tape& tape, NodeId probabilities, const AttributedGraph& graph,
                     const DataSplit& split, const AttackerLossSpec& spec) {
  auto ce_labeled = [&] {
    const NodeId picked = tape.gather_rows(probabilities, make_indices(split.labeled));
    return tape.cross_entropy(picked, labels_of(graph, split.labeled));
  };
  auto ce_unlabeled = [&](const IndexVec& labels) {
    if (!labels || labels->size() != split.unlabeled.size())
      throw std::invalid_argument("attacker_loss: labels for unlabeled nodes missing");
    const NodeId picked = tape.gather_rows(probabilities, make_indices(split.unlabeled));
    return tape.cross_entropy(picked, labels);
  };
  switch (spec.variant) {
    case AttackerLossVariant::Train:
      return tape.scale(ce_labeled(), -1.0);
    case AttackerLossVariant::Self:
      return tape.scale(ce_unlabeled(spec.predicted_labels), -1.0);
    case AttackerLossVariant::Both: {
      if (spec.lambda < 0.0 || spec.lambda > 1.0)
        throw std::invalid_argument("attacker_loss: lambda must be in [0,1]");
      const NodeId lhs = tape.scale(ce_labeled(), -spec.lambda);
      const NodeId rhs = tape.scale(ce_unlabeled(spec.predicted_labels), -(1.0 - spec.lambda));
      return tape.add(lhs, rhs);
    }
    case AttackerLossVariant::Oracle: {
      if (!spec.oracle_labels ||
          static_cast<int>(spec.oracle_labels->size()) != graph.num_nodes)
        throw std::invalid_argument("attacker_loss: oracle labels missing");
      std::vector<int> truth(split.unlabeled.size());
      for (std::size_t i = 0; i < split.unlabeled.size(); ++i)
        truth[i] = (*spec.oracle_labels)[split.unlabeled[i]];
      return tape.scale(ce_unlabeled(make_indices(std::move(truth))), -1.0);
    }
  }
  throw std::invalid_argument("attacker_loss: unknown variant");
}

std::vector<int> argmax_rows(const Tensor& probabilities) {
  std::vector<int> out(probabilities.rows());
  for (int i = 0; i < probabilities.rows(); ++i) {
    int best = 0;
    for (int j = 1; j < probabilities.cols(); ++j)
      if (probabilities(i, j) > probabilities(i, best)) best = j;
    out[i] = best;
  }
  return out;
}

}  // namespace graphpoison
