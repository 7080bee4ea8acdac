// SPDX-License-Identifier: Apache-2.0

#include "graphpoison/victim.hpp"
#include "graphpoison/rng.hpp"
#include "graphpoison/surrogate.hpp"
#include "graphpoison/tape.hpp"

#include <cmath>

namespace graphpoison {

namespace k = kernels;

void validate(const VictimConfig& cfg) {
  if (cfg.hidden < 1) throw std::invalid_argument("victim config: hidden width >= 1");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    throw std::invalid_argument("victim config: dropout in [0,1)");
  if (cfg.weight_decay < 0.0) throw std::invalid_argument("victim config: weight decay >= 0");
  if (cfg.learning_rate <= 0.0) throw std::invalid_argument("victim config: learning rate > 0");
  if (cfg.epochs < 0) throw std::invalid_argument("victim config: epochs >= 0");
  if (cfg.patience < 0) throw std::invalid_argument("victim config: patience >= 0");
}

namespace {

Tensor glorot_uniform(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform_real(-limit, limit);
  return t;
}

// Inverted dropout mask: 1/(1-p) with probability 1-p, else 0.
Tensor dropout_mask(int rows, int cols, double p, Rng& rng) {
  Tensor m(rows, cols);
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& v : m.values()) v = rng.bernoulli(p) ? 0.0 : keep_scale;
  return m;
}

struct Adam {
  Tensor m, v;
  int t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  explicit Adam(int rows, int cols) : m(rows, cols), v(rows, cols) {}

  void update(Tensor& param, const Tensor& grad, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double g = grad.values()[i];
      double& mi = m.values()[i];
      double& vi = v.values()[i];
      mi = beta1 * mi + (1.0 - beta1) * g;
      vi = beta2 * vi + (1.0 - beta2) * g * g;
      param.values()[i] -= lr * (mi / c1) / (std::sqrt(vi / c2) + eps);
    }
  }
};

IndexVec labels_of(const AttributedGraph& graph, const std::vector<int>& nodes) {
  std::vector<int> out(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) out[i] = graph.labels[nodes[i]];
  return make_indices(std::move(out));
}

}  // namespace

VictimWeights train_victim_gcn(const AttributedGraph& graph, const DataSplit& split,
                               const VictimConfig& cfg) {
  validate(cfg);
  if (split.labeled.empty()) throw std::invalid_argument("train_victim_gcn: empty labeled set");

  Rng init_rng(derive_seed(cfg.seed, 0x696e6974 /* init */));
  VictimWeights w;
  w.w1 = glorot_uniform(graph.feature_dim, cfg.hidden, init_rng);
  w.w2 = glorot_uniform(cfg.hidden, graph.num_classes, init_rng);
  Rng mask_rng(derive_seed(cfg.seed, 0x64726f70 /* drop */));

  Tape tape;
  const NodeId norm_adj = tape.constant(normalize_adjacency(graph.adjacency));
  const NodeId features = tape.constant(graph.features);
  const IndexVec train_idx = make_indices(split.labeled);
  const IndexVec train_labels = labels_of(graph, split.labeled);
  const std::size_t mark = tape.size();

  Adam opt1(w.w1.rows(), w.w1.cols());
  Adam opt2(w.w2.rows(), w.w2.cols());

  double best_loss = std::numeric_limits<double>::infinity();
  int stall = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const NodeId w1 = tape.leaf(w.w1);
    const NodeId w2 = tape.leaf(w.w2);

    NodeId x = features;
    if (cfg.dropout > 0.0)
      x = tape.mask_mul(x, tape.constant(dropout_mask(graph.num_nodes, graph.feature_dim,
                                                      cfg.dropout, mask_rng)));
    NodeId h = tape.relu(tape.matmul(norm_adj, tape.matmul(x, w1)));
    if (cfg.dropout > 0.0)
      h = tape.mask_mul(h, tape.constant(dropout_mask(graph.num_nodes, cfg.hidden,
                                                      cfg.dropout, mask_rng)));
    const NodeId probs = tape.row_softmax(tape.matmul(tape.matmul(norm_adj, h), w2));
    NodeId loss = tape.cross_entropy(tape.gather_rows(probs, train_idx), train_labels);
    if (cfg.weight_decay > 0.0)
      loss = tape.add(loss, tape.scale(tape.sum_all(tape.mul(w1, w1)), cfg.weight_decay));

    const double loss_value = tape.value(loss).scalar_value();
    if (!std::isfinite(loss_value))
      throw std::runtime_error("train_victim_gcn: loss diverged at epoch " +
                               std::to_string(epoch));

    const NodeId wrt[2] = {w1, w2};
    auto grads = tape.backward_values(loss, wrt);
    opt1.update(w.w1, grads.at(w1), cfg.learning_rate);
    opt2.update(w.w2, grads.at(w2), cfg.learning_rate);
    tape.truncate(mark);

    if (cfg.patience > 0) {
      if (loss_value < best_loss - 1e-10) {
        best_loss = loss_value;
        stall = 0;
      } else if (++stall >= cfg.patience) {
        break;
      }
    }
  }
  return w;
}

Tensor victim_forward(const Tensor& norm_adj, const Tensor& features,
                      const VictimWeights& weights) {
  const Tensor h = k::relu(k::matmul(norm_adj, k::matmul(features, weights.w1)));
  return k::row_softmax(k::matmul(k::matmul(norm_adj, h), weights.w2));
}

double accuracy(const VictimWeights& weights, const AttributedGraph& graph,
                const DataSplit& split) {
  if (split.unlabeled.empty()) throw std::invalid_argument("accuracy: empty unlabeled set");
  const Tensor probs =
      victim_forward(normalize_adjacency(graph.adjacency), graph.features, weights);
  const std::vector<int> pred = argmax_rows(probs);
  int correct = 0;
  for (int u : split.unlabeled)
    if (pred[u] == graph.labels[u]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(split.unlabeled.size());
}

double misclassification(const VictimWeights& weights, const AttributedGraph& graph,
                         const DataSplit& split) {
  return 1.0 - accuracy(weights, graph, split);
}

double features_only_baseline(const AttributedGraph& graph, const DataSplit& split,
                              std::uint64_t seed) {
  if (split.labeled.empty() || split.unlabeled.empty())
    throw std::invalid_argument("features_only_baseline: empty split");

  Rng init_rng(derive_seed(seed, 0x6c6f6772 /* logr */));
  Tensor w = glorot_uniform(graph.feature_dim, graph.num_classes, init_rng);
  Tensor b = Tensor::zeros(1, graph.num_classes);

  Tape tape;
  const NodeId x = tape.constant(graph.features);
  const NodeId ones = tape.constant(Tensor::full(graph.num_nodes, 1, 1.0));
  const IndexVec train_idx = make_indices(split.labeled);
  const IndexVec train_labels = labels_of(graph, split.labeled);
  const std::size_t mark = tape.size();

  Adam opt_w(w.rows(), w.cols());
  Adam opt_b(b.rows(), b.cols());
  const int epochs = 200;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const NodeId wn = tape.leaf(w);
    const NodeId bn = tape.leaf(b);
    const NodeId logits = tape.add(tape.matmul(x, wn), tape.matmul(ones, bn));
    const NodeId probs = tape.row_softmax(logits);
    const NodeId loss = tape.cross_entropy(tape.gather_rows(probs, train_idx), train_labels);
    const NodeId wrt[2] = {wn, bn};
    auto grads = tape.backward_values(loss, wrt);
    opt_w.update(w, grads.at(wn), 0.01);
    opt_b.update(b, grads.at(bn), 0.01);
    tape.truncate(mark);
  }

  const Tensor logits = k::add(k::matmul(graph.features, w),
                               k::matmul(Tensor::full(graph.num_nodes, 1, 1.0), b));
  const std::vector<int> pred = argmax_rows(k::row_softmax(logits));
  int correct = 0;
  for (int u : split.unlabeled)
    if (pred[u] == graph.labels[u]) ++correct;
  return 1.0 - static_cast<double>(correct) / static_cast<double>(split.unlabeled.size());
}

WeightTransferTable weight_transfer(const AttributedGraph& clean,
                                    const AttributedGraph& poisoned, const DataSplit& split,
                                    const VictimConfig& cfg) {
  if (clean.num_nodes != poisoned.num_nodes || clean.feature_dim != poisoned.feature_dim)
    throw std::invalid_argument("weight_transfer: graphs must share nodes and features");
  VictimConfig clean_cfg = cfg;
  clean_cfg.seed = derive_seed(cfg.seed, 0);
  VictimConfig pois_cfg = cfg;
  pois_cfg.seed = derive_seed(cfg.seed, 1);

  const VictimWeights w_clean = train_victim_gcn(clean, split, clean_cfg);
  const VictimWeights w_pois = train_victim_gcn(poisoned, split, pois_cfg);

  WeightTransferTable t;
  t.acc[0][0] = accuracy(w_clean, clean, split);
  t.acc[0][1] = accuracy(w_pois, clean, split);
  t.acc[1][0] = accuracy(w_clean, poisoned, split);
  t.acc[1][1] = accuracy(w_pois, poisoned, split);
  return t;
}

}  // namespace graphpoison
