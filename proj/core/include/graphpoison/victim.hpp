// SPDX-License-Identifier: Apache-2.0
//
// The transfer target: a two-layer GCN softmax(A_hat.relu(A_hat.X.W1).W2)
// trained with Adam, input dropout per layer, and an L2 penalty on the first
// layer. Also the attribute-only logistic-regression baseline.

#pragma once

#include "graphpoison/graph.hpp"

#include <cstdint>

namespace graphpoison {

struct VictimConfig {
  int hidden = 16;
  double dropout = 0.5;
  double weight_decay = 5e-4;  // first-layer L2 coefficient
  double learning_rate = 0.01;
  int epochs = 200;
  // Stop after this many epochs without training-loss improvement; 0 = off.
  int patience = 0;
  std::uint64_t seed = 0;
};

void validate(const VictimConfig& cfg);

struct VictimWeights {
  Tensor w1;  // DxH
  Tensor w2;  // HxK
};

VictimWeights train_victim_gcn(const AttributedGraph& graph, const DataSplit& split,
                               const VictimConfig& cfg);

// Inference-time forward (no dropout): row-stochastic class probabilities.
Tensor victim_forward(const Tensor& norm_adj, const Tensor& features,
                      const VictimWeights& weights);

// 1 - accuracy over the unlabeled nodes.
double misclassification(const VictimWeights& weights, const AttributedGraph& graph,
                         const DataSplit& split);
double accuracy(const VictimWeights& weights, const AttributedGraph& graph,
                const DataSplit& split);

// Multinomial logistic regression on the node attributes alone; never reads
// the adjacency. Returns misclassification on the unlabeled nodes.
double features_only_baseline(const AttributedGraph& graph, const DataSplit& split,
                              std::uint64_t seed = 0);

struct WeightTransferTable {
  // acc[g][w]: g=0 clean graph, g=1 poisoned graph; w=0 clean-trained
  // weights, w=1 poisoned-trained weights.
  double acc[2][2];
};

WeightTransferTable weight_transfer(const AttributedGraph& clean,
                                    const AttributedGraph& poisoned, const DataSplit& split,
                                    const VictimConfig& cfg);

}  // namespace graphpoison
