// SPDX-License-Identifier: Apache-2.0
//
// The outer poisoning loop: a gradient engine scores every candidate edit of
// the adjacency (and optionally the binary features), the highest-scoring
// admissible edit is committed, and the process repeats until the budget is
// spent. Engines:
//
//   exact        unrolls T differentiable training steps and backpropagates
//                the attacker loss through the whole trajectory
//   approximate  sums detached per-step gradients, weighting the labeled and
//                self-training objectives by lambda; memory independent of T
//   first-order  trains, detaches, takes one gradient at the final weights
//   dice         label-informed random baseline (delete within classes,
//                insert across classes)

#pragma once

#include "graphpoison/constraints.hpp"
#include "graphpoison/graph.hpp"
#include "graphpoison/surrogate.hpp"

#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace graphpoison {

enum class AttackMethod {
  MetaSelf,
  MetaTrain,
  MetaOracle,
  AMetaSelf,
  AMetaTrain,
  AMetaBoth,
  FirstOrder,
  Dice,
};

const char* attack_method_name(AttackMethod m);
std::optional<AttackMethod> parse_attack_method(const std::string& s);

struct AttackConfig {
  AttackMethod method = AttackMethod::MetaSelf;
  double budget_fraction = 0.05;  // Delta = max(1, round(fraction * E_LCC))
  double lambda = 0.5;            // AMetaBoth only; AMetaTrain is 1, AMetaSelf is 0
  InnerTrainConfig inner;
  ConstraintToggles toggles;
  int d_min = 2;
  double tau = 0.004;
  std::uint64_t base_seed = 0;
  bool include_feature_flips = false;
  // Multiplier applied to feature-flip scores when they compete with edge
  // scores in the shared ranking.
  double feature_flip_weight = 1.0;
};

int attack_budget(const AttackConfig& cfg, const AttributedGraph& graph);

struct MetaGradient {
  // d(attacker loss)/d(adjacency entry), as produced by the backward pass.
  Tensor raw;
  // (raw + raw^T)/2 with zeroed diagonal; what the score function consumes.
  Tensor symmetrized;
  // d(attacker loss)/d(feature entry); empty unless requested.
  Tensor feature_grad;
  double attacker_loss = 0.0;
};

MetaGradient meta_gradient_exact(const AttributedGraph& graph, const DataSplit& split,
                                 const AttackerLossSpec& spec, const InnerTrainConfig& inner,
                                 bool want_feature_grad = false);

// Accumulates lambda*grad(L_train) + (1-lambda)*grad(L_self) at every
// detached snapshot theta_0..theta_T. The two accumulators are kept separate
// and combined once at the end, so the result is exactly linear in lambda.
MetaGradient meta_gradient_approx(const AttributedGraph& graph, const DataSplit& split,
                                  double lambda, const IndexVec& predicted_labels,
                                  const InnerTrainConfig& inner,
                                  bool want_feature_grad = false);

MetaGradient first_order_gradient(const AttributedGraph& graph, const DataSplit& split,
                                  const AttackerLossSpec& spec, const InnerTrainConfig& inner,
                                  bool want_feature_grad = false);

// S(u,v) = grad(u,v) * (-2*a(u,v) + 1); diagonal masked out (set to 0 and
// never enumerated as a candidate).
struct ScoreMatrix {
  Tensor s;
};

ScoreMatrix score_matrix(const Tensor& symmetrized_grad, const Tensor& adjacency);

struct Selection {
  Perturbation perturbation;
  double lambda_stat = 0.0;
};

// Highest-scoring admissible candidate, ties broken toward edges, then
// (smaller u, smaller v). Pairs/flips listed in the used sets are skipped;
// nullopt when no admissible candidate remains.
std::optional<Selection> greedy_select(const ScoreMatrix& scores,
                                       const Tensor* feature_scores, double feature_weight,
                                       const AttributedGraph& graph,
                                       const ConstraintState& state,
                                       const std::unordered_set<long>& used_pairs,
                                       const std::unordered_set<long>& used_flips);

struct StepLog {
  Perturbation perturbation;
  double lambda_stat = 0.0;    // NaN when the degree check is off
  double attacker_loss = 0.0;  // estimate from the gradient engine; NaN for dice
};

struct AttackResult {
  std::vector<Perturbation> perturbations;
  AttributedGraph poisoned;
  std::vector<StepLog> steps;
  int delta = 0;
  // False when the attack ran out of admissible candidates early.
  bool completed = true;
};

AttackResult run_attack(const AttributedGraph& graph, const DataSplit& split,
                        const AttackConfig& cfg);

// One random admissible edit per step: deletions among connected same-class
// pairs, insertions among unconnected cross-class pairs. Uses all true labels.
AttackResult dice_attack(const AttributedGraph& graph, int delta,
                         const ConstraintToggles& toggles, int d_min, double tau,
                         std::uint64_t seed);

// Runs the attack on an extracted subgraph with the budget scaled to the
// subgraph's edge count, then maps the perturbations back to original ids and
// applies them to the full graph.
AttackResult subgraph_attack(const AttributedGraph& graph, const DataSplit& split,
                             const AttackConfig& cfg, double subgraph_fraction);

// Replays a perturbation list against a clean graph with full admissibility
// checking; throws with the offending step on mismatch.
AttributedGraph replay_perturbations(const AttributedGraph& clean,
                                     const std::vector<Perturbation>& perturbations,
                                     const ConstraintToggles& toggles, int d_min, double tau);

}  // namespace graphpoison
