// SPDX-License-Identifier: Apache-2.0

#include "graphpoison/attacks.hpp"
#include "graphpoison/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace graphpoison {

namespace k = kernels;

namespace {

// Seed-derivation tags; step indices use the bare step number and stay far
// below these.
constexpr std::uint64_t kSelfTrainTag = 0x53454c465452ULL;
constexpr std::uint64_t kDiceTag = 0x44494345ULL;
constexpr std::uint64_t kSubgraphTag = 0x535542ULL;

Tensor symmetrize_zero_diag(const Tensor& g) {
  Tensor out(g.rows(), g.cols());
  for (int i = 0; i < g.rows(); ++i)
    for (int j = 0; j < g.cols(); ++j)
      out(i, j) = i == j ? 0.0 : 0.5 * (g(i, j) + g(j, i));
  return out;
}

long pair_key(int u, int v, int n) {
  if (u > v) std::swap(u, v);
  return static_cast<long>(u) * n + v;
}

}  // namespace

const char* attack_method_name(AttackMethod m) {
  switch (m) {
    case AttackMethod::MetaSelf: return "meta-self";
    case AttackMethod::MetaTrain: return "meta-train";
    case AttackMethod::MetaOracle: return "meta-oracle";
    case AttackMethod::AMetaSelf: return "a-meta-self";
    case AttackMethod::AMetaTrain: return "a-meta-train";
    case AttackMethod::AMetaBoth: return "a-meta-both";
    case AttackMethod::FirstOrder: return "first-order";
    case AttackMethod::Dice: return "dice";
  }
  return "?";
}

std::optional<AttackMethod> parse_attack_method(const std::string& s) {
  for (AttackMethod m :
       {AttackMethod::MetaSelf, AttackMethod::MetaTrain, AttackMethod::MetaOracle,
        AttackMethod::AMetaSelf, AttackMethod::AMetaTrain, AttackMethod::AMetaBoth,
        AttackMethod::FirstOrder, AttackMethod::Dice})
    if (s == attack_method_name(m)) return m;
  return std::nullopt;
}

int attack_budget(const AttackConfig& cfg, const AttributedGraph& graph) {
  if (cfg.budget_fraction < 0.0)
    throw std::invalid_argument("attack: budget fraction must be >= 0");
  return static_cast<int>(std::lround(cfg.budget_fraction * graph.edge_count()));
}

MetaGradient meta_gradient_exact(const AttributedGraph& graph, const DataSplit& split,
                                 const AttackerLossSpec& spec, const InnerTrainConfig& inner,
                                 bool want_feature_grad) {
  const SurrogateUnroll u =
      train_surrogate_differentiable(graph, split, inner, want_feature_grad);
  Tape& tape = *u.tape;

  const NodeId probs =
      record_surrogate_probs(tape, u.norm_adjacency, u.prop_features, u.w1, u.w2, u.plan);
  const NodeId atk = attacker_loss(tape, probs, graph, split, spec);
  // Greedy selection maximizes estimated damage, so the score consumes the
  // gradient of -L_atk (the positive loss the attacker drives up).
  const NodeId objective = tape.scale(atk, -1.0);

  std::vector<NodeId> wrt{u.adjacency};
  if (want_feature_grad) wrt.push_back(u.features);
  auto grads = tape.backward_values(objective, wrt);

  MetaGradient mg;
  mg.raw = std::move(grads.at(u.adjacency));
  mg.symmetrized = symmetrize_zero_diag(mg.raw);
  mg.attacker_loss = tape.value(atk).scalar_value();
  if (want_feature_grad) mg.feature_grad = std::move(grads.at(u.features));
  return mg;
}

MetaGradient meta_gradient_approx(const AttributedGraph& graph, const DataSplit& split,
                                  double lambda, const IndexVec& predicted_labels,
                                  const InnerTrainConfig& inner, bool want_feature_grad) {
  if (lambda < 0.0 || lambda > 1.0)
    throw std::invalid_argument("meta_gradient_approx: lambda must be in [0,1]");
  if (lambda < 1.0 &&
      (!predicted_labels || predicted_labels->size() != split.unlabeled.size()))
    throw std::invalid_argument("meta_gradient_approx: predicted labels required for lambda<1");

  const SurrogateTrajectory traj = train_surrogate(graph, split, inner);

  Tape tape;
  const NodeId adj = tape.leaf(graph.adjacency);
  const NodeId feats =
      want_feature_grad ? tape.leaf(graph.features) : tape.constant(graph.features);
  const NodeId norm_adj = normalize_adjacency(tape, adj);
  const SurrogateForwardPlan plan =
      plan_surrogate_forward(graph.feature_dim, graph.num_classes, inner);
  const NodeId prop = record_propagated_features(tape, norm_adj, feats, plan);
  const std::size_t mark = tape.size();

  const int n = graph.num_nodes;
  Tensor g_train = Tensor::zeros(n, n), g_self = Tensor::zeros(n, n);
  Tensor gx_train, gx_self;
  if (want_feature_grad) {
    gx_train = Tensor::zeros(n, graph.feature_dim);
    gx_self = Tensor::zeros(n, graph.feature_dim);
  }
  double ce_train_last = 0.0, ce_self_last = 0.0;

  const AttackerLossSpec train_spec{AttackerLossVariant::Train, 0.0, nullptr, nullptr};
  const AttackerLossSpec self_spec{AttackerLossVariant::Self, 0.0, predicted_labels, nullptr};

  std::vector<NodeId> wrt{adj};
  if (want_feature_grad) wrt.push_back(feats);

  // Every detached snapshot theta_0..theta_T contributes a plain gradient;
  // the train/self accumulators stay separate so the lambda weighting is
  // applied exactly once at the end.
  for (const SurrogateParams& params : traj.steps) {
    const NodeId w1 = tape.constant(params.w1);
    const NodeId w2 = params.single_matrix ? kNoNode : tape.constant(params.w2);
    const NodeId probs = record_surrogate_probs(tape, norm_adj, prop, w1, w2, plan);
    if (lambda > 0.0) {
      const NodeId ce = tape.scale(attacker_loss(tape, probs, graph, split, train_spec), -1.0);
      ce_train_last = tape.value(ce).scalar_value();
      auto grads = tape.backward_values(ce, wrt);
      g_train = k::add(g_train, grads.at(adj));
      if (want_feature_grad) gx_train = k::add(gx_train, grads.at(feats));
    }
    if (lambda < 1.0) {
      const NodeId ce = tape.scale(attacker_loss(tape, probs, graph, split, self_spec), -1.0);
      ce_self_last = tape.value(ce).scalar_value();
      auto grads = tape.backward_values(ce, wrt);
      g_self = k::add(g_self, grads.at(adj));
      if (want_feature_grad) gx_self = k::add(gx_self, grads.at(feats));
    }
    tape.truncate(mark);
  }

  MetaGradient mg;
  mg.raw = k::add(k::scale(g_train, lambda), k::scale(g_self, 1.0 - lambda));
  mg.symmetrized = symmetrize_zero_diag(mg.raw);
  mg.attacker_loss = -(lambda * ce_train_last + (1.0 - lambda) * ce_self_last);
  if (want_feature_grad)
    mg.feature_grad = k::add(k::scale(gx_train, lambda), k::scale(gx_self, 1.0 - lambda));
  return mg;
}

MetaGradient first_order_gradient(const AttributedGraph& graph, const DataSplit& split,
                                  const AttackerLossSpec& spec, const InnerTrainConfig& inner,
                                  bool want_feature_grad) {
  const SurrogateTrajectory traj = train_surrogate(graph, split, inner);
  const SurrogateParams& final_params = traj.steps.back();

  Tape tape;
  const NodeId adj = tape.leaf(graph.adjacency);
  const NodeId feats =
      want_feature_grad ? tape.leaf(graph.features) : tape.constant(graph.features);
  const NodeId norm_adj = normalize_adjacency(tape, adj);
  const SurrogateForwardPlan plan =
      plan_surrogate_forward(graph.feature_dim, graph.num_classes, inner);
  const NodeId prop = record_propagated_features(tape, norm_adj, feats, plan);
  const NodeId w1 = tape.constant(final_params.w1);
  const NodeId w2 = final_params.single_matrix ? kNoNode : tape.constant(final_params.w2);
  const NodeId probs = record_surrogate_probs(tape, norm_adj, prop, w1, w2, plan);
  const NodeId atk = attacker_loss(tape, probs, graph, split, spec);
  const NodeId objective = tape.scale(atk, -1.0);

  std::vector<NodeId> wrt{adj};
  if (want_feature_grad) wrt.push_back(feats);
  auto grads = tape.backward_values(objective, wrt);

  MetaGradient mg;
  mg.raw = std::move(grads.at(adj));
  mg.symmetrized = symmetrize_zero_diag(mg.raw);
  mg.attacker_loss = tape.value(atk).scalar_value();
  if (want_feature_grad) mg.feature_grad = std::move(grads.at(feats));
  return mg;
}

ScoreMatrix score_matrix(const Tensor& symmetrized_grad, const Tensor& adjacency) {
  if (!symmetrized_grad.same_shape(adjacency))
    throw std::invalid_argument("score_matrix: shape mismatch");
  ScoreMatrix sm;
  sm.s = Tensor(adjacency.rows(), adjacency.cols());
  for (int i = 0; i < adjacency.rows(); ++i)
    for (int j = 0; j < adjacency.cols(); ++j)
      sm.s(i, j) = i == j ? 0.0
                          : symmetrized_grad(i, j) * (-2.0 * adjacency(i, j) + 1.0);
  return sm;
}

namespace {

struct Candidate {
  double score;
  int u;
  int v;  // node for edges, feature index for flips
  bool feature;
};

// Descending score; ties resolve to edges before flips, then (u, v).
bool candidate_order(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.feature != b.feature) return !a.feature;
  if (a.u != b.u) return a.u < b.u;
  return a.v < b.v;
}

Perturbation to_perturbation(const Candidate& c, const AttributedGraph& g) {
  Perturbation p;
  p.u = c.u;
  p.v = c.v;
  p.score = c.score;
  if (c.feature)
    p.kind = PerturbationKind::FeatureFlip;
  else
    p.kind = g.has_edge(c.u, c.v) ? PerturbationKind::EdgeDelete
                                  : PerturbationKind::EdgeInsert;
  return p;
}

}  // namespace

// Candidates are examined in score order; a partial sort covers the common
// case where the top of the ranking is admissible.
std::optional<Selection> greedy_select(const ScoreMatrix& scores, const Tensor* feature_scores,
                                       double feature_weight, const AttributedGraph& g,
                                       const ConstraintState& state,
                                       const std::unordered_set<long>& used_pairs,
                                       const std::unordered_set<long>& used_flips) {
  const int n = g.num_nodes;
  std::vector<Candidate> cands;
  cands.reserve(static_cast<std::size_t>(n) * (n - 1) / 2 +
                (feature_scores ? static_cast<std::size_t>(n) * g.feature_dim : 0));
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      if (used_pairs.count(pair_key(u, v, n))) continue;
      cands.push_back({scores.s(u, v), u, v, false});
    }
  if (feature_scores)
    for (int u = 0; u < n; ++u)
      for (int f = 0; f < g.feature_dim; ++f) {
        if (used_flips.count(static_cast<long>(u) * g.feature_dim + f)) continue;
        cands.push_back({(*feature_scores)(u, f) * feature_weight, u, f, true});
      }

  const std::size_t chunk = std::min<std::size_t>(cands.size(), 1024);
  std::partial_sort(cands.begin(), cands.begin() + chunk, cands.end(), candidate_order);
  for (std::size_t pass = 0; pass < 2; ++pass) {
    const std::size_t begin = pass == 0 ? 0 : chunk;
    if (pass == 1) {
      if (chunk == cands.size()) break;
      std::sort(cands.begin() + chunk, cands.end(), candidate_order);
    }
    for (std::size_t i = begin; i < (pass == 0 ? chunk : cands.size()); ++i) {
      const Perturbation p = to_perturbation(cands[i], g);
      const AdmissibleResult adm = state.admissible(p);
      if (adm.pass) return Selection{p, adm.lambda_stat};
    }
  }
  return std::nullopt;
}

namespace {

AttackerLossSpec loss_spec_for(AttackMethod method, const AttributedGraph& graph,
                               const IndexVec& chat) {
  AttackerLossSpec spec;
  switch (method) {
    case AttackMethod::MetaTrain:
      spec.variant = AttackerLossVariant::Train;
      break;
    case AttackMethod::MetaOracle:
      spec.variant = AttackerLossVariant::Oracle;
      spec.oracle_labels = make_indices(graph.labels);
      break;
    case AttackMethod::MetaSelf:
    case AttackMethod::FirstOrder:
      spec.variant = AttackerLossVariant::Self;
      spec.predicted_labels = chat;
      break;
    default:
      throw std::invalid_argument("loss_spec_for: not an exact/first-order method");
  }
  return spec;
}

}  // namespace

AttackResult run_attack(const AttributedGraph& graph, const DataSplit& split,
                        const AttackConfig& cfg) {
  const int delta = attack_budget(cfg, graph);
  if (delta == 0) {
    AttackResult empty;
    empty.poisoned = graph;
    return empty;
  }
  if (cfg.method == AttackMethod::Dice)
    return dice_attack(graph, delta, cfg.toggles, cfg.d_min, cfg.tau,
                       derive_seed(cfg.base_seed, kDiceTag));

  const double lambda = cfg.method == AttackMethod::AMetaTrain  ? 1.0
                        : cfg.method == AttackMethod::AMetaSelf ? 0.0
                                                                : cfg.lambda;
  const bool approx = cfg.method == AttackMethod::AMetaSelf ||
                      cfg.method == AttackMethod::AMetaTrain ||
                      cfg.method == AttackMethod::AMetaBoth;
  const bool needs_chat = cfg.method == AttackMethod::MetaSelf ||
                          cfg.method == AttackMethod::FirstOrder ||
                          cfg.method == AttackMethod::AMetaSelf ||
                          (cfg.method == AttackMethod::AMetaBoth && lambda < 1.0);

  // Self-training labels are estimated once on the clean graph and frozen.
  IndexVec chat;
  if (needs_chat) {
    InnerTrainConfig st = cfg.inner;
    st.init_seed = derive_seed(cfg.base_seed, kSelfTrainTag);
    chat = make_indices(self_train_labels(graph, split, st));
  }

  const bool flips = cfg.include_feature_flips && graph.binary_features;

  AttributedGraph working = graph;
  ConstraintState state(graph, delta, cfg.toggles, cfg.d_min, cfg.tau);
  std::unordered_set<long> used_pairs, used_flips;

  AttackResult result;
  result.delta = delta;
  for (int step = 0; step < delta; ++step) {
    InnerTrainConfig inner = cfg.inner;
    inner.init_seed = derive_seed(cfg.base_seed, static_cast<std::uint64_t>(step));

    MetaGradient mg;
    if (approx) {
      mg = meta_gradient_approx(working, split, lambda, chat, inner, flips);
    } else if (cfg.method == AttackMethod::FirstOrder) {
      mg = first_order_gradient(working, split, loss_spec_for(cfg.method, graph, chat),
                                inner, flips);
    } else {
      mg = meta_gradient_exact(working, split, loss_spec_for(cfg.method, graph, chat),
                               inner, flips);
    }

    const ScoreMatrix scores = score_matrix(mg.symmetrized, working.adjacency);
    Tensor feature_scores;
    if (flips) {
      feature_scores = Tensor(working.num_nodes, working.feature_dim);
      for (int u = 0; u < working.num_nodes; ++u)
        for (int f = 0; f < working.feature_dim; ++f)
          feature_scores(u, f) =
              mg.feature_grad(u, f) * (-2.0 * working.features(u, f) + 1.0);
    }

    auto picked = greedy_select(scores, flips ? &feature_scores : nullptr,
                                cfg.feature_flip_weight, working, state, used_pairs,
                                used_flips);
    if (!picked) {
      result.completed = false;
      break;
    }
    Perturbation p = picked->perturbation;
    p.step = step;
    apply_perturbation_inplace(working, p);
    state.commit(p);
    if (p.kind == PerturbationKind::FeatureFlip)
      used_flips.insert(static_cast<long>(p.u) * working.feature_dim + p.v);
    else
      used_pairs.insert(pair_key(p.u, p.v, working.num_nodes));
    result.perturbations.push_back(p);
    result.steps.push_back(StepLog{p, picked->lambda_stat, mg.attacker_loss});
  }
  result.poisoned = std::move(working);
  return result;
}

namespace {

std::optional<Perturbation> dice_try_delete(const AttributedGraph& g,
                                            const ConstraintState& state,
                                            const std::unordered_set<long>& used_pairs,
                                            Rng& rng, double* lambda_out) {
  std::vector<std::pair<int, int>> pool;
  for (int u = 0; u < g.num_nodes; ++u)
    for (int v = u + 1; v < g.num_nodes; ++v)
      if (g.has_edge(u, v) && g.labels[u] == g.labels[v] &&
          !used_pairs.count(pair_key(u, v, g.num_nodes)))
        pool.emplace_back(u, v);
  for (int tries = 0; tries < 64 && !pool.empty(); ++tries) {
    const std::size_t i = rng.uniform(pool.size());
    Perturbation p;
    p.kind = PerturbationKind::EdgeDelete;
    p.u = pool[i].first;
    p.v = pool[i].second;
    const AdmissibleResult adm = state.admissible(p);
    if (adm.pass) {
      *lambda_out = adm.lambda_stat;
      return p;
    }
    pool[i] = pool.back();
    pool.pop_back();
  }
  return std::nullopt;
}

std::optional<Perturbation> dice_try_insert(const AttributedGraph& g,
                                            const ConstraintState& state,
                                            const std::unordered_set<long>& used_pairs,
                                            Rng& rng, double* lambda_out) {
  auto valid = [&](int u, int v) {
    return u != v && g.labels[u] != g.labels[v] && !g.has_edge(u, v) &&
           !used_pairs.count(pair_key(u, v, g.num_nodes));
  };
  for (int tries = 0; tries < 10000; ++tries) {
    const int u = static_cast<int>(rng.uniform(g.num_nodes));
    const int v = static_cast<int>(rng.uniform(g.num_nodes));
    if (!valid(u, v)) continue;
    Perturbation p;
    p.kind = PerturbationKind::EdgeInsert;
    p.u = std::min(u, v);
    p.v = std::max(u, v);
    const AdmissibleResult adm = state.admissible(p);
    if (adm.pass) {
      *lambda_out = adm.lambda_stat;
      return p;
    }
  }
  // Sparse feasible set; enumerate instead of sampling blind.
  std::vector<std::pair<int, int>> pool;
  for (int u = 0; u < g.num_nodes; ++u)
    for (int v = u + 1; v < g.num_nodes; ++v)
      if (valid(u, v)) pool.emplace_back(u, v);
  while (!pool.empty()) {
    const std::size_t i = rng.uniform(pool.size());
    Perturbation p;
    p.kind = PerturbationKind::EdgeInsert;
    p.u = pool[i].first;
    p.v = pool[i].second;
    const AdmissibleResult adm = state.admissible(p);
    if (adm.pass) {
      *lambda_out = adm.lambda_stat;
      return p;
    }
    pool[i] = pool.back();
    pool.pop_back();
  }
  return std::nullopt;
}

}  // namespace

AttackResult dice_attack(const AttributedGraph& graph, int delta,
                         const ConstraintToggles& toggles, int d_min, double tau,
                         std::uint64_t seed) {
  if (delta == 0) {
    AttackResult empty;
    empty.poisoned = graph;
    return empty;
  }
  Rng rng(seed);
  AttributedGraph working = graph;
  ConstraintState state(graph, delta, toggles, d_min, tau);
  std::unordered_set<long> used_pairs;

  AttackResult result;
  result.delta = delta;
  for (int step = 0; step < delta; ++step) {
    bool try_delete = rng.bernoulli(0.5);
    std::optional<Perturbation> pick;
    double lambda_stat = std::numeric_limits<double>::quiet_NaN();
    for (int phase = 0; phase < 2 && !pick; ++phase) {
      pick = try_delete ? dice_try_delete(working, state, used_pairs, rng, &lambda_stat)
                        : dice_try_insert(working, state, used_pairs, rng, &lambda_stat);
      try_delete = !try_delete;
    }
    if (!pick)
      throw std::runtime_error("dice_attack: no feasible action remains at step " +
                               std::to_string(step));
    pick->step = step;
    apply_perturbation_inplace(working, *pick);
    state.commit(*pick);
    used_pairs.insert(pair_key(pick->u, pick->v, working.num_nodes));
    result.perturbations.push_back(*pick);
    result.steps.push_back(
        StepLog{*pick, lambda_stat, std::numeric_limits<double>::quiet_NaN()});
  }
  result.poisoned = std::move(working);
  return result;
}

AttackResult subgraph_attack(const AttributedGraph& graph, const DataSplit& split,
                             const AttackConfig& cfg, double subgraph_fraction) {
  const SubgraphExtraction sub = extract_attack_subgraph(
      graph, split, subgraph_fraction, derive_seed(cfg.base_seed, kSubgraphTag));

  std::vector<int> new_id(graph.num_nodes, -1);
  for (std::size_t i = 0; i < sub.to_original.size(); ++i) new_id[sub.to_original[i]] = i;

  DataSplit sub_split;
  sub_split.seed = split.seed;
  for (int u : split.labeled) sub_split.labeled.push_back(new_id[u]);
  std::sort(sub_split.labeled.begin(), sub_split.labeled.end());
  for (int i = 0; i < sub.graph.num_nodes; ++i)
    if (!std::binary_search(sub_split.labeled.begin(), sub_split.labeled.end(), i))
      sub_split.unlabeled.push_back(i);

  AttackResult inner = run_attack(sub.graph, sub_split, cfg);

  AttackResult result;
  result.delta = inner.delta;
  result.completed = inner.completed;
  AttributedGraph working = graph;
  for (std::size_t i = 0; i < inner.perturbations.size(); ++i) {
    Perturbation p = inner.perturbations[i];
    p.u = sub.to_original[p.u];
    if (p.kind != PerturbationKind::FeatureFlip) p.v = sub.to_original[p.v];
    if (p.kind != PerturbationKind::FeatureFlip && p.u > p.v) std::swap(p.u, p.v);
    apply_perturbation_inplace(working, p);
    result.perturbations.push_back(p);
    StepLog log = inner.steps[i];
    log.perturbation = p;
    result.steps.push_back(log);
  }
  result.poisoned = std::move(working);
  return result;
}

AttributedGraph replay_perturbations(const AttributedGraph& clean,
                                     const std::vector<Perturbation>& perturbations,
                                     const ConstraintToggles& toggles, int d_min,
                                     double tau) {
  AttributedGraph working = clean;
  if (perturbations.empty()) return working;
  ConstraintState state(clean, static_cast<int>(perturbations.size()), toggles, d_min, tau);
  for (std::size_t i = 0; i < perturbations.size(); ++i) {
    const Perturbation& p = perturbations[i];
    const AdmissibleResult adm = state.admissible(p);
    if (!adm.pass)
      throw std::runtime_error("replay mismatch at step " + std::to_string(i) + ": " +
                               admissible_verdict_name(adm.verdict));
    try {
      apply_perturbation_inplace(working, p);
    } catch (const std::exception& e) {
      throw std::runtime_error("replay mismatch at step " + std::to_string(i) + ": " +
                               e.what());
    }
    state.commit(p);
  }
  return working;
}

}  // namespace graphpoison
