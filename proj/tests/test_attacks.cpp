// SPDX-License-Identifier: Apache-2.0

#include "graphpoison/attacks.hpp"
#include "graphpoison/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace graphpoison;

namespace {

// Hand-built 4-node fixture: a triangle plus a pendant, two classes, D=2.
AttributedGraph four_node_fixture() {
  AttributedGraph g;
  g.num_nodes = 4;
  g.feature_dim = 2;
  g.num_classes = 2;
  g.binary_features = true;
  g.adjacency = Tensor::from({{0, 1, 1, 0}, {1, 0, 1, 0}, {1, 1, 0, 1}, {0, 0, 1, 0}});
  g.features = Tensor::from({{1, 0}, {1, 0}, {0, 1}, {0, 1}});
  g.labels = {0, 0, 1, 1};
  return g;
}

DataSplit fixture_split() {
  DataSplit s;
  s.labeled = {0, 2};
  s.unlabeled = {1, 3};
  return s;
}

AttributedGraph sbm_fixture(int n, std::uint64_t seed) {
  SbmParams p;
  p.n = n;
  p.blocks = 2;
  p.p_in = 0.25;
  p.p_out = 0.04;
  p.feature_dim = 6;
  p.noise = 0.05;
  p.seed = seed;
  return generate_sbm(p);
}

// The positive pipeline scalar the gradient engines differentiate:
// -L_atk after training on the given (relaxed) adjacency.
double pipeline_value(const AttributedGraph& base, const Tensor& adjacency,
                      const DataSplit& split, const AttackerLossSpec& spec,
                      const InnerTrainConfig& inner) {
  AttributedGraph g = base;
  g.adjacency = adjacency;
  return -meta_gradient_exact(g, split, spec, inner).attacker_loss;
}

}  // namespace

TEST_CASE("exact meta-gradient matches finite differences over every adjacency entry") {
  const AttributedGraph g = four_node_fixture();
  const DataSplit split = fixture_split();
  InnerTrainConfig inner;
  inner.steps = 3;
  inner.hidden = 2;
  inner.learning_rate = 0.2;
  inner.momentum = 0.9;
  inner.init_seed = 5;

  std::vector<int> chat{g.labels[1], g.labels[3]};
  for (AttackerLossVariant variant :
       {AttackerLossVariant::Train, AttackerLossVariant::Self}) {
    AttackerLossSpec spec;
    spec.variant = variant;
    spec.predicted_labels = make_indices(chat);

    const MetaGradient mg = meta_gradient_exact(g, split, spec, inner);
    const Tensor fd = finite_difference_gradient(
        [&](const Tensor& a) { return pipeline_value(g, a, split, spec, inner); },
        g.adjacency, 1e-5);

    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const double denom = std::max(std::abs(fd(i, j)), 1e-6);
        CHECK(std::abs(mg.raw(i, j) - fd(i, j)) / denom < 1e-4);
      }
    // diagonal of the symmetrized gradient is masked
    for (int i = 0; i < 4; ++i) CHECK(mg.symmetrized(i, i) == 0.0);
    // symmetrized = (G + G^T)/2
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        if (i != j)
          CHECK(mg.symmetrized(i, j) ==
                doctest::Approx(0.5 * (mg.raw(i, j) + mg.raw(j, i))).epsilon(1e-15));
  }
}

TEST_CASE("exact meta-gradient with five inner steps and oracle loss") {
  const AttributedGraph g = four_node_fixture();
  const DataSplit split = fixture_split();
  InnerTrainConfig inner;
  inner.steps = 5;
  inner.hidden = 2;
  inner.learning_rate = 0.15;
  inner.init_seed = 21;
  AttackerLossSpec spec;
  spec.variant = AttackerLossVariant::Oracle;
  spec.oracle_labels = make_indices(g.labels);

  const MetaGradient mg = meta_gradient_exact(g, split, spec, inner);
  const Tensor fd = finite_difference_gradient(
      [&](const Tensor& a) { return pipeline_value(g, a, split, spec, inner); },
      g.adjacency, 1e-5);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(std::abs(mg.raw(i, j) - fd(i, j)) / std::max(std::abs(fd(i, j)), 1e-6) < 1e-4);
}

TEST_CASE("single-matrix surrogate meta-gradient matches finite differences") {
  const AttributedGraph g = four_node_fixture();
  const DataSplit split = fixture_split();
  InnerTrainConfig inner;
  inner.steps = 3;
  inner.single_matrix = true;
  inner.learning_rate = 0.2;
  inner.momentum = 0.9;
  inner.init_seed = 29;
  AttackerLossSpec spec;
  spec.variant = AttackerLossVariant::Train;

  const MetaGradient mg = meta_gradient_exact(g, split, spec, inner);
  const Tensor fd = finite_difference_gradient(
      [&](const Tensor& a) { return pipeline_value(g, a, split, spec, inner); },
      g.adjacency, 1e-5);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(std::abs(mg.raw(i, j) - fd(i, j)) / std::max(std::abs(fd(i, j)), 1e-6) < 1e-4);

  // and the attack loop runs end to end in this mode
  AttackConfig cfg;
  cfg.method = AttackMethod::MetaTrain;
  cfg.budget_fraction = 0.5;
  cfg.inner = inner;
  cfg.toggles.degree_check = false;
  const AttackResult r = run_attack(g, split, cfg);
  CHECK(static_cast<int>(r.perturbations.size()) == r.delta);
}

TEST_CASE("T=0 meta-gradient equals the plain gradient at theta_0") {
  const AttributedGraph g = four_node_fixture();
  const DataSplit split = fixture_split();
  InnerTrainConfig inner;
  inner.steps = 0;
  inner.hidden = 2;
  inner.init_seed = 9;
  AttackerLossSpec spec;
  spec.variant = AttackerLossVariant::Train;

  const MetaGradient exact = meta_gradient_exact(g, split, spec, inner);
  const MetaGradient first = first_order_gradient(g, split, spec, inner);
  CHECK(exact.raw.max_abs_diff(first.raw) == 0.0);
  CHECK(exact.attacker_loss == first.attacker_loss);
}

TEST_CASE("meta-oracle differs from meta-self only in the label source") {
  const AttributedGraph g = four_node_fixture();
  const DataSplit split = fixture_split();
  InnerTrainConfig inner;
  inner.steps = 3;
  inner.hidden = 2;
  inner.init_seed = 11;

  AttackerLossSpec self_truth;
  self_truth.variant = AttackerLossVariant::Self;
  self_truth.predicted_labels = make_indices({g.labels[1], g.labels[3]});
  AttackerLossSpec oracle;
  oracle.variant = AttackerLossVariant::Oracle;
  oracle.oracle_labels = make_indices(g.labels);

  const MetaGradient a = meta_gradient_exact(g, split, self_truth, inner);
  const MetaGradient b = meta_gradient_exact(g, split, oracle, inner);
  CHECK(a.raw.max_abs_diff(b.raw) == 0.0);
}

TEST_CASE("approximate meta-gradient is exactly linear in lambda") {
  const AttributedGraph g = sbm_fixture(30, 31);
  const DataSplit split = make_split(g, 0.2, 7);
  InnerTrainConfig inner;
  inner.steps = 8;
  inner.init_seed = 13;
  std::vector<int> chat(split.unlabeled.size());
  for (std::size_t i = 0; i < chat.size(); ++i) chat[i] = static_cast<int>(i % 2);
  const IndexVec chat_idx = make_indices(chat);

  const MetaGradient g1 = meta_gradient_approx(g, split, 1.0, chat_idx, inner);
  const MetaGradient g0 = meta_gradient_approx(g, split, 0.0, chat_idx, inner);
  const MetaGradient gh = meta_gradient_approx(g, split, 0.5, chat_idx, inner);

  const Tensor avg = kernels::add(kernels::scale(g1.raw, 0.5), kernels::scale(g0.raw, 0.5));
  CHECK(gh.raw.max_abs_diff(avg) < 1e-12);

  // missing predicted labels only matter when lambda < 1
  CHECK_THROWS(meta_gradient_approx(g, split, 0.5, nullptr, inner));
  CHECK_NOTHROW(meta_gradient_approx(g, split, 1.0, nullptr, inner));
}

TEST_CASE("first-order equals a single detached-snapshot gradient at theta_T") {
  const AttributedGraph g = four_node_fixture();
  const DataSplit split = fixture_split();
  InnerTrainConfig inner;
  inner.steps = 0;  // trajectory holds only theta_0
  inner.hidden = 2;
  inner.init_seed = 17;
  AttackerLossSpec spec;
  spec.variant = AttackerLossVariant::Self;
  spec.predicted_labels = make_indices({0, 1});

  // With T=0 the lambda=0 accumulation is exactly the t=0 term, which is the
  // first-order gradient at theta_0.
  const MetaGradient fo = first_order_gradient(g, split, spec, inner);
  const MetaGradient ap = meta_gradient_approx(g, split, 0.0, spec.predicted_labels, inner);
  CHECK(fo.raw.max_abs_diff(ap.raw) == 0.0);
}

TEST_CASE("zero features give a zero first-order gradient") {
  AttributedGraph g = four_node_fixture();
  g.features = Tensor::zeros(4, 2);
  const DataSplit split = fixture_split();
  InnerTrainConfig inner;
  inner.steps = 2;
  inner.hidden = 2;
  inner.init_seed = 19;
  AttackerLossSpec spec;
  spec.variant = AttackerLossVariant::Train;
  const MetaGradient mg = first_order_gradient(g, split, spec, inner);
  CHECK(mg.raw.max_abs_diff(Tensor::zeros(4, 4)) == 0.0);
}

TEST_CASE("approximate gradient agrees in sign with the exact one on top entries") {
  const AttributedGraph g = four_node_fixture();
  const DataSplit split = fixture_split();
  InnerTrainConfig inner;
  inner.steps = 4;
  inner.hidden = 2;
  inner.init_seed = 23;
  AttackerLossSpec spec;
  spec.variant = AttackerLossVariant::Train;

  const MetaGradient exact = meta_gradient_exact(g, split, spec, inner);
  const MetaGradient approx = meta_gradient_approx(g, split, 1.0, nullptr, inner);

  const ScoreMatrix s_exact = score_matrix(exact.symmetrized, g.adjacency);
  const ScoreMatrix s_approx = score_matrix(approx.symmetrized, g.adjacency);

  // rank the exact scores by magnitude, compare signs on the top entries
  std::vector<std::tuple<double, int, int>> ranked;
  for (int u = 0; u < 4; ++u)
    for (int v = u + 1; v < 4; ++v)
      ranked.emplace_back(std::abs(s_exact.s(u, v)), u, v);
  std::sort(ranked.rbegin(), ranked.rend());
  int agree = 0, total = 0;
  for (std::size_t i = 0; i < std::min<std::size_t>(ranked.size(), 50); ++i) {
    const auto [mag, u, v] = ranked[i];
    (void)mag;
    ++total;
    if (std::signbit(s_exact.s(u, v)) == std::signbit(s_approx.s(u, v))) ++agree;
  }
  CHECK(static_cast<double>(agree) / total >= 0.6);
}

TEST_CASE("score matrix formula") {
  const Tensor grad = Tensor::from({{0.0, 0.7}, {0.7, 0.0}});
  const Tensor adj0 = Tensor::from({{0, 0}, {0, 0}});
  const Tensor adj1 = Tensor::from({{0, 1}, {1, 0}});
  CHECK(score_matrix(grad, adj0).s(0, 1) == doctest::Approx(0.7));   // insertion candidate
  CHECK(score_matrix(grad, adj1).s(0, 1) == doctest::Approx(-0.7));  // flipped sign on edge

  const Tensor gneg = Tensor::from({{0.0, -0.3}, {-0.3, 0.0}});
  CHECK(score_matrix(gneg, adj1).s(0, 1) == doctest::Approx(0.3));  // deletion attractive

  // diagonal masked
  const Tensor gd = Tensor::from({{5.0, 0.0}, {0.0, 5.0}});
  CHECK(score_matrix(gd, adj0).s(0, 0) == 0.0);
  CHECK(score_matrix(gd, adj0).s(1, 1) == 0.0);
}

TEST_CASE("greedy_select skips inadmissible and used candidates") {
  // path 0-1-2-3; nodes 0 and 3 have degree 1
  AttributedGraph g;
  g.num_nodes = 4;
  g.feature_dim = 1;
  g.num_classes = 2;
  g.adjacency = Tensor::from({{0, 1, 0, 0}, {1, 0, 1, 0}, {0, 1, 0, 1}, {0, 0, 1, 0}});
  g.features = Tensor::full(4, 1, 1.0);
  g.labels = {0, 1, 0, 1};

  ConstraintToggles toggles;
  toggles.degree_check = false;
  ConstraintState state(g, 10, toggles);

  // deleting (0,1) scores highest but would create a singleton; next best is
  // the (0,2) insertion
  ScoreMatrix scores;
  scores.s = Tensor::zeros(4, 4);
  scores.s(0, 1) = scores.s(1, 0) = 5.0;
  scores.s(0, 2) = scores.s(2, 0) = 3.0;
  scores.s(1, 2) = scores.s(2, 1) = 1.0;

  std::unordered_set<long> used_pairs, used_flips;
  auto sel = greedy_select(scores, nullptr, 1.0, g, state, used_pairs, used_flips);
  REQUIRE(sel.has_value());
  CHECK(sel->perturbation.kind == PerturbationKind::EdgeInsert);
  CHECK(sel->perturbation.u == 0);
  CHECK(sel->perturbation.v == 2);

  // all-negative scores still yield the max admissible candidate
  ScoreMatrix negative;
  negative.s = Tensor::full(4, 4, -1.0);
  negative.s(0, 2) = negative.s(2, 0) = -0.5;
  auto sel2 = greedy_select(negative, nullptr, 1.0, g, state, used_pairs, used_flips);
  REQUIRE(sel2.has_value());
  CHECK(sel2->perturbation.score == doctest::Approx(-0.5));

  // ties break lexicographically on (u, v)
  ScoreMatrix ties;
  ties.s = Tensor::zeros(4, 4);
  ties.s(0, 2) = ties.s(2, 0) = 2.0;
  ties.s(0, 3) = ties.s(3, 0) = 2.0;
  auto sel3 = greedy_select(ties, nullptr, 1.0, g, state, used_pairs, used_flips);
  REQUIRE(sel3.has_value());
  CHECK(sel3->perturbation.u == 0);
  CHECK(sel3->perturbation.v == 2);

  // exhausting every candidate returns nullopt
  std::unordered_set<long> all_pairs;
  for (int u = 0; u < 4; ++u)
    for (int v = u + 1; v < 4; ++v) all_pairs.insert(static_cast<long>(u) * 4 + v);
  CHECK_FALSE(
      greedy_select(scores, nullptr, 1.0, g, state, all_pairs, used_flips).has_value());
}

TEST_CASE("run_attack: budget zero returns the clean graph") {
  const AttributedGraph g = sbm_fixture(24, 3);
  const DataSplit split = make_split(g, 0.25, 3);
  AttackConfig cfg;
  cfg.method = AttackMethod::MetaTrain;
  cfg.budget_fraction = 0.0;
  const AttackResult r = run_attack(g, split, cfg);
  CHECK(r.perturbations.empty());
  CHECK(r.poisoned.adjacency.max_abs_diff(g.adjacency) == 0.0);
}

TEST_CASE("run_attack is deterministic and never revisits a pair") {
  const AttributedGraph g = sbm_fixture(24, 5);
  const DataSplit split = make_split(g, 0.25, 5);
  AttackConfig cfg;
  cfg.method = AttackMethod::MetaSelf;
  cfg.budget_fraction = 0.1;
  cfg.inner.steps = 6;
  cfg.inner.hidden = 4;
  cfg.base_seed = 77;

  const AttackResult a = run_attack(g, split, cfg);
  const AttackResult b = run_attack(g, split, cfg);
  REQUIRE(a.perturbations.size() == b.perturbations.size());
  CHECK(a.delta == attack_budget(cfg, g));
  std::set<std::pair<int, int>> seen;
  for (std::size_t i = 0; i < a.perturbations.size(); ++i) {
    CHECK(a.perturbations[i].u == b.perturbations[i].u);
    CHECK(a.perturbations[i].v == b.perturbations[i].v);
    CHECK(a.perturbations[i].kind == b.perturbations[i].kind);
    const auto key = std::minmax(a.perturbations[i].u, a.perturbations[i].v);
    CHECK(seen.insert({key.first, key.second}).second);  // distinct pairs
  }

  // replaying the list on the clean graph reproduces the poisoned graph
  const AttributedGraph replayed =
      replay_perturbations(g, a.perturbations, cfg.toggles, cfg.d_min, cfg.tau);
  CHECK(replayed.adjacency.max_abs_diff(a.poisoned.adjacency) == 0.0);

  // budget accounting: exactly 2*delta adjacency entries changed
  int changed = 0;
  for (int i = 0; i < g.num_nodes; ++i)
    for (int j = 0; j < g.num_nodes; ++j)
      if (g.adjacency(i, j) != a.poisoned.adjacency(i, j)) ++changed;
  CHECK(changed == 2 * a.delta);
}

TEST_CASE("run_attack dispatches every gradient method") {
  const AttributedGraph g = sbm_fixture(20, 6);
  const DataSplit split = make_split(g, 0.25, 11);
  for (AttackMethod m :
       {AttackMethod::MetaTrain, AttackMethod::MetaOracle, AttackMethod::AMetaSelf,
        AttackMethod::AMetaTrain, AttackMethod::AMetaBoth, AttackMethod::FirstOrder,
        AttackMethod::Dice}) {
    AttackConfig cfg;
    cfg.method = m;
    cfg.budget_fraction = 0.05;
    cfg.inner.steps = 4;
    cfg.inner.hidden = 4;
    cfg.base_seed = 3;
    const AttackResult r = run_attack(g, split, cfg);
    CHECK(static_cast<int>(r.perturbations.size()) == r.delta);
    CHECK(r.completed);
  }
}

TEST_CASE("dice on a one-class graph only deletes") {
  AttributedGraph g = sbm_fixture(20, 7);
  for (int& l : g.labels) l = 0;
  g.num_classes = 1;
  ConstraintToggles toggles;
  toggles.degree_check = false;  // a 20-node tail rejects nearly any edit
  const AttackResult r = dice_attack(g, 3, toggles, 2, 0.004, 5);
  for (const Perturbation& p : r.perturbations)
    CHECK(p.kind == PerturbationKind::EdgeDelete);
}

TEST_CASE("dice on a complete bipartite two-class graph is infeasible") {
  AttributedGraph g;
  const int half = 3;
  g.num_nodes = 2 * half;
  g.feature_dim = 1;
  g.num_classes = 2;
  g.adjacency = Tensor(g.num_nodes, g.num_nodes);
  g.features = Tensor::full(g.num_nodes, 1, 1.0);
  g.labels.resize(g.num_nodes);
  for (int u = 0; u < half; ++u) {
    g.labels[u] = 0;
    g.labels[half + u] = 1;
    for (int v = 0; v < half; ++v) {
      g.adjacency(u, half + v) = 1.0;
      g.adjacency(half + v, u) = 1.0;
    }
  }
  CHECK_THROWS_WITH_AS(dice_attack(g, 1, ConstraintToggles{}, 2, 0.004, 1),
                       doctest::Contains("no feasible action"), std::runtime_error);
}

TEST_CASE("dice respects labels: deletions within, insertions across") {
  const AttributedGraph g = sbm_fixture(30, 8);
  const AttackResult r = dice_attack(g, 10, ConstraintToggles{}, 2, 0.004, 9);
  for (const Perturbation& p : r.perturbations) {
    if (p.kind == PerturbationKind::EdgeDelete)
      CHECK(g.labels[p.u] == g.labels[p.v]);
    else
      CHECK(g.labels[p.u] != g.labels[p.v]);
  }
}

TEST_CASE("subgraph attack with fraction 1 equals the full attack") {
  const AttributedGraph g = sbm_fixture(20, 9);
  const DataSplit split = make_split(g, 0.25, 13);
  AttackConfig cfg;
  cfg.method = AttackMethod::MetaTrain;
  cfg.budget_fraction = 0.08;
  cfg.inner.steps = 3;
  cfg.inner.hidden = 4;
  cfg.base_seed = 0;
  const AttackResult full = run_attack(g, split, cfg);
  const AttackResult sub = subgraph_attack(g, split, cfg, 1.0);
  REQUIRE(full.perturbations.size() == sub.perturbations.size());
  for (std::size_t i = 0; i < full.perturbations.size(); ++i) {
    CHECK(full.perturbations[i].u == sub.perturbations[i].u);
    CHECK(full.perturbations[i].v == sub.perturbations[i].v);
  }
  CHECK(full.poisoned.adjacency.max_abs_diff(sub.poisoned.adjacency) == 0.0);
}

TEST_CASE("subgraph attack endpoints stay inside the subgraph") {
  const AttributedGraph g = sbm_fixture(40, 10);
  const DataSplit split = make_split(g, 0.1, 17);
  AttackConfig cfg;
  cfg.method = AttackMethod::AMetaTrain;
  cfg.budget_fraction = 0.08;
  cfg.inner.steps = 4;
  cfg.inner.hidden = 4;
  cfg.base_seed = 5;

  const SubgraphExtraction sub =
      extract_attack_subgraph(g, split, 0.5, derive_seed(cfg.base_seed, 0x535542ULL));
  std::set<int> allowed(sub.to_original.begin(), sub.to_original.end());

  const AttackResult r = subgraph_attack(g, split, cfg, 0.5);
  CHECK(r.delta == std::lround(cfg.budget_fraction * sub.graph.edge_count()));
  for (const Perturbation& p : r.perturbations) {
    CHECK(allowed.count(p.u) == 1);
    CHECK(allowed.count(p.v) == 1);
  }
  // applying the returned list to the clean graph reproduces the poisoned one
  AttributedGraph replay = g;
  for (const Perturbation& p : r.perturbations) apply_perturbation_inplace(replay, p);
  CHECK(replay.adjacency.max_abs_diff(r.poisoned.adjacency) == 0.0);
}

TEST_CASE("feature flips enter the shared ranking when enabled") {
  AttributedGraph g = four_node_fixture();
  const DataSplit split = fixture_split();
  AttackConfig cfg;
  cfg.method = AttackMethod::MetaTrain;
  cfg.budget_fraction = 0.75;  // 4 edges -> delta 3
  cfg.inner.steps = 3;
  cfg.inner.hidden = 2;
  cfg.include_feature_flips = true;
  cfg.toggles.degree_check = false;
  cfg.base_seed = 1;
  const AttackResult r = run_attack(g, split, cfg);
  CHECK(static_cast<int>(r.perturbations.size()) == r.delta);
  // replay including flips reproduces features and adjacency
  AttributedGraph replay = g;
  for (const Perturbation& p : r.perturbations) apply_perturbation_inplace(replay, p);
  CHECK(replay.adjacency.max_abs_diff(r.poisoned.adjacency) == 0.0);
  CHECK(replay.features.max_abs_diff(r.poisoned.features) == 0.0);
}

TEST_CASE("run_attack terminates early when no admissible candidate remains") {
  // triangle: only three pairs exist, all edges present; budget larger
  AttributedGraph g;
  g.num_nodes = 3;
  g.feature_dim = 2;
  g.num_classes = 2;
  g.binary_features = true;
  g.adjacency = Tensor::from({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
  g.features = Tensor::from({{1, 0}, {1, 0}, {0, 1}});
  g.labels = {0, 0, 1};
  DataSplit split;
  split.labeled = {0, 2};
  split.unlabeled = {1};

  AttackConfig cfg;
  cfg.method = AttackMethod::MetaTrain;
  cfg.budget_fraction = 2.0;  // delta 6 > 3 available pairs
  cfg.inner.steps = 2;
  cfg.inner.hidden = 2;
  cfg.toggles.degree_check = false;
  const AttackResult r = run_attack(g, split, cfg);
  CHECK_FALSE(r.completed);
  CHECK(r.perturbations.size() < static_cast<std::size_t>(r.delta));
}

TEST_CASE("surrogate training surfaces divergence with the step index") {
  // two labeled nodes share identical features and neighborhoods but carry
  // opposite labels; with an absurd learning rate the model saturates
  // confidently wrong on one of them
  AttributedGraph g;
  g.num_nodes = 4;
  g.feature_dim = 2;
  g.num_classes = 2;
  g.adjacency = Tensor::from({{0, 1, 1, 1}, {1, 0, 1, 1}, {1, 1, 0, 0}, {1, 1, 0, 0}});
  g.features = Tensor::from({{1, 1}, {1, 1}, {1, 0}, {0, 1}});
  g.labels = {0, 1, 0, 1};
  DataSplit split;
  split.labeled = {0, 1};
  split.unlabeled = {2, 3};
  InnerTrainConfig inner;
  inner.steps = 50;
  inner.hidden = 2;
  inner.learning_rate = 1e8;
  inner.momentum = 0.9;
  inner.init_seed = 1;
  try {
    train_surrogate(g, split, inner);
    FAIL("expected divergence");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("attack method names round-trip") {
  for (AttackMethod m :
       {AttackMethod::MetaSelf, AttackMethod::MetaTrain, AttackMethod::MetaOracle,
        AttackMethod::AMetaSelf, AttackMethod::AMetaTrain, AttackMethod::AMetaBoth,
        AttackMethod::FirstOrder, AttackMethod::Dice}) {
    const auto parsed = parse_attack_method(attack_method_name(m));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == m);
  }
  CHECK_FALSE(parse_attack_method("nonsense").has_value());
}
