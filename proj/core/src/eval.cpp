// SPDX-License-Identifier: Apache-2.0

#include "graphpoison/eval.hpp"
#include "graphpoison/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>
#include <sstream>

namespace graphpoison {

using nlohmann::json;

BootstrapCi bootstrap_mean_ci(const std::vector<double>& samples, int resamples,
                              std::uint64_t seed, double coverage) {
  if (samples.empty()) throw std::invalid_argument("bootstrap: empty sample");
  BootstrapCi ci;
  double sum = 0.0;
  for (double v : samples) sum += v;
  ci.mean = sum / samples.size();
  if (samples.size() == 1 || resamples < 2) {
    ci.low = ci.high = ci.mean;
    return ci;
  }

  Rng rng(derive_seed(seed, 0x626f6f74 /* boot */));
  std::vector<double> means(resamples);
  for (int b = 0; b < resamples; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i)
      s += samples[rng.uniform(samples.size())];
    means[b] = s / samples.size();
  }
  std::sort(means.begin(), means.end());

  // Type-7 (linear interpolation) percentile.
  auto percentile = [&](double q) {
    const double pos = q * (means.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, means.size() - 1);
    const double frac = pos - lo;
    return means[lo] * (1.0 - frac) + means[hi] * frac;
  };
  const double alpha = (1.0 - coverage) / 2.0;
  ci.low = std::min(percentile(alpha), ci.mean);
  ci.high = std::max(percentile(1.0 - alpha), ci.mean);
  return ci;
}

namespace {

// BFS distance u -> v; -1 when disconnected.
int bfs_distance(const AttributedGraph& g, int from, int to) {
  if (from == to) return 0;
  std::vector<int> dist(g.num_nodes, -1);
  std::queue<int> q;
  dist[from] = 0;
  q.push(from);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v = 0; v < g.num_nodes; ++v) {
      if (g.adjacency(u, v) != 0.0 && dist[v] < 0) {
        dist[v] = dist[u] + 1;
        if (v == to) return dist[v];
        q.push(v);
      }
    }
  }
  return -1;
}

}  // namespace

AnatomyStats attack_anatomy(const AttributedGraph& clean,
                            const std::vector<Perturbation>& perturbations) {
  AnatomyStats st;
  const std::vector<int> clean_degrees = clean.degrees();
  for (int d : clean_degrees) st.clean_degree_hist[d] += 1;

  AttributedGraph working = clean;
  for (const Perturbation& p : perturbations) {
    st.total += 1;
    switch (p.kind) {
      case PerturbationKind::FeatureFlip:
        st.feature_flips += 1;
        break;
      case PerturbationKind::EdgeInsert: {
        const bool same = clean.labels[p.u] == clean.labels[p.v];
        (same ? st.ins_same : st.ins_cross) += 1;
        // Path length measured in the graph state just before this insertion.
        st.insertion_path_hist[bfs_distance(working, p.u, p.v)] += 1;
        st.endpoint_degree_hist[clean_degrees[p.u]] += 1;
        st.endpoint_degree_hist[clean_degrees[p.v]] += 1;
        break;
      }
      case PerturbationKind::EdgeDelete: {
        const bool same = clean.labels[p.u] == clean.labels[p.v];
        (same ? st.del_same : st.del_cross) += 1;
        st.endpoint_degree_hist[clean_degrees[p.u]] += 1;
        st.endpoint_degree_hist[clean_degrees[p.v]] += 1;
        break;
      }
    }
    apply_perturbation_inplace(working, p);
  }
  return st;
}

namespace {

constexpr std::uint64_t kSplitTag = 0x53504c4954ULL;   // SPLIT
constexpr std::uint64_t kAttackTag = 0x4154544bULL;    // ATTK
constexpr std::uint64_t kVictimTag = 0x56494354ULL;    // VICT

std::uint64_t method_tag(const std::string& method, double budget) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : method) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  const auto scaled = static_cast<std::uint64_t>(std::llround(budget * 1e9));
  return mix64(h ^ scaled);
}

}  // namespace

EvalReport evaluate_protocol(const AttributedGraph& graph, const ProtocolOptions& options) {
  if (options.n_splits < 1 || options.n_trainings < 1)
    throw std::invalid_argument("evaluate_protocol: splits and trainings must be >= 1");
  EvalReport report;
  report.n_splits = options.n_splits;
  report.n_trainings = options.n_trainings;
  report.bootstrap_resamples = options.bootstrap_resamples;
  report.base_seed = options.base_seed;
  report.split_fraction = options.split_fraction;

  std::vector<DataSplit> splits;
  for (int s = 0; s < options.n_splits; ++s)
    splits.push_back(make_split(graph, options.split_fraction,
                                derive_seed(options.base_seed, kSplitTag, s)));

  for (const std::string& method : options.methods) {
    for (double budget : options.budgets) {
      EvalCell cell;
      cell.method = method;
      cell.budget_fraction = method == "clean" ? 0.0 : budget;
      try {
        for (int s = 0; s < options.n_splits; ++s) {
          AttributedGraph poisoned = graph;
          if (method != "clean") {
            AttackConfig atk = options.attack;
            atk.budget_fraction = budget;
            const auto parsed = parse_attack_method(method);
            if (!parsed) throw std::invalid_argument("unknown attack method '" + method + "'");
            atk.method = *parsed;
            atk.base_seed =
                derive_seed(options.base_seed, kAttackTag ^ method_tag(method, budget), s);
            const AttackResult result =
                options.subgraph_fraction < 1.0
                    ? subgraph_attack(graph, splits[s], atk, options.subgraph_fraction)
                    : run_attack(graph, splits[s], atk);
            poisoned = result.poisoned;
            const AnatomyStats a = attack_anatomy(graph, result.perturbations);
            cell.anatomy.total += a.total;
            cell.anatomy.del_same += a.del_same;
            cell.anatomy.del_cross += a.del_cross;
            cell.anatomy.ins_same += a.ins_same;
            cell.anatomy.ins_cross += a.ins_cross;
            cell.anatomy.feature_flips += a.feature_flips;
            for (auto [key, count] : a.insertion_path_hist)
              cell.anatomy.insertion_path_hist[key] += count;
            for (auto [key, count] : a.endpoint_degree_hist)
              cell.anatomy.endpoint_degree_hist[key] += count;
            if (s == 0) cell.anatomy.clean_degree_hist = a.clean_degree_hist;
          }
          for (int t = 0; t < options.n_trainings; ++t) {
            VictimConfig vc = options.victim;
            vc.seed = derive_seed(options.base_seed, kVictimTag,
                                  static_cast<std::uint64_t>(s) * 1000003ULL + t);
            const VictimWeights w = train_victim_gcn(poisoned, splits[s], vc);
            // Victim sees the poisoned structure; truth comes from held-out labels.
            cell.trials.push_back(misclassification(w, poisoned, splits[s]));
          }
        }
        const BootstrapCi ci = bootstrap_mean_ci(
            cell.trials, options.bootstrap_resamples,
            derive_seed(options.base_seed, method_tag(method, budget)));
        cell.mean_misclassification = ci.mean;
        cell.ci_low = ci.low;
        cell.ci_high = ci.high;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      report.cells.push_back(std::move(cell));
      if (method == "clean") break;  // budget-independent
    }
  }
  return report;
}

namespace {

json anatomy_json(const AnatomyStats& a) {
  json hist_paths = json::object();
  for (auto [key, count] : a.insertion_path_hist) hist_paths[std::to_string(key)] = count;
  json hist_deg = json::object();
  for (auto [key, count] : a.endpoint_degree_hist) hist_deg[std::to_string(key)] = count;
  json hist_clean = json::object();
  for (auto [key, count] : a.clean_degree_hist) hist_clean[std::to_string(key)] = count;
  return json{{"total", a.total},
              {"del_same_pct", a.pct(a.del_same)},
              {"del_cross_pct", a.pct(a.del_cross)},
              {"ins_same_pct", a.pct(a.ins_same)},
              {"ins_cross_pct", a.pct(a.ins_cross)},
              {"feature_flip_pct", a.pct(a.feature_flips)},
              {"insertion_path_hist", hist_paths},
              {"endpoint_degree_hist", hist_deg},
              {"clean_degree_hist", hist_clean}};
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  json cells = json::array();
  for (const EvalCell& c : report.cells) {
    json jc{{"method", c.method},
            {"budget_frac", c.budget_fraction},
            {"mean_misclassification", c.mean_misclassification},
            {"ci_low", c.ci_low},
            {"ci_high", c.ci_high},
            {"trials", c.trials},
            {"anatomy", anatomy_json(c.anatomy)}};
    if (!c.error.empty()) jc["error"] = c.error;
    cells.push_back(std::move(jc));
  }
  json j{{"cells", cells},
         {"n_splits", report.n_splits},
         {"n_trainings", report.n_trainings},
         {"bootstrap_resamples", report.bootstrap_resamples},
         {"base_seed", report.base_seed},
         {"split_fraction", report.split_fraction}};
  return j.dump(2) + "\n";
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "budget_frac,method,mean,ci_low,ci_high\n";
  char buf[128];
  for (const EvalCell& c : report.cells) {
    if (!c.error.empty()) continue;
    std::snprintf(buf, sizeof(buf), "%.17g,%s,%.17g,%.17g,%.17g\n", c.budget_fraction,
                  c.method.c_str(), c.mean_misclassification, c.ci_low, c.ci_high);
    out << buf;
  }
  return out.str();
}

std::string anatomy_to_json(const AnatomyStats& anatomy) {
  return anatomy_json(anatomy).dump(2) + "\n";
}

std::string report_to_table(const EvalReport& report) {
  std::vector<double> budgets;
  for (const EvalCell& c : report.cells)
    if (c.method != "clean" &&
        std::find(budgets.begin(), budgets.end(), c.budget_fraction) == budgets.end())
      budgets.push_back(c.budget_fraction);
  std::sort(budgets.begin(), budgets.end());

  std::ostringstream out;
  char buf[160];
  out << "misclassification rate (%), mean +/- 95% CI half-width\n";
  std::snprintf(buf, sizeof(buf), "%-14s", "method");
  out << buf;
  for (double b : budgets) {
    std::snprintf(buf, sizeof(buf), "  %11.0f%%", b * 100.0);
    out << buf;
  }
  out << '\n';
  for (const EvalCell& c : report.cells) {
    if (c.method == "clean") {
      std::snprintf(buf, sizeof(buf), "%-14s", "clean");
      out << buf;
      if (!c.error.empty()) {
        out << "  error: " << c.error << '\n';
        continue;
      }
      const double half = (c.ci_high - c.ci_low) / 2.0;
      std::snprintf(buf, sizeof(buf), "  %5.1f +/-%4.1f", 100.0 * c.mean_misclassification,
                    100.0 * half);
      out << buf << '\n';
    }
  }
  std::vector<std::string> methods;
  for (const EvalCell& c : report.cells)
    if (c.method != "clean" &&
        std::find(methods.begin(), methods.end(), c.method) == methods.end())
      methods.push_back(c.method);
  for (const std::string& m : methods) {
    std::snprintf(buf, sizeof(buf), "%-14s", m.c_str());
    out << buf;
    for (double b : budgets) {
      const EvalCell* cell = nullptr;
      for (const EvalCell& c : report.cells)
        if (c.method == m && c.budget_fraction == b) cell = &c;
      if (!cell) {
        out << "             -";
      } else if (!cell->error.empty()) {
        out << "         error";
      } else {
        const double half = (cell->ci_high - cell->ci_low) / 2.0;
        std::snprintf(buf, sizeof(buf), "  %5.1f +/-%4.1f",
                      100.0 * cell->mean_misclassification, 100.0 * half);
        out << buf;
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace graphpoison
