// SPDX-License-Identifier: Apache-2.0
//
// Evaluation protocol: repeat every attack over several labeled/unlabeled
// splits, train the victim several times per poisoned graph, and report
// misclassification means with bootstrap confidence intervals, plus
// edge-anatomy statistics of the chosen perturbations.

#pragma once

#include "graphpoison/attacks.hpp"
#include "graphpoison/victim.hpp"

#include <map>
#include <string>
#include <vector>

namespace graphpoison {

struct BootstrapCi {
  double mean = 0.0;
  double low = 0.0;
  double high = 0.0;
};

// Percentile bootstrap of the mean; bounds are clamped to bracket the mean.
BootstrapCi bootstrap_mean_ci(const std::vector<double>& samples, int resamples,
                              std::uint64_t seed, double coverage = 0.95);

struct AnatomyStats {
  long total = 0;  // perturbations counted
  long del_same = 0, del_cross = 0, ins_same = 0, ins_cross = 0, feature_flips = 0;
  // BFS shortest-path length between endpoints in the graph state just before
  // each insertion; -1 bucket collects disconnected pairs.
  std::map<int, long> insertion_path_hist;
  // Clean-graph degrees of the nodes picked as edge endpoints.
  std::map<int, long> endpoint_degree_hist;
  // Clean-graph degree distribution, for comparison.
  std::map<int, long> clean_degree_hist;

  double pct(long count) const { return total == 0 ? 0.0 : 100.0 * count / total; }
};

AnatomyStats attack_anatomy(const AttributedGraph& clean,
                            const std::vector<Perturbation>& perturbations);

struct EvalCell {
  std::string method;
  double budget_fraction = 0.0;
  double mean_misclassification = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<double> trials;  // splits x trainings, in protocol order
  AnatomyStats anatomy;        // aggregated over splits; empty for "clean"
  std::string error;           // non-empty if this cell failed
};

struct EvalReport {
  std::vector<EvalCell> cells;
  int n_splits = 0;
  int n_trainings = 0;
  int bootstrap_resamples = 0;
  std::uint64_t base_seed = 0;
  double split_fraction = 0.1;
};

struct ProtocolOptions {
  std::vector<std::string> methods;  // attack method names, or "clean"
  std::vector<double> budgets;
  int n_splits = 5;
  int n_trainings = 10;
  int bootstrap_resamples = 10000;
  double split_fraction = 0.1;
  double subgraph_fraction = 1.0;  // < 1: run attacks with subgraph knowledge
  VictimConfig victim;
  AttackConfig attack;  // method/budget_fraction/base_seed overridden per cell
  std::uint64_t base_seed = 0;
};

// Per-method failures are recorded in the cell and do not abort the run.
EvalReport evaluate_protocol(const AttributedGraph& graph, const ProtocolOptions& options);

std::string report_to_json(const EvalReport& report);
// budget_frac,method,mean,ci_low,ci_high rows, plot-ready.
std::string report_to_csv(const EvalReport& report);
std::string anatomy_to_json(const AnatomyStats& anatomy);
// Fixed-width method x budget table of mean +/- half-width, for stdout.
std::string report_to_table(const EvalReport& report);

}  // namespace graphpoison
