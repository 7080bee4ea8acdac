// SPDX-License-Identifier: Apache-2.0
//
// The admissibility predicate over candidate perturbations: perturbation
// budget, the no-singleton rule, and a degree-distribution unnoticeability
// test. The test fits a continuous power law to the degree tails (d >= d_min)
// of the original and the edited graph and compares the pooled fit against
// the separate fits with a likelihood-ratio statistic; edits pass while the
// statistic stays below tau. Sufficient statistics make the per-edit check
// O(1): an edge toggle moves at most two nodes' tail contributions.

#pragma once

#include "graphpoison/graph.hpp"

#include <span>

namespace graphpoison {

// Sufficient statistics of the degree tail d >= d_min.
struct PowerLawStats {
  double n_tail = 0.0;
  double sum_log = 0.0;  // sum of ln(d) over the tail

  static PowerLawStats from_degrees(std::span<const int> degrees, int d_min);
  void add_degree(int d, int d_min);
  void remove_degree(int d, int d_min);
};

// Continuous maximum-likelihood exponent of the tail:
//   alpha = 1 + n / sum(ln(d_i / (d_min - 0.5)))
double powerlaw_alpha(const PowerLawStats& stats, int d_min);
double powerlaw_alpha(std::span<const int> degrees, int d_min);

struct DegreeTestResult {
  double lambda_stat = 0.0;
  bool pass = true;
};

// Likelihood-ratio statistic between the original sample and a candidate
// sample: Lambda = -2*l_combined + 2*(l_orig + l_cand), each term at its own
// ML exponent. Passes iff Lambda < tau.
DegreeTestResult degree_test(const PowerLawStats& original, const PowerLawStats& candidate,
                             int d_min, double tau);
DegreeTestResult degree_test(std::span<const int> original_degrees,
                             std::span<const int> candidate_degrees, int d_min, double tau);

struct BudgetState {
  int delta = 0;  // max perturbations
  int used = 0;
  bool exhausted() const { return used >= delta; }
};

struct ConstraintToggles {
  bool singleton_check = true;
  bool degree_check = true;
};

enum class AdmissibleVerdict { Ok, BudgetExhausted, WouldCreateSingleton, DegreeTestFailed };

const char* admissible_verdict_name(AdmissibleVerdict v);

struct AdmissibleResult {
  bool pass = false;
  AdmissibleVerdict verdict = AdmissibleVerdict::Ok;
  // Lambda for the hypothetical post-edit degree sequence; NaN when the
  // degree check is disabled or not applicable (feature flips).
  double lambda_stat = 0.0;
};

// Frozen original-graph statistics plus the evolving state of the graph under
// attack. admissible() is pure; the attack loop calls commit() after applying
// a perturbation. Confined to the attack thread.
class ConstraintState {
 public:
  ConstraintState(const AttributedGraph& original, int delta, ConstraintToggles toggles,
                  int d_min = 2, double tau = 0.004);

  AdmissibleResult admissible(const Perturbation& p) const;
  void commit(const Perturbation& p);

  const BudgetState& budget() const { return budget_; }
  const ConstraintToggles& toggles() const { return toggles_; }
  int degree(int u) const { return degrees_[u]; }
  const std::vector<int>& degrees() const { return degrees_; }
  int d_min() const { return d_min_; }
  double tau() const { return tau_; }
  const PowerLawStats& original_stats() const { return original_; }
  const PowerLawStats& current_stats() const { return current_; }

 private:
  PowerLawStats toggled_stats(const Perturbation& p) const;

  BudgetState budget_;
  ConstraintToggles toggles_;
  int d_min_;
  double tau_;
  PowerLawStats original_;  // frozen at construction
  PowerLawStats current_;
  std::vector<int> degrees_;
};

}  // namespace graphpoison
