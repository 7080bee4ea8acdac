// SPDX-License-Identifier: Apache-2.0

#include "graphpoison/constraints.hpp"

#include <cmath>
#include <limits>

namespace graphpoison {

PowerLawStats PowerLawStats::from_degrees(std::span<const int> degrees, int d_min) {
  PowerLawStats s;
  for (int d : degrees) s.add_degree(d, d_min);
  return s;
}

void PowerLawStats::add_degree(int d, int d_min) {
  if (d >= d_min) {
    n_tail += 1.0;
    sum_log += std::log(static_cast<double>(d));
  }
}

void PowerLawStats::remove_degree(int d, int d_min) {
  if (d >= d_min) {
    n_tail -= 1.0;
    sum_log -= std::log(static_cast<double>(d));
  }
}

double powerlaw_alpha(const PowerLawStats& stats, int d_min) {
  if (d_min < 2) throw std::invalid_argument("powerlaw_alpha: d_min must be >= 2");
  if (stats.n_tail <= 0.0) throw std::invalid_argument("powerlaw_alpha: empty degree tail");
  const double denom = stats.sum_log - stats.n_tail * std::log(d_min - 0.5);
  return 1.0 + stats.n_tail / denom;
}

double powerlaw_alpha(std::span<const int> degrees, int d_min) {
  return powerlaw_alpha(PowerLawStats::from_degrees(degrees, d_min), d_min);
}

namespace {

// Log-likelihood of the tail sample under the continuous power law with
// exponent alpha: n*ln(alpha) + n*alpha*ln(d_min) - (alpha+1)*sum_log.
double log_likelihood(const PowerLawStats& s, double alpha, int d_min) {
  return s.n_tail * std::log(alpha) + s.n_tail * alpha * std::log(static_cast<double>(d_min)) -
         (alpha + 1.0) * s.sum_log;
}

}  // namespace

DegreeTestResult degree_test(const PowerLawStats& original, const PowerLawStats& candidate,
                             int d_min, double tau) {
  if (original.n_tail <= 0.0 || candidate.n_tail <= 0.0)
    throw std::invalid_argument("degree_test: empty degree tail");
  PowerLawStats combined;
  combined.n_tail = original.n_tail + candidate.n_tail;
  combined.sum_log = original.sum_log + candidate.sum_log;

  const double a_orig = powerlaw_alpha(original, d_min);
  const double a_cand = powerlaw_alpha(candidate, d_min);
  const double a_comb = powerlaw_alpha(combined, d_min);

  const double l_orig = log_likelihood(original, a_orig, d_min);
  const double l_cand = log_likelihood(candidate, a_cand, d_min);
  const double l_comb = log_likelihood(combined, a_comb, d_min);

  DegreeTestResult r;
  r.lambda_stat = -2.0 * l_comb + 2.0 * (l_orig + l_cand);
  r.pass = r.lambda_stat < tau;
  return r;
}

DegreeTestResult degree_test(std::span<const int> original_degrees,
                             std::span<const int> candidate_degrees, int d_min, double tau) {
  return degree_test(PowerLawStats::from_degrees(original_degrees, d_min),
                     PowerLawStats::from_degrees(candidate_degrees, d_min), d_min, tau);
}

const char* admissible_verdict_name(AdmissibleVerdict v) {
  switch (v) {
    case AdmissibleVerdict::Ok: return "ok";
    case AdmissibleVerdict::BudgetExhausted: return "budget";
    case AdmissibleVerdict::WouldCreateSingleton: return "singleton";
    case AdmissibleVerdict::DegreeTestFailed: return "degree-distribution";
  }
  return "?";
}

ConstraintState::ConstraintState(const AttributedGraph& original, int delta,
                                 ConstraintToggles toggles, int d_min, double tau)
    : toggles_(toggles), d_min_(d_min), tau_(tau), degrees_(original.degrees()) {
  if (delta < 1) throw std::invalid_argument("constraints: budget must be >= 1");
  if (d_min < 2) throw std::invalid_argument("constraints: d_min must be >= 2");
  budget_.delta = delta;
  original_ = PowerLawStats::from_degrees(degrees_, d_min_);
  current_ = original_;
}

PowerLawStats ConstraintState::toggled_stats(const Perturbation& p) const {
  const int shift = p.kind == PerturbationKind::EdgeInsert ? 1 : -1;
  PowerLawStats s = current_;
  s.remove_degree(degrees_[p.u], d_min_);
  s.add_degree(degrees_[p.u] + shift, d_min_);
  s.remove_degree(degrees_[p.v], d_min_);
  s.add_degree(degrees_[p.v] + shift, d_min_);
  return s;
}

AdmissibleResult ConstraintState::admissible(const Perturbation& p) const {
  AdmissibleResult r;
  r.lambda_stat = std::numeric_limits<double>::quiet_NaN();
  if (budget_.exhausted()) {
    r.verdict = AdmissibleVerdict::BudgetExhausted;
    return r;
  }
  // Feature flips only consume budget; degree and singleton rules are about
  // the observable graph structure.
  if (p.kind == PerturbationKind::FeatureFlip) {
    r.pass = true;
    return r;
  }
  if (toggles_.singleton_check && p.kind == PerturbationKind::EdgeDelete &&
      (degrees_[p.u] <= 1 || degrees_[p.v] <= 1)) {
    r.verdict = AdmissibleVerdict::WouldCreateSingleton;
    return r;
  }
  if (toggles_.degree_check) {
    const DegreeTestResult t = degree_test(original_, toggled_stats(p), d_min_, tau_);
    r.lambda_stat = t.lambda_stat;
    if (!t.pass) {
      r.verdict = AdmissibleVerdict::DegreeTestFailed;
      return r;
    }
  }
  r.pass = true;
  return r;
}

void ConstraintState::commit(const Perturbation& p) {
  if (budget_.exhausted()) throw std::runtime_error("constraints: commit beyond budget");
  budget_.used += 1;
  if (p.kind == PerturbationKind::FeatureFlip) return;
  current_ = toggled_stats(p);
  const int shift = p.kind == PerturbationKind::EdgeInsert ? 1 : -1;
  degrees_[p.u] += shift;
  degrees_[p.v] += shift;
}

}  // namespace graphpoison
