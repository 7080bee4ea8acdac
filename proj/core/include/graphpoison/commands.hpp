// SPDX-License-Identifier: Apache-2.0
//
// Command implementations behind the CLI: attack, evaluate, analyze. Each is
// a pure function of (config, input files); re-runs produce byte-identical
// outputs. All randomness derives from the single base seed.

#pragma once

#include "graphpoison/eval.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace graphpoison {

struct RunConfig {
  // Dataset: either the three files or an SBM generator spec.
  std::string dataset_edges;
  std::string dataset_features;
  std::string dataset_labels;
  bool use_sbm = false;
  int sbm_n = 500;
  int sbm_k = 2;
  double sbm_p_in = 0.05;
  double sbm_p_out = 0.002;
  double sbm_noise = 0.05;
  int sbm_feature_dim = 32;

  std::string split_file;  // optional; otherwise derived from the seed
  double split_fraction = 0.1;

  std::vector<std::string> methods{"meta-self"};
  std::vector<double> budgets{0.05};
  double lambda = 0.5;
  int inner_steps = 100;
  double inner_lr = 0.1;
  double inner_momentum = 0.9;
  int surrogate_hidden = 16;
  bool surrogate_single_matrix = false;

  double tau = 0.004;
  int d_min = 2;
  bool degree_check = true;
  bool singleton_check = true;
  double subgraph_fraction = 1.0;
  bool with_feature_flips = false;
  double feature_flip_weight = 1.0;

  int n_splits = 5;
  int n_trainings = 10;
  int bootstrap_resamples = 10000;

  int victim_hidden = 16;
  double victim_dropout = 0.5;
  double victim_weight_decay = 5e-4;
  double victim_lr = 0.01;
  int victim_epochs = 200;
  int victim_patience = 0;

  std::uint64_t seed = 0;
  std::string out_dir = "out";

  // analyze inputs
  std::string perturbations_file;
  bool run_weight_transfer = false;

  void validate_common() const;
  AttackConfig attack_config() const;
  VictimConfig victim_config() const;

  // Flat key=value serialization; the echo is itself a valid --config file.
  std::string to_kv() const;
  static RunConfig from_kv_file(const std::filesystem::path& path);
};

// Loads the configured dataset (files or SBM) and the configured split.
AttributedGraph load_configured_graph(const RunConfig& cfg);
DataSplit load_configured_split(const RunConfig& cfg, const AttributedGraph& graph,
                                int split_index = 0);

// Writes perturbations.csv, poisoned_edges.tsv, split.tsv, steps.log and
// config_echo.cfg under out_dir.
int cmd_attack(const RunConfig& cfg);
// Writes report.json and curves.csv under out_dir; prints a summary table.
int cmd_evaluate(const RunConfig& cfg);
// Writes anatomy.json (and weight_transfer.json on request) under out_dir.
int cmd_analyze(const RunConfig& cfg);

// Perturbation CSV: step,kind,u,v,score,lambda_stat (lambda_stat empty when
// the degree check was off).
std::string perturbations_to_csv(const AttackResult& result, bool degree_check);
std::vector<Perturbation> perturbations_from_csv(const std::filesystem::path& path);

}  // namespace graphpoison
