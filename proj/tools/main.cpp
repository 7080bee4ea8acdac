// SPDX-License-Identifier: Apache-2.0
//
// graphpoison CLI: poison a graph's structure through a trained surrogate,
// evaluate the damage on a victim GCN, and analyze the chosen perturbations.

#include "graphpoison/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using graphpoison::RunConfig;

void add_dataset_options(CLI::App* cmd, RunConfig& cfg, std::string& sbm_spec) {
  cmd->add_option("--dataset-edges", cfg.dataset_edges, "edges file (u<TAB>v per line)");
  cmd->add_option("--dataset-features", cfg.dataset_features, "sparse feature triplets file");
  cmd->add_option("--dataset-labels", cfg.dataset_labels, "labels file (node<TAB>class)");
  cmd->add_option("--sbm", sbm_spec,
                  "generate a stochastic-block-model graph: n,k,p_in,p_out,noise");
  cmd->add_option("--sbm-feature-dim", cfg.sbm_feature_dim, "feature dimension for --sbm");
  cmd->add_option("--split-file", cfg.split_file, "fixed split file (node<TAB>{L|U})");
  cmd->add_option("--split-fraction", cfg.split_fraction, "labeled fraction of nodes");
  cmd->add_option("--seed", cfg.seed, "base seed; all randomness derives from it");
  cmd->add_option("--out", cfg.out_dir, "output directory");
}

void add_attack_options(CLI::App* cmd, RunConfig& cfg, std::string& methods,
                        std::string& budgets) {
  cmd->add_option("--method", methods,
                  "comma-separated methods: meta-self, meta-train, meta-oracle, "
                  "a-meta-self, a-meta-train, a-meta-both, first-order, dice, clean");
  cmd->add_option("--budget-frac", budgets, "comma-separated budget fractions of E_LCC");
  cmd->add_option("--lambda", cfg.lambda, "objective weight for a-meta-both");
  cmd->add_option("--inner-steps", cfg.inner_steps, "surrogate training steps T");
  cmd->add_option("--inner-lr", cfg.inner_lr, "surrogate learning rate");
  cmd->add_option("--inner-momentum", cfg.inner_momentum, "surrogate momentum");
  cmd->add_option("--hidden", cfg.surrogate_hidden, "surrogate hidden width");
  cmd->add_flag("--surrogate-single-matrix", cfg.surrogate_single_matrix,
                "collapse the surrogate to one DxK matrix");
  cmd->add_option("--tau", cfg.tau, "degree-test critical value");
  cmd->add_option("--dmin", cfg.d_min, "minimum degree for the power-law tail");
  cmd->add_flag_callback(
      "--no-degree-check", [&cfg] { cfg.degree_check = false; },
      "disable the degree-distribution test");
  cmd->add_flag_callback(
      "--no-singleton-check", [&cfg] { cfg.singleton_check = false; },
      "allow disconnecting nodes");
  cmd->add_option("--subgraph-fraction", cfg.subgraph_fraction,
                  "attack only a grown subgraph of this node fraction");
  cmd->add_flag("--with-feature-flips", cfg.with_feature_flips,
                "let binary feature flips compete with edge edits");
  cmd->add_option("--feature-flip-weight", cfg.feature_flip_weight,
                  "score multiplier for feature flips");
}

void add_victim_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--victim-hidden", cfg.victim_hidden, "victim hidden width");
  cmd->add_option("--victim-dropout", cfg.victim_dropout, "victim dropout rate");
  cmd->add_option("--victim-weight-decay", cfg.victim_weight_decay,
                  "victim first-layer L2 coefficient");
  cmd->add_option("--victim-lr", cfg.victim_lr, "victim learning rate");
  cmd->add_option("--victim-epochs", cfg.victim_epochs, "victim training epochs");
  cmd->add_option("--victim-patience", cfg.victim_patience,
                  "early stopping patience (0 = off)");
}

void parse_lists(RunConfig& cfg, const std::string& sbm_spec, const std::string& methods,
                 const std::string& budgets) {
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  };
  if (!sbm_spec.empty()) {
    const auto f = split(sbm_spec);
    if (f.size() != 5) throw CLI::ValidationError("--sbm expects n,k,p_in,p_out,noise");
    cfg.use_sbm = true;
    cfg.sbm_n = std::stoi(f[0]);
    cfg.sbm_k = std::stoi(f[1]);
    cfg.sbm_p_in = std::stod(f[2]);
    cfg.sbm_p_out = std::stod(f[3]);
    cfg.sbm_noise = std::stod(f[4]);
  }
  if (!methods.empty()) cfg.methods = split(methods);
  if (!budgets.empty()) {
    cfg.budgets.clear();
    for (const std::string& b : split(budgets)) cfg.budgets.push_back(std::stod(b));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph structure poisoning via meta-gradients"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string sbm_spec, methods, budgets, config_file;
  app.add_option("--config", config_file, "key=value config file (flags override it)")
      ->check(CLI::ExistingFile);

  CLI::App* attack = app.add_subcommand(
      "attack", "poison one graph and write the perturbation list");
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "run the full protocol: attacks x splits x victim trainings");
  CLI::App* analyze = app.add_subcommand(
      "analyze", "replay a perturbation list and report its anatomy");

  for (CLI::App* cmd : {attack, evaluate, analyze}) {
    add_dataset_options(cmd, cfg, sbm_spec);
    add_attack_options(cmd, cfg, methods, budgets);
  }
  for (CLI::App* cmd : {evaluate, analyze}) add_victim_options(cmd, cfg);
  evaluate->add_option("--splits", cfg.n_splits, "number of labeled/unlabeled splits");
  evaluate->add_option("--trainings", cfg.n_trainings, "victim trainings per attack");
  evaluate->add_option("--bootstrap", cfg.bootstrap_resamples, "bootstrap resamples");
  analyze->add_option("--perturbations", cfg.perturbations_file,
                      "perturbation CSV produced by `attack`");
  analyze->add_flag("--weight-transfer", cfg.run_weight_transfer,
                    "also train clean/poisoned weights and cross-evaluate");

  try {
    app.parse(argc, argv);
    if (!config_file.empty()) {
      // Config supplies defaults; explicit flags win by re-parsing.
      cfg = RunConfig::from_kv_file(config_file);
      app.clear();
      app.parse(argc, argv);
    }
    parse_lists(cfg, sbm_spec, methods, budgets);
    if (attack->parsed()) return graphpoison::cmd_attack(cfg);
    if (evaluate->parsed()) return graphpoison::cmd_evaluate(cfg);
    if (analyze->parsed()) return graphpoison::cmd_analyze(cfg);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
