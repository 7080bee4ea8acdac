// SPDX-License-Identifier: Apache-2.0

#include "graphpoison/commands.hpp"
#include "graphpoison/rng.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace graphpoison {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSplitTag = 0x53504c4954ULL;  // same derivation as the protocol
constexpr std::uint64_t kSbmTag = 0x53424dULL;
constexpr std::uint64_t kTransferTag = 0x5754ULL;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += v[i];
  }
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt_double(v[i]);
  }
  return out;
}

std::vector<std::string> split_csv(const std::string& s) {
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
  out.push_back(cur);
  return out;
}

}  // namespace

void RunConfig::validate_common() const {
  if (!use_sbm && (dataset_edges.empty() || dataset_features.empty() || dataset_labels.empty()))
    throw std::invalid_argument("config: provide dataset files or an --sbm spec");
  if (split_fraction <= 0.0 || split_fraction >= 1.0)
    throw std::invalid_argument("config: split fraction must be in (0,1)");
  if (methods.empty()) throw std::invalid_argument("config: at least one method required");
  if (budgets.empty()) throw std::invalid_argument("config: at least one budget required");
  for (double b : budgets)
    if (b <= 0.0) throw std::invalid_argument("config: budgets must be > 0");
  if (lambda < 0.0 || lambda > 1.0)
    throw std::invalid_argument("config: lambda must be in [0,1]");
  if (subgraph_fraction <= 0.0 || subgraph_fraction > 1.0)
    throw std::invalid_argument("config: subgraph fraction must be in (0,1]");
  if (tau <= 0.0) throw std::invalid_argument("config: tau must be > 0");
  if (d_min < 2) throw std::invalid_argument("config: dmin must be >= 2");
  if (n_splits < 1 || n_trainings < 1)
    throw std::invalid_argument("config: splits and trainings must be >= 1");
  validate(attack_config().inner);
  validate(victim_config());
  for (const std::string& m : methods)
    if (m != "clean" && !parse_attack_method(m))
      throw std::invalid_argument("config: unknown method '" + m + "'");
}

AttackConfig RunConfig::attack_config() const {
  AttackConfig a;
  a.budget_fraction = budgets.front();
  a.lambda = lambda;
  a.inner.steps = inner_steps;
  a.inner.learning_rate = inner_lr;
  a.inner.momentum = inner_momentum;
  a.inner.hidden = surrogate_hidden;
  a.inner.single_matrix = surrogate_single_matrix;
  a.toggles.degree_check = degree_check;
  a.toggles.singleton_check = singleton_check;
  a.d_min = d_min;
  a.tau = tau;
  a.base_seed = seed;
  a.include_feature_flips = with_feature_flips;
  a.feature_flip_weight = feature_flip_weight;
  return a;
}

VictimConfig RunConfig::victim_config() const {
  VictimConfig v;
  v.hidden = victim_hidden;
  v.dropout = victim_dropout;
  v.weight_decay = victim_weight_decay;
  v.learning_rate = victim_lr;
  v.epochs = victim_epochs;
  v.patience = victim_patience;
  return v;
}

std::string RunConfig::to_kv() const {
  std::ostringstream out;
  out << "dataset-edges=" << dataset_edges << '\n';
  out << "dataset-features=" << dataset_features << '\n';
  out << "dataset-labels=" << dataset_labels << '\n';
  if (use_sbm)
    out << "sbm=" << sbm_n << ',' << sbm_k << ',' << fmt_double(sbm_p_in) << ','
        << fmt_double(sbm_p_out) << ',' << fmt_double(sbm_noise) << '\n';
  out << "sbm-feature-dim=" << sbm_feature_dim << '\n';
  out << "split-file=" << split_file << '\n';
  out << "split-fraction=" << fmt_double(split_fraction) << '\n';
  out << "method=" << join_strings(methods) << '\n';
  out << "budget-frac=" << join_doubles(budgets) << '\n';
  out << "lambda=" << fmt_double(lambda) << '\n';
  out << "inner-steps=" << inner_steps << '\n';
  out << "inner-lr=" << fmt_double(inner_lr) << '\n';
  out << "inner-momentum=" << fmt_double(inner_momentum) << '\n';
  out << "hidden=" << surrogate_hidden << '\n';
  out << "surrogate-single-matrix=" << (surrogate_single_matrix ? 1 : 0) << '\n';
  out << "tau=" << fmt_double(tau) << '\n';
  out << "dmin=" << d_min << '\n';
  out << "no-degree-check=" << (degree_check ? 0 : 1) << '\n';
  out << "no-singleton-check=" << (singleton_check ? 0 : 1) << '\n';
  out << "subgraph-fraction=" << fmt_double(subgraph_fraction) << '\n';
  out << "with-feature-flips=" << (with_feature_flips ? 1 : 0) << '\n';
  out << "feature-flip-weight=" << fmt_double(feature_flip_weight) << '\n';
  out << "splits=" << n_splits << '\n';
  out << "trainings=" << n_trainings << '\n';
  out << "bootstrap=" << bootstrap_resamples << '\n';
  out << "victim-hidden=" << victim_hidden << '\n';
  out << "victim-dropout=" << fmt_double(victim_dropout) << '\n';
  out << "victim-weight-decay=" << fmt_double(victim_weight_decay) << '\n';
  out << "victim-lr=" << fmt_double(victim_lr) << '\n';
  out << "victim-epochs=" << victim_epochs << '\n';
  out << "victim-patience=" << victim_patience << '\n';
  out << "seed=" << seed << '\n';
  out << "out=" << out_dir << '\n';
  out << "perturbations=" << perturbations_file << '\n';
  out << "weight-transfer=" << (run_weight_transfer ? 1 : 0) << '\n';
  return out.str();
}

RunConfig RunConfig::from_kv_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    auto as_int = [&] { return std::stoi(value); };
    auto as_double = [&] { return std::stod(value); };
    auto as_bool = [&] { return value == "1" || value == "true"; };
    if (key == "dataset-edges") cfg.dataset_edges = value;
    else if (key == "dataset-features") cfg.dataset_features = value;
    else if (key == "dataset-labels") cfg.dataset_labels = value;
    else if (key == "sbm") {
      const auto f = split_csv(value);
      if (f.size() != 5)
        throw std::runtime_error(path.string() + ": sbm expects n,k,p_in,p_out,noise");
      cfg.use_sbm = true;
      cfg.sbm_n = std::stoi(f[0]);
      cfg.sbm_k = std::stoi(f[1]);
      cfg.sbm_p_in = std::stod(f[2]);
      cfg.sbm_p_out = std::stod(f[3]);
      cfg.sbm_noise = std::stod(f[4]);
    } else if (key == "sbm-feature-dim") cfg.sbm_feature_dim = as_int();
    else if (key == "split-file") cfg.split_file = value;
    else if (key == "split-fraction") cfg.split_fraction = as_double();
    else if (key == "method") {
      cfg.methods.clear();
      for (const std::string& m : split_csv(value))
        if (!m.empty()) cfg.methods.push_back(m);
    } else if (key == "budget-frac") {
      cfg.budgets.clear();
      for (const std::string& b : split_csv(value))
        if (!b.empty()) cfg.budgets.push_back(std::stod(b));
    } else if (key == "lambda") cfg.lambda = as_double();
    else if (key == "inner-steps") cfg.inner_steps = as_int();
    else if (key == "inner-lr") cfg.inner_lr = as_double();
    else if (key == "inner-momentum") cfg.inner_momentum = as_double();
    else if (key == "hidden") cfg.surrogate_hidden = as_int();
    else if (key == "surrogate-single-matrix") cfg.surrogate_single_matrix = as_bool();
    else if (key == "tau") cfg.tau = as_double();
    else if (key == "dmin") cfg.d_min = as_int();
    else if (key == "no-degree-check") cfg.degree_check = !as_bool();
    else if (key == "no-singleton-check") cfg.singleton_check = !as_bool();
    else if (key == "subgraph-fraction") cfg.subgraph_fraction = as_double();
    else if (key == "with-feature-flips") cfg.with_feature_flips = as_bool();
    else if (key == "feature-flip-weight") cfg.feature_flip_weight = as_double();
    else if (key == "splits") cfg.n_splits = as_int();
    else if (key == "trainings") cfg.n_trainings = as_int();
    else if (key == "bootstrap") cfg.bootstrap_resamples = as_int();
    else if (key == "victim-hidden") cfg.victim_hidden = as_int();
    else if (key == "victim-dropout") cfg.victim_dropout = as_double();
    else if (key == "victim-weight-decay") cfg.victim_weight_decay = as_double();
    else if (key == "victim-lr") cfg.victim_lr = as_double();
    else if (key == "victim-epochs") cfg.victim_epochs = as_int();
    else if (key == "victim-patience") cfg.victim_patience = as_int();
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "out") cfg.out_dir = value;
    else if (key == "perturbations") cfg.perturbations_file = value;
    else if (key == "weight-transfer") cfg.run_weight_transfer = as_bool();
    else
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": unknown key '" + key + "'");
  }
  return cfg;
}

AttributedGraph load_configured_graph(const RunConfig& cfg) {
  if (cfg.use_sbm) {
    SbmParams p;
    p.n = cfg.sbm_n;
    p.blocks = cfg.sbm_k;
    p.p_in = cfg.sbm_p_in;
    p.p_out = cfg.sbm_p_out;
    p.noise = cfg.sbm_noise;
    p.feature_dim = cfg.sbm_feature_dim;
    p.seed = derive_seed(cfg.seed, kSbmTag);
    return generate_sbm(p);
  }
  return load_dataset(cfg.dataset_edges, cfg.dataset_features, cfg.dataset_labels);
}

DataSplit load_configured_split(const RunConfig& cfg, const AttributedGraph& graph,
                                int split_index) {
  if (!cfg.split_file.empty()) return load_split(cfg.split_file, graph.num_nodes);
  return make_split(graph, cfg.split_fraction,
                    derive_seed(cfg.seed, kSplitTag, split_index));
}

std::string perturbations_to_csv(const AttackResult& result, bool degree_check) {
  std::ostringstream out;
  out << "step,kind,u,v,score,lambda_stat\n";
  for (const StepLog& log : result.steps) {
    const Perturbation& p = log.perturbation;
    out << p.step << ',' << perturbation_kind_name(p.kind) << ',' << p.u << ',' << p.v
        << ',' << fmt_double(p.score) << ',';
    if (degree_check && std::isfinite(log.lambda_stat)) out << fmt_double(log.lambda_stat);
    out << '\n';
  }
  return out.str();
}

std::vector<Perturbation> perturbations_from_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<Perturbation> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("step,", 0) == 0) continue;  // header
    const auto fields = split_csv(line);
    if (fields.size() != 6)
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected 6 columns");
    Perturbation p;
    p.step = std::stoi(fields[0]);
    const auto kind = parse_perturbation_kind(fields[1]);
    if (!kind)
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": unknown kind '" + fields[1] + "'");
    p.kind = *kind;
    p.u = std::stoi(fields[2]);
    p.v = std::stoi(fields[3]);
    p.score = fields[4].empty() ? 0.0 : std::stod(fields[4]);
    out.push_back(p);
  }
  return out;
}

int cmd_attack(const RunConfig& cfg) {
  cfg.validate_common();
  const AttributedGraph graph = load_configured_graph(cfg);
  const DataSplit split = load_configured_split(cfg, graph);

  AttackConfig atk = cfg.attack_config();
  const auto method = parse_attack_method(cfg.methods.front());
  if (!method)
    throw std::invalid_argument("attack: unknown method '" + cfg.methods.front() + "'");
  atk.method = *method;
  atk.budget_fraction = cfg.budgets.front();

  const AttackResult result = cfg.subgraph_fraction < 1.0
                                  ? subgraph_attack(graph, split, atk, cfg.subgraph_fraction)
                                  : run_attack(graph, split, atk);

  const fs::path out(cfg.out_dir);
  write_file(out / "perturbations.csv", perturbations_to_csv(result, cfg.degree_check));
  save_edges(result.poisoned, out / "poisoned_edges.tsv");
  save_split(split, out / "split.tsv");
  write_file(out / "config_echo.cfg", cfg.to_kv());
  {
    std::ostringstream log;
    log << "delta=" << result.delta << " completed=" << (result.completed ? 1 : 0) << '\n';
    for (const StepLog& s : result.steps) {
      log << "step " << s.perturbation.step << ' '
          << perturbation_kind_name(s.perturbation.kind) << " (" << s.perturbation.u << ','
          << s.perturbation.v << ") score=" << fmt_double(s.perturbation.score);
      if (std::isfinite(s.attacker_loss))
        log << " attacker_loss=" << fmt_double(s.attacker_loss);
      if (std::isfinite(s.lambda_stat)) log << " lambda=" << fmt_double(s.lambda_stat);
      log << '\n';
    }
    write_file(out / "steps.log", log.str());
  }
  std::cout << "wrote " << (out / "perturbations.csv").string() << " (" << result.delta
            << " perturbations" << (result.completed ? "" : ", early termination") << ")\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  cfg.validate_common();
  const AttributedGraph graph = load_configured_graph(cfg);

  ProtocolOptions options;
  options.methods = cfg.methods;
  options.budgets = cfg.budgets;
  options.n_splits = cfg.n_splits;
  options.n_trainings = cfg.n_trainings;
  options.bootstrap_resamples = cfg.bootstrap_resamples;
  options.split_fraction = cfg.split_fraction;
  options.subgraph_fraction = cfg.subgraph_fraction;
  options.victim = cfg.victim_config();
  options.attack = cfg.attack_config();
  options.base_seed = cfg.seed;

  const EvalReport report = evaluate_protocol(graph, options);

  const fs::path out(cfg.out_dir);
  write_file(out / "report.json", report_to_json(report));
  write_file(out / "curves.csv", report_to_csv(report));
  write_file(out / "config_echo.cfg", cfg.to_kv());
  std::cout << report_to_table(report);
  return 0;
}

int cmd_analyze(const RunConfig& cfg) {
  cfg.validate_common();
  if (cfg.perturbations_file.empty())
    throw std::invalid_argument("analyze: --perturbations file required");
  const AttributedGraph graph = load_configured_graph(cfg);
  const std::vector<Perturbation> perturbations =
      perturbations_from_csv(cfg.perturbations_file);

  ConstraintToggles toggles;
  toggles.degree_check = cfg.degree_check;
  toggles.singleton_check = cfg.singleton_check;
  const AttributedGraph poisoned =
      replay_perturbations(graph, perturbations, toggles, cfg.d_min, cfg.tau);
  const AnatomyStats anatomy = attack_anatomy(graph, perturbations);

  const fs::path out(cfg.out_dir);
  write_file(out / "anatomy.json", anatomy_to_json(anatomy));
  write_file(out / "config_echo.cfg", cfg.to_kv());

  if (cfg.run_weight_transfer) {
    const DataSplit split = load_configured_split(cfg, graph);
    VictimConfig vc = cfg.victim_config();
    vc.seed = derive_seed(cfg.seed, kTransferTag);
    const WeightTransferTable t = weight_transfer(graph, poisoned, split, vc);
    json j{{"acc_clean_graph_clean_weights", t.acc[0][0]},
           {"acc_clean_graph_poisoned_weights", t.acc[0][1]},
           {"acc_poisoned_graph_clean_weights", t.acc[1][0]},
           {"acc_poisoned_graph_poisoned_weights", t.acc[1][1]}};
    write_file(out / "weight_transfer.json", j.dump(2) + "\n");
  }
  std::cout << "wrote " << (out / "anatomy.json").string() << " (" << anatomy.total
            << " perturbations)\n";
  return 0;
}

}  // namespace graphpoison
