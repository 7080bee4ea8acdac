// SPDX-License-Identifier: Apache-2.0

#include "graphpoison/graph.hpp"
#include "graphpoison/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_set>

namespace graphpoison {

namespace fs = std::filesystem;

int AttributedGraph::degree(int u) const {
  double s = 0.0;
  for (int v = 0; v < num_nodes; ++v) s += adjacency(u, v);
  return static_cast<int>(std::lround(s));
}

std::vector<int> AttributedGraph::degrees() const {
  std::vector<int> d(num_nodes);
  for (int u = 0; u < num_nodes; ++u) d[u] = degree(u);
  return d;
}

long AttributedGraph::edge_count() const {
  double s = 0.0;
  for (double v : adjacency.values()) s += v;
  return std::lround(s / 2.0);
}

void AttributedGraph::validate() const {
  if (adjacency.rows() != num_nodes || adjacency.cols() != num_nodes)
    throw std::invalid_argument("graph: adjacency shape mismatch");
  if (features.rows() != num_nodes || features.cols() != feature_dim)
    throw std::invalid_argument("graph: feature shape mismatch");
  if (static_cast<int>(labels.size()) != num_nodes)
    throw std::invalid_argument("graph: label count mismatch");
  for (int u = 0; u < num_nodes; ++u) {
    if (adjacency(u, u) != 0.0) throw std::invalid_argument("graph: nonzero diagonal");
    if (labels[u] < 0 || labels[u] >= num_classes)
      throw std::invalid_argument("graph: label out of range");
    for (int v = u + 1; v < num_nodes; ++v) {
      const double a = adjacency(u, v);
      if (a != adjacency(v, u)) throw std::invalid_argument("graph: asymmetric adjacency");
      if (a != 0.0 && a != 1.0) throw std::invalid_argument("graph: non-binary adjacency");
    }
  }
}

const char* perturbation_kind_name(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::EdgeInsert: return "edge-insert";
    case PerturbationKind::EdgeDelete: return "edge-delete";
    case PerturbationKind::FeatureFlip: return "feature-flip";
  }
  return "?";
}

std::optional<PerturbationKind> parse_perturbation_kind(const std::string& s) {
  if (s == "edge-insert") return PerturbationKind::EdgeInsert;
  if (s == "edge-delete") return PerturbationKind::EdgeDelete;
  if (s == "feature-flip") return PerturbationKind::FeatureFlip;
  return std::nullopt;
}

namespace {

[[noreturn]] void parse_error(const fs::path& path, int line_no, const std::string& what) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + what);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == '\t' || c == ' ') {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool comment_or_blank(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

long parse_long(const fs::path& path, int line_no, const std::string& field) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    parse_error(path, line_no, "expected integer, got '" + field + "'");
  return value;
}

double parse_double(const fs::path& path, int line_no, const std::string& field) {
  try {
    std::size_t pos = 0;
    double v = std::stod(field, &pos);
    if (pos != field.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    parse_error(path, line_no, "expected number, got '" + field + "'");
  }
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Largest connected component over an adjacency-list graph; ties broken by
// smallest contained node id (BFS visits ids in order). Returns sorted ids.
std::vector<int> largest_component(const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> comp(n, -1);
  std::vector<int> best;
  for (int s = 0; s < n; ++s) {
    if (comp[s] != -1 || adj[s].empty()) continue;
    std::vector<int> members;
    std::queue<int> q;
    q.push(s);
    comp[s] = s;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      members.push_back(u);
      for (int v : adj[u]) {
        if (comp[v] == -1) {
          comp[v] = s;
          q.push(v);
        }
      }
    }
    if (members.size() > best.size()) {
      std::sort(members.begin(), members.end());
      best = std::move(members);
    }
  }
  return best;
}

struct FeatureHeader {
  int nodes = 0;
  int features = 0;
  bool binary = false;
};

FeatureHeader parse_feature_header(const fs::path& path, const std::string& line) {
  FeatureHeader h;
  bool saw_nodes = false, saw_features = false, saw_binary = false;
  for (const std::string& field : split_fields(line)) {
    auto eq = field.find('=');
    if (eq == std::string::npos) parse_error(path, 1, "malformed header field '" + field + "'");
    const std::string key = field.substr(0, eq);
    const std::string val = field.substr(eq + 1);
    if (key == "nodes") {
      h.nodes = static_cast<int>(parse_long(path, 1, val));
      saw_nodes = true;
    } else if (key == "features") {
      h.features = static_cast<int>(parse_long(path, 1, val));
      saw_features = true;
    } else if (key == "binary") {
      h.binary = parse_long(path, 1, val) != 0;
      saw_binary = true;
    } else {
      parse_error(path, 1, "unknown header key '" + key + "'");
    }
  }
  if (!saw_nodes || !saw_features || !saw_binary)
    parse_error(path, 1, "header must declare nodes=, features=, binary=");
  if (h.nodes <= 0 || h.features <= 0) parse_error(path, 1, "empty node/feature universe");
  return h;
}

}  // namespace

AttributedGraph load_dataset(const fs::path& edges_path, const fs::path& features_path,
                             const fs::path& labels_path, std::vector<int>* id_map_out) {
  // Features header declares the node universe.
  std::ifstream fin = open_input(features_path);
  std::string line;
  if (!std::getline(fin, line)) parse_error(features_path, 1, "missing header");
  const FeatureHeader header = parse_feature_header(features_path, line);
  const int n_all = header.nodes;

  // Edges.
  std::vector<std::set<int>> adj(n_all);
  {
    std::ifstream in = open_input(edges_path);
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (comment_or_blank(line)) continue;
      const auto fields = split_fields(line);
      if (fields.size() != 2) parse_error(edges_path, line_no, "expected 'u<TAB>v'");
      const long u = parse_long(edges_path, line_no, fields[0]);
      const long v = parse_long(edges_path, line_no, fields[1]);
      if (u < 0 || v < 0 || u >= n_all || v >= n_all)
        parse_error(edges_path, line_no,
                    "node id outside declared universe of " + std::to_string(n_all));
      if (u == v) parse_error(edges_path, line_no, "self-loop not allowed");
      adj[u].insert(static_cast<int>(v));
      adj[v].insert(static_cast<int>(u));
    }
  }

  // Feature triplets.
  Tensor features_all(n_all, header.features);
  {
    int line_no = 1;
    while (std::getline(fin, line)) {
      ++line_no;
      if (comment_or_blank(line)) continue;
      const auto fields = split_fields(line);
      if (fields.size() != 2 && fields.size() != 3)
        parse_error(features_path, line_no, "expected 'node<TAB>feature[<TAB>value]'");
      const long node = parse_long(features_path, line_no, fields[0]);
      const long feat = parse_long(features_path, line_no, fields[1]);
      if (node < 0 || node >= n_all)
        parse_error(features_path, line_no, "node id outside declared universe");
      if (feat < 0 || feat >= header.features)
        parse_error(features_path, line_no, "feature id outside declared dimension");
      const double value =
          fields.size() == 3 ? parse_double(features_path, line_no, fields[2]) : 1.0;
      if (header.binary && value != 0.0 && value != 1.0)
        parse_error(features_path, line_no, "non-binary value in binary feature file");
      features_all(static_cast<int>(node), static_cast<int>(feat)) = value;
    }
  }

  // Labels.
  std::vector<int> labels_all(n_all, -1);
  {
    std::ifstream in = open_input(labels_path);
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (comment_or_blank(line)) continue;
      const auto fields = split_fields(line);
      if (fields.size() != 2) parse_error(labels_path, line_no, "expected 'node<TAB>class'");
      const long node = parse_long(labels_path, line_no, fields[0]);
      const long cls = parse_long(labels_path, line_no, fields[1]);
      if (node < 0 || node >= n_all)
        parse_error(labels_path, line_no, "node id outside declared universe");
      if (cls < 0) parse_error(labels_path, line_no, "negative class");
      labels_all[node] = static_cast<int>(cls);
    }
  }
  int num_classes = 0;
  for (int u = 0; u < n_all; ++u) {
    if (labels_all[u] < 0)
      throw std::runtime_error(labels_path.string() + ": node " + std::to_string(u) +
                               " has no label");
    num_classes = std::max(num_classes, labels_all[u] + 1);
  }
  {
    std::vector<char> seen(num_classes, 0);
    for (int u = 0; u < n_all; ++u) seen[labels_all[u]] = 1;
    for (int c = 0; c < num_classes; ++c)
      if (!seen[c])
        throw std::runtime_error(labels_path.string() + ": class " + std::to_string(c) +
                                 " unused; classes must be densely indexed");
  }

  // Restrict to the largest connected component.
  std::vector<std::vector<int>> adj_list(n_all);
  for (int u = 0; u < n_all; ++u) adj_list[u].assign(adj[u].begin(), adj[u].end());
  const std::vector<int> keep = largest_component(adj_list);
  if (keep.empty()) throw std::runtime_error(edges_path.string() + ": empty graph");

  const int n = static_cast<int>(keep.size());
  std::vector<int> new_id(n_all, -1);
  for (int i = 0; i < n; ++i) new_id[keep[i]] = i;

  AttributedGraph g;
  g.num_nodes = n;
  g.feature_dim = header.features;
  g.num_classes = num_classes;
  g.binary_features = header.binary;
  g.adjacency = Tensor(n, n);
  g.features = Tensor(n, header.features);
  g.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const int orig = keep[i];
    g.labels[i] = labels_all[orig];
    for (int j = 0; j < header.features; ++j) g.features(i, j) = features_all(orig, j);
    for (int v : adj_list[orig]) {
      if (new_id[v] >= 0) g.adjacency(i, new_id[v]) = 1.0;
    }
  }
  if (id_map_out) *id_map_out = keep;
  return g;
}

void save_edges(const AttributedGraph& g, const fs::path& path) {
  std::ofstream out = open_output(path);
  for (int u = 0; u < g.num_nodes; ++u)
    for (int v = u + 1; v < g.num_nodes; ++v)
      if (g.has_edge(u, v)) out << u << '\t' << v << '\n';
}

void save_dataset(const AttributedGraph& g, const fs::path& edges_path,
                  const fs::path& features_path, const fs::path& labels_path) {
  save_edges(g, edges_path);
  {
    std::ofstream out = open_output(features_path);
    out << "nodes=" << g.num_nodes << " features=" << g.feature_dim
        << " binary=" << (g.binary_features ? 1 : 0) << '\n';
    for (int u = 0; u < g.num_nodes; ++u)
      for (int j = 0; j < g.feature_dim; ++j) {
        const double v = g.features(u, j);
        if (v == 0.0) continue;
        if (v == 1.0)
          out << u << '\t' << j << '\n';
        else
          out << u << '\t' << j << '\t' << fmt_double(v) << '\n';
      }
  }
  {
    std::ofstream out = open_output(labels_path);
    for (int u = 0; u < g.num_nodes; ++u) out << u << '\t' << g.labels[u] << '\n';
  }
}

DataSplit load_split(const fs::path& path, int num_nodes) {
  std::ifstream in = open_input(path);
  std::vector<char> mark(num_nodes, 0);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (comment_or_blank(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 2) parse_error(path, line_no, "expected 'node<TAB>{L|U}'");
    const long node = parse_long(path, line_no, fields[0]);
    if (node < 0 || node >= num_nodes) parse_error(path, line_no, "node id out of range");
    if (fields[1] == "L")
      mark[node] = 1;
    else if (fields[1] == "U")
      mark[node] = 2;
    else
      parse_error(path, line_no, "expected L or U, got '" + fields[1] + "'");
  }
  DataSplit s;
  for (int u = 0; u < num_nodes; ++u) {
    if (mark[u] == 0) parse_error(path, 0, "node " + std::to_string(u) + " missing from split");
    (mark[u] == 1 ? s.labeled : s.unlabeled).push_back(u);
  }
  return s;
}

void save_split(const DataSplit& split, const fs::path& path) {
  std::ofstream out = open_output(path);
  std::vector<std::pair<int, char>> rows;
  for (int u : split.labeled) rows.emplace_back(u, 'L');
  for (int u : split.unlabeled) rows.emplace_back(u, 'U');
  std::sort(rows.begin(), rows.end());
  for (auto [u, m] : rows) out << u << '\t' << m << '\n';
}

Tensor normalize_adjacency(const Tensor& adjacency) {
  namespace k = kernels;
  if (adjacency.rows() != adjacency.cols())
    throw std::invalid_argument("normalize_adjacency: square matrix required");
  const Tensor atilde = k::add(adjacency, Tensor::identity(adjacency.rows()));
  const Tensor deg = k::row_sum(atilde);
  for (double v : deg.values())
    if (v <= 0.0) throw std::runtime_error("normalize_adjacency: zero row in A+I");
  const Tensor r = k::rsqrt(deg);
  return k::mul(atilde, k::matmul(r, k::transpose(r)));
}

NodeId normalize_adjacency(Tape& tape, NodeId adjacency) {
  const Tensor& a = tape.value(adjacency);
  if (a.rows() != a.cols())
    throw std::invalid_argument("normalize_adjacency: square matrix required");
  const NodeId atilde = tape.add(adjacency, tape.constant(Tensor::identity(a.rows())));
  const NodeId deg = tape.row_sum(atilde);
  for (double v : tape.value(deg).values())
    if (v <= 0.0) throw std::runtime_error("normalize_adjacency: zero row in A+I");
  const NodeId r = tape.rsqrt(deg);
  return tape.mul(atilde, tape.matmul(r, tape.transpose(r)));
}

void apply_perturbation_inplace(AttributedGraph& g, const Perturbation& p) {
  switch (p.kind) {
    case PerturbationKind::EdgeInsert:
    case PerturbationKind::EdgeDelete: {
      if (p.u == p.v || p.u < 0 || p.v < 0 || p.u >= g.num_nodes || p.v >= g.num_nodes)
        throw std::invalid_argument("apply_perturbation: bad edge endpoints");
      const bool present = g.has_edge(p.u, p.v);
      if (p.kind == PerturbationKind::EdgeInsert && present)
        throw std::invalid_argument("apply_perturbation: edge already present");
      if (p.kind == PerturbationKind::EdgeDelete && !present)
        throw std::invalid_argument("apply_perturbation: edge not present");
      const double value = p.kind == PerturbationKind::EdgeInsert ? 1.0 : 0.0;
      g.adjacency(p.u, p.v) = value;
      g.adjacency(p.v, p.u) = value;
      return;
    }
    case PerturbationKind::FeatureFlip: {
      if (!g.binary_features)
        throw std::invalid_argument("apply_perturbation: feature flips need binary features");
      if (p.u < 0 || p.u >= g.num_nodes || p.v < 0 || p.v >= g.feature_dim)
        throw std::invalid_argument("apply_perturbation: bad feature index");
      g.features(p.u, p.v) = g.features(p.u, p.v) == 0.0 ? 1.0 : 0.0;
      return;
    }
  }
}

AttributedGraph apply_perturbation(const AttributedGraph& g, const Perturbation& p) {
  AttributedGraph out = g;
  apply_perturbation_inplace(out, p);
  return out;
}

DataSplit make_split(const AttributedGraph& g, double fraction, std::uint64_t seed) {
  if (fraction <= 0.0 || fraction >= 1.0)
    throw std::invalid_argument("make_split: fraction must be in (0,1)");
  const int n_labeled = static_cast<int>(std::lround(fraction * g.num_nodes));
  if (n_labeled < g.num_classes || n_labeled < 1 || n_labeled >= g.num_nodes)
    throw std::runtime_error("make_split: class coverage impossible at this fraction");
  {
    std::vector<int> count(g.num_classes, 0);
    for (int c : g.labels) ++count[c];
    for (int c = 0; c < g.num_classes; ++c)
      if (count[c] == 0)
        throw std::runtime_error("make_split: class coverage impossible (class " +
                                 std::to_string(c) + " has zero nodes)");
  }

  std::vector<int> order(g.num_nodes);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(derive_seed(seed, attempt));
    for (int i = 0; i < g.num_nodes; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<char> covered(g.num_classes, 0);
    for (int i = 0; i < n_labeled; ++i) covered[g.labels[order[i]]] = 1;
    if (std::find(covered.begin(), covered.end(), 0) != covered.end()) continue;
    DataSplit s;
    s.seed = seed;
    s.labeled.assign(order.begin(), order.begin() + n_labeled);
    s.unlabeled.assign(order.begin() + n_labeled, order.end());
    std::sort(s.labeled.begin(), s.labeled.end());
    std::sort(s.unlabeled.begin(), s.unlabeled.end());
    return s;
  }
  throw std::runtime_error("make_split: no class-covering split found in 100 attempts");
}

AttributedGraph generate_sbm(const SbmParams& params) {
  if (params.n < 2 || params.blocks < 1 || params.feature_dim < 1)
    throw std::invalid_argument("generate_sbm: bad sizes");
  if (params.p_in < 0 || params.p_in > 1 || params.p_out < 0 || params.p_out > 1 ||
      params.noise < 0 || params.noise > 1)
    throw std::invalid_argument("generate_sbm: probabilities must be in [0,1]");

  const int n = params.n;
  const int k = params.blocks;
  std::vector<int> block(n);
  for (int i = 0; i < n; ++i) block[i] = static_cast<int>(static_cast<long>(i) * k / n);

  Rng rng(derive_seed(params.seed, 0x53424d /* SBM */));
  std::vector<std::vector<int>> adj(n);
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      const double p = block[u] == block[v] ? params.p_in : params.p_out;
      if (rng.bernoulli(p)) {
        adj[u].push_back(v);
        adj[v].push_back(u);
      }
    }

  const std::vector<int> keep = largest_component(adj);
  if (static_cast<double>(keep.size()) < 0.5 * n)
    throw std::runtime_error("generate_sbm: largest component below n/2; graph too sparse");

  const int m = static_cast<int>(keep.size());
  std::vector<int> new_id(n, -1);
  for (int i = 0; i < m; ++i) new_id[keep[i]] = i;

  AttributedGraph g;
  g.num_nodes = m;
  g.feature_dim = params.feature_dim;
  g.num_classes = k;
  g.binary_features = true;
  g.adjacency = Tensor(m, m);
  g.features = Tensor(m, params.feature_dim);
  g.labels.resize(m);
  for (int i = 0; i < m; ++i) {
    const int orig = keep[i];
    g.labels[i] = block[orig];
    for (int v : adj[orig])
      if (new_id[v] >= 0) g.adjacency(i, new_id[v]) = 1.0;
  }
  // Noisy one-hot class indicators; feature column j belongs to class j mod k.
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < params.feature_dim; ++j) {
      double v = g.labels[i] == j % k ? 1.0 : 0.0;
      if (rng.bernoulli(params.noise)) v = 1.0 - v;
      g.features(i, j) = v;
    }
  return g;
}

SubgraphExtraction extract_attack_subgraph(const AttributedGraph& g, const DataSplit& split,
                                           double target_fraction, std::uint64_t seed) {
  if (target_fraction <= 0.0 || target_fraction > 1.0)
    throw std::invalid_argument("extract_attack_subgraph: fraction must be in (0,1]");
  const double target = target_fraction * g.num_nodes;

  std::vector<char> in_set(g.num_nodes, 0);
  std::vector<int> members;
  for (int u : split.labeled) {
    in_set[u] = 1;
    members.push_back(u);
  }
  // Frontier of candidate neighbors; may hold stale entries that are skipped.
  std::vector<int> frontier;
  std::vector<char> in_frontier(g.num_nodes, 0);
  auto push_neighbors = [&](int u) {
    for (int v = 0; v < g.num_nodes; ++v)
      if (g.adjacency(u, v) != 0.0 && !in_set[v] && !in_frontier[v]) {
        in_frontier[v] = 1;
        frontier.push_back(v);
      }
  };
  for (int u : split.labeled) push_neighbors(u);

  Rng rng(derive_seed(seed, 0x5355 /* SU */));
  bool reached = true;
  while (static_cast<double>(members.size()) < target) {
    // Drop members that slipped into the frontier before being chosen.
    while (!frontier.empty()) {
      const std::size_t pick = rng.uniform(frontier.size());
      const int v = frontier[pick];
      frontier[pick] = frontier.back();
      frontier.pop_back();
      in_frontier[v] = 0;
      if (!in_set[v]) {
        in_set[v] = 1;
        members.push_back(v);
        push_neighbors(v);
        break;
      }
    }
    if (frontier.empty() && static_cast<double>(members.size()) < target) {
      reached = false;
      break;
    }
  }

  std::sort(members.begin(), members.end());
  const int m = static_cast<int>(members.size());
  std::vector<int> new_id(g.num_nodes, -1);
  for (int i = 0; i < m; ++i) new_id[members[i]] = i;

  SubgraphExtraction out;
  out.reached_target = reached;
  out.to_original = members;
  AttributedGraph& s = out.graph;
  s.num_nodes = m;
  s.feature_dim = g.feature_dim;
  s.num_classes = g.num_classes;
  s.binary_features = g.binary_features;
  s.adjacency = Tensor(m, m);
  s.features = Tensor(m, g.feature_dim);
  s.labels.resize(m);
  for (int i = 0; i < m; ++i) {
    const int orig = members[i];
    s.labels[i] = g.labels[orig];
    for (int j = 0; j < g.feature_dim; ++j) s.features(i, j) = g.features(orig, j);
    for (int jj = 0; jj < m; ++jj) s.adjacency(i, jj) = g.adjacency(orig, members[jj]);
  }
  return out;
}

}  // namespace graphpoison
