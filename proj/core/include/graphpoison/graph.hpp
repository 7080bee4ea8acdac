// SPDX-License-Identifier: Apache-2.0
//
// Graph data model: attributed graphs with symmetric binary adjacency,
// dataset I/O, label splits, perturbation application, synthetic
// stochastic-block-model graphs, and subgraph extraction.

#pragma once

#include "graphpoison/tape.hpp"
#include "graphpoison/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace graphpoison {

struct AttributedGraph {
  int num_nodes = 0;    // N
  int feature_dim = 0;  // D
  int num_classes = 0;  // K
  Tensor adjacency;     // NxN, entries in {0,1}, symmetric, zero diagonal
  Tensor features;      // NxD
  bool binary_features = false;
  std::vector<int> labels;  // size N, values in 0..K-1

  bool has_edge(int u, int v) const { return adjacency(u, v) != 0.0; }
  int degree(int u) const;
  std::vector<int> degrees() const;
  // Number of undirected edges (half the nonzero adjacency entries).
  long edge_count() const;

  void validate() const;  // checks symmetry, zero diagonal, label range
};

struct DataSplit {
  std::vector<int> labeled;    // V_L, ascending
  std::vector<int> unlabeled;  // V_U, ascending
  std::uint64_t seed = 0;
};

enum class PerturbationKind { EdgeInsert, EdgeDelete, FeatureFlip };

const char* perturbation_kind_name(PerturbationKind k);
std::optional<PerturbationKind> parse_perturbation_kind(const std::string& s);

struct Perturbation {
  PerturbationKind kind = PerturbationKind::EdgeInsert;
  int u = 0;  // node
  int v = 0;  // other node for edge kinds, feature index for FeatureFlip
  int step = 0;
  double score = 0.0;
};

// --- dataset I/O -------------------------------------------------------
//
// edges file:    one `u<TAB>v` per line, undirected, '#' comments
// features file: header `nodes=<N> features=<D> binary={0|1}`, then sparse
//                triplets `node<TAB>feature[<TAB>value]` (missing value = 1.0)
// labels file:   `node<TAB>class`, classes densely indexed 0..K-1
// split file:    `node<TAB>{L|U}`

// Loads, deduplicates, restricts to the largest connected component and
// re-indexes node ids densely. `id_map_out`, when given, receives the
// original id of each new node id.
AttributedGraph load_dataset(const std::filesystem::path& edges_path,
                             const std::filesystem::path& features_path,
                             const std::filesystem::path& labels_path,
                             std::vector<int>* id_map_out = nullptr);

void save_dataset(const AttributedGraph& g, const std::filesystem::path& edges_path,
                  const std::filesystem::path& features_path,
                  const std::filesystem::path& labels_path);

void save_edges(const AttributedGraph& g, const std::filesystem::path& path);

DataSplit load_split(const std::filesystem::path& path, int num_nodes);
void save_split(const DataSplit& split, const std::filesystem::path& path);

// --- operations --------------------------------------------------------

// D^{-1/2} (A+I) D^{-1/2} on raw values; the recorded overload is the same
// composition on the tape, so gradients w.r.t. the relaxed adjacency exist.
Tensor normalize_adjacency(const Tensor& adjacency);
NodeId normalize_adjacency(Tape& tape, NodeId adjacency);

// Copying and in-place application; the in-place variant is for the
// single-threaded attack loop. Preconditions (insert only a missing edge,
// delete only a present one, flip only binary features) are enforced.
AttributedGraph apply_perturbation(const AttributedGraph& g, const Perturbation& p);
void apply_perturbation_inplace(AttributedGraph& g, const Perturbation& p);

// Uniform labeled/unlabeled split with |V_L| = round(fraction*N). Every class
// keeps at least one labeled node; the internal seed is re-derived up to 100
// times before giving up.
DataSplit make_split(const AttributedGraph& g, double fraction, std::uint64_t seed);

struct SbmParams {
  int n = 500;
  int blocks = 2;
  double p_in = 0.05;
  double p_out = 0.002;
  int feature_dim = 32;
  double noise = 0.05;
  std::uint64_t seed = 0;
};

// Homophilous stochastic-block-model graph; block id doubles as class label,
// binary features are noisy one-hot class indicator columns. LCC-restricted.
AttributedGraph generate_sbm(const SbmParams& params);

struct SubgraphExtraction {
  AttributedGraph graph;
  std::vector<int> to_original;  // new id -> original id
  bool reached_target = true;    // false: V_L's reachable set was too small
};

// Grows a node set from V_L by repeatedly adding a uniformly random neighbor
// until it holds at least target_fraction*N nodes, then returns the induced
// subgraph.
SubgraphExtraction extract_attack_subgraph(const AttributedGraph& g,
                                           const DataSplit& split,
                                           double target_fraction,
                                           std::uint64_t seed);

}  // namespace graphpoison
