#ifndef BOWTIE_BOWTIE_HPP
#define BOWTIE_BOWTIE_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bowtie/attributes.hpp"
#include "bowtie/graph.hpp"

namespace bowtie {

// Per-edge decomposition: shared friends, each endpoint's non-shared friends,
// and every edge induced among them (including inter-group ties).
struct BowTie {
  NodeId focal_i = 0;
  NodeId focal_j = 0;
  std::vector<NodeId> group_i;      // N(i) \ N(j) \ {j}, sorted
  std::vector<NodeId> group_j;      // N(j) \ N(i) \ {i}, sorted
  std::vector<NodeId> group_shared; // N(i) ∩ N(j), sorted
  std::vector<WeightedEdge> induced_edges; // src < dst, sorted, each edge once
};

enum class SexPair : std::uint8_t { MM = 0, FF = 1, FM = 2 };

enum class Side { i, j };

// The predictor suite for one edge. Attribute-derived fields are empty when
// either endpoint lacks the attribute. FM covers both orientations.
struct EdgeFeatures {
  double deg_sum = 0, deg_diff = 0;          // k_i + k_j, |k_i - k_j|
  double str_sum = 0, str_diff = 0;          // s_i + s_j, |s_i - s_j|
  double clust_sum = 0, clust_diff = 0;      // non-shared clustering
  double wclust_sum = 0, wclust_diff = 0;    // weighted, network-max normalized
  double overlap = 0, weighted_overlap = 0;  // o, wo
  double shared_nodes = 0, shared_edges = 0; // |g_ij|, edges inside g_ij
  double side_nodes_sum = 0, side_nodes_diff = 0; // |g_i|+|g_j|, abs diff
  double side_edges_sum = 0, side_edges_diff = 0; // e(g_i)+e(g_j), abs diff
  std::optional<double> age_sum, age_diff;
  std::optional<SexPair> sex_pair;
  std::optional<bool> same_zip;
};

BowTie extract_bowtie(const WeightedGraph& g, NodeId i, NodeId j);

// Eq-style overlaps; both return 0 for an isolated dyad (zero denominator).
double overlap(const WeightedGraph& g, NodeId i, NodeId j);
double weighted_overlap(const WeightedGraph& g, NodeId i, NodeId j);

// Clustering of one focal node computed over its non-shared friend group
// only; 0 when the group has fewer than 2 members.
double nonshared_clustering(const WeightedGraph& g, NodeId i, NodeId j, Side which);

// Weighted variant: mean geometric triangle intensity with weights divided by
// w_max (the network-wide maximum edge weight).
double nonshared_weighted_clustering(const WeightedGraph& g, NodeId i, NodeId j, Side which,
                                     double w_max);

// attrs may be null (structural features only)
EdgeFeatures edge_features(const WeightedGraph& g, const AttributeTable* attrs, NodeId i,
                           NodeId j);

// Feature matrix column layout, fixed across the project. `sex` is the
// categorical pair code (0=MM, 1=FF, 2=FM) and `z` the same-zip indicator;
// both are NaN when unobserved.
inline constexpr std::size_t kFeatureCount = 20;
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "k_s", "k_d", "s_s", "s_d", "cc_s", "cc_d", "wcc_s", "wcc_d", "a_s", "a_d",
    "sex", "z",   "o",   "wo",  "n_ij", "e_ij", "n_s",   "n_d",   "e_s", "e_d"};
inline constexpr std::array<const char*, kFeatureCount> kFeatureTypes = {
    "count", "count", "real", "real", "real", "real", "real", "real", "real", "real",
    "categorical", "indicator", "real", "real", "count", "count", "count", "count",
    "count", "count"};

int feature_index(const std::string& name); // -1 if unknown

// One row per edge, row order equal to WeightedGraph::edges() order. Missing
// attribute cells are NaN in memory and empty in the CSV.
class FeatureMatrix {
public:
  FeatureMatrix() = default;
  FeatureMatrix(std::vector<std::pair<NodeId, NodeId>> edges, std::vector<double> data)
      : edges_(std::move(edges)), data_(std::move(data)) {}

  std::size_t rows() const { return edges_.size(); }
  static constexpr std::size_t cols() { return kFeatureCount; }

  std::pair<NodeId, NodeId> edge(std::size_t row) const { return edges_[row]; }
  double value(std::size_t row, std::size_t col) const {
    return data_[row * kFeatureCount + col];
  }
  const std::vector<double>& data() const { return data_; }
  const std::vector<std::pair<NodeId, NodeId>>& edges() const { return edges_; }

private:
  std::vector<std::pair<NodeId, NodeId>> edges_;
  std::vector<double> data_; // row-major, rows x kFeatureCount
};

// Full sweep over every edge of g. Parallel over edges; output row order is
// the edge order regardless of thread count.
FeatureMatrix compute_features(const WeightedGraph& g, const AttributeTable* attrs,
                               unsigned threads = 0);

} // namespace bowtie

#endif
