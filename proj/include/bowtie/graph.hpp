#ifndef BOWTIE_GRAPH_HPP
#define BOWTIE_GRAPH_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace bowtie {

using NodeId = std::uint32_t;

struct WeightedEdge {
  NodeId src;
  NodeId dst;
  double weight;
};

struct MultiplexRecord {
  NodeId src;
  NodeId dst;
  std::uint32_t layer; // 0..11
};

struct NodeStats {
  std::uint32_t degree;
  double strength;
};

constexpr std::uint32_t kMultiplexLayerCount = 12;

// Undirected weighted graph in CSR form with per-node neighbor lists kept
// strictly sorted. Immutable after construction; safe for concurrent reads.
class WeightedGraph {
public:
  WeightedGraph() = default;

  // Builds the symmetric sorted adjacency. Duplicate (i,j) entries are summed
  // into one edge. Rejects self-loops and nonpositive weights. node_count is
  // max(id)+1 unless a larger hint is given (isolated trailing nodes).
  static WeightedGraph from_edges(const std::vector<WeightedEdge>& edges,
                                  std::size_t node_count_hint = 0);

  // Union of directed multiplex records: edge weight = number of distinct
  // layers on which either direction appears, an integer in 1..12.
  static WeightedGraph from_multiplex(const std::vector<MultiplexRecord>& records,
                                      std::size_t node_count_hint = 0);

  std::size_t node_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t edge_count() const { return edge_count_; }

  std::span<const NodeId> neighbors(NodeId i) const {
    return {nbr_.data() + offsets_[i], nbr_.data() + offsets_[i + 1]};
  }
  std::span<const double> neighbor_weights(NodeId i) const {
    return {wgt_.data() + offsets_[i], wgt_.data() + offsets_[i + 1]};
  }

  std::uint32_t degree(NodeId i) const {
    return static_cast<std::uint32_t>(offsets_[i + 1] - offsets_[i]);
  }
  double strength(NodeId i) const { return strength_[i]; }

  // degree/strength with a range check on the node id
  NodeStats node_stats(NodeId i) const;

  bool has_edge(NodeId i, NodeId j) const;
  // weight of (i,j), 0 if the edge is absent
  double edge_weight(NodeId i, NodeId j) const;

  // largest edge weight in the graph (0 for an edgeless graph)
  double max_weight() const { return max_weight_; }
  double total_weight() const { return total_weight_; }

  // all edges once, src < dst, sorted by (src, dst)
  std::vector<WeightedEdge> edges() const;

  // classic local clustering over the full neighborhood of i
  double local_clustering(NodeId i) const;

private:
  void finalize(std::vector<WeightedEdge>&& canonical, std::size_t n);

  std::vector<std::size_t> offsets_; // size n+1
  std::vector<NodeId> nbr_;
  std::vector<double> wgt_;
  std::vector<double> strength_;
  std::size_t edge_count_ = 0;
  double max_weight_ = 0.0;
  double total_weight_ = 0.0;
};

class AttributeTable;

struct HouseholdFilterStats {
  std::size_t removed_same_household = 0;
  std::size_t removed_missing_household = 0;
};

// Drops edges whose endpoints share a household code. Edges with a missing
// household code on either endpoint are dropped too and counted separately.
WeightedGraph filter_same_household(const WeightedGraph& g, const AttributeTable& attrs,
                                    HouseholdFilterStats* stats = nullptr);

// Removes disconnected dyads (edges whose endpoints both have degree 1),
// iterating until a fixed point. Idempotent.
WeightedGraph remove_isolated_ties(const WeightedGraph& g);

} // namespace bowtie

#endif
