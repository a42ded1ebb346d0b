#include "bowtie/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "bowtie/attributes.hpp"
#include "bowtie/error.hpp"

namespace bowtie {

namespace {

std::string pair_str(NodeId i, NodeId j) {
  return "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

} // namespace

void WeightedGraph::finalize(std::vector<WeightedEdge>&& canonical, std::size_t n) {
  // canonical: src < dst, sorted by (src, dst), duplicates already merged
  edge_count_ = canonical.size();
  offsets_.assign(n + 1, 0);
  for (const auto& e : canonical) {
    ++offsets_[e.src + 1];
    ++offsets_[e.dst + 1];
  }
  for (std::size_t i = 1; i <= n; ++i) offsets_[i] += offsets_[i - 1];

  nbr_.resize(2 * edge_count_);
  wgt_.resize(2 * edge_count_);
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  // lexicographic edge order fills every neighbor list in sorted order:
  // for node x, all (a,x) with a<x precede all (x,b)
  for (const auto& e : canonical) {
    nbr_[cursor[e.src]] = e.dst;
    wgt_[cursor[e.src]++] = e.weight;
    nbr_[cursor[e.dst]] = e.src;
    wgt_[cursor[e.dst]++] = e.weight;
  }

  strength_.assign(n, 0.0);
  max_weight_ = 0.0;
  total_weight_ = 0.0;
  for (const auto& e : canonical) {
    strength_[e.src] += e.weight;
    strength_[e.dst] += e.weight;
    max_weight_ = std::max(max_weight_, e.weight);
    total_weight_ += e.weight;
  }
}

WeightedGraph WeightedGraph::from_edges(const std::vector<WeightedEdge>& edges,
                                        std::size_t node_count_hint) {
  std::vector<WeightedEdge> canon;
  canon.reserve(edges.size());
  std::size_t n = node_count_hint;
  for (const auto& e : edges) {
    if (e.src == e.dst)
      throw ValidationError("self-loop rejected at " + pair_str(e.src, e.dst));
    if (!(e.weight > 0.0))
      throw ValidationError("nonpositive weight " + std::to_string(e.weight) +
                            " on edge " + pair_str(e.src, e.dst));
    NodeId a = std::min(e.src, e.dst);
    NodeId b = std::max(e.src, e.dst);
    canon.push_back({a, b, e.weight});
    n = std::max<std::size_t>(n, static_cast<std::size_t>(b) + 1);
  }
  std::sort(canon.begin(), canon.end(), [](const WeightedEdge& x, const WeightedEdge& y) {
    return x.src != y.src ? x.src < y.src : x.dst < y.dst;
  });
  // sum duplicate (i,j) entries into one edge
  std::size_t out = 0;
  for (std::size_t k = 0; k < canon.size(); ++k) {
    if (out > 0 && canon[out - 1].src == canon[k].src && canon[out - 1].dst == canon[k].dst) {
      canon[out - 1].weight += canon[k].weight;
    } else {
      canon[out++] = canon[k];
    }
  }
  canon.resize(out);

  WeightedGraph g;
  g.finalize(std::move(canon), n);
  return g;
}

WeightedGraph WeightedGraph::from_multiplex(const std::vector<MultiplexRecord>& records,
                                            std::size_t node_count_hint) {
  struct PairLayer {
    NodeId src, dst;
    std::uint32_t layer;
  };
  std::vector<PairLayer> entries;
  entries.reserve(records.size());
  std::size_t n = node_count_hint;
  for (const auto& r : records) {
    if (r.layer >= kMultiplexLayerCount)
      throw ValidationError("layer index " + std::to_string(r.layer) + " out of range 0.." +
                            std::to_string(kMultiplexLayerCount - 1));
    if (r.src == r.dst)
      throw ValidationError("self-loop rejected at " + pair_str(r.src, r.dst));
    NodeId a = std::min(r.src, r.dst);
    NodeId b = std::max(r.src, r.dst);
    entries.push_back({a, b, r.layer});
    n = std::max<std::size_t>(n, static_cast<std::size_t>(b) + 1);
  }
  std::sort(entries.begin(), entries.end(), [](const PairLayer& x, const PairLayer& y) {
    if (x.src != y.src) return x.src < y.src;
    if (x.dst != y.dst) return x.dst < y.dst;
    return x.layer < y.layer;
  });
  // weight = number of distinct layers per unordered pair
  std::vector<WeightedEdge> canon;
  for (std::size_t k = 0; k < entries.size();) {
    std::size_t e = k;
    std::uint32_t layers = 0;
    std::uint32_t last_layer = kMultiplexLayerCount;
    while (e < entries.size() && entries[e].src == entries[k].src &&
           entries[e].dst == entries[k].dst) {
      if (entries[e].layer != last_layer) {
        ++layers;
        last_layer = entries[e].layer;
      }
      ++e;
    }
    canon.push_back({entries[k].src, entries[k].dst, static_cast<double>(layers)});
    k = e;
  }

  WeightedGraph g;
  g.finalize(std::move(canon), n);
  return g;
}

NodeStats WeightedGraph::node_stats(NodeId i) const {
  if (i >= node_count())
    throw ValidationError("node " + std::to_string(i) + " out of range (node_count=" +
                          std::to_string(node_count()) + ")");
  return {degree(i), strength(i)};
}

bool WeightedGraph::has_edge(NodeId i, NodeId j) const {
  auto ns = neighbors(i);
  return std::binary_search(ns.begin(), ns.end(), j);
}

double WeightedGraph::edge_weight(NodeId i, NodeId j) const {
  auto ns = neighbors(i);
  auto it = std::lower_bound(ns.begin(), ns.end(), j);
  if (it == ns.end() || *it != j) return 0.0;
  return neighbor_weights(i)[static_cast<std::size_t>(it - ns.begin())];
}

std::vector<WeightedEdge> WeightedGraph::edges() const {
  std::vector<WeightedEdge> out;
  out.reserve(edge_count_);
  for (NodeId i = 0; i < node_count(); ++i) {
    auto ns = neighbors(i);
    auto ws = neighbor_weights(i);
    for (std::size_t k = 0; k < ns.size(); ++k)
      if (ns[k] > i) out.push_back({i, ns[k], ws[k]});
  }
  return out;
}

double WeightedGraph::local_clustering(NodeId i) const {
  auto ns = neighbors(i);
  std::size_t k = ns.size();
  if (k < 2) return 0.0;
  // count edges among neighbors via sorted intersections
  std::size_t links = 0;
  for (NodeId u : ns) {
    auto us = neighbors(u);
    // intersect ns and us, count pairs once (u < v)
    std::size_t a = 0, b = 0;
    while (a < ns.size() && b < us.size()) {
      if (ns[a] < us[b]) {
        ++a;
      } else if (us[b] < ns[a]) {
        ++b;
      } else {
        if (us[b] > u) ++links;
        ++a;
        ++b;
      }
    }
  }
  return static_cast<double>(links) /
         (static_cast<double>(k) * static_cast<double>(k - 1) / 2.0);
}

WeightedGraph filter_same_household(const WeightedGraph& g, const AttributeTable& attrs,
                                    HouseholdFilterStats* stats) {
  HouseholdFilterStats local;
  std::vector<WeightedEdge> kept;
  for (const auto& e : g.edges()) {
    if (!attrs.has_household(e.src) || !attrs.has_household(e.dst)) {
      ++local.removed_missing_household;
      continue;
    }
    if (attrs.household(e.src) == attrs.household(e.dst)) {
      ++local.removed_same_household;
      continue;
    }
    kept.push_back(e);
  }
  if (stats) *stats = local;
  return WeightedGraph::from_edges(kept, g.node_count());
}

WeightedGraph remove_isolated_ties(const WeightedGraph& g) {
  WeightedGraph cur = g;
  for (;;) {
    std::vector<WeightedEdge> kept;
    bool changed = false;
    for (const auto& e : cur.edges()) {
      if (cur.degree(e.src) == 1 && cur.degree(e.dst) == 1) {
        changed = true;
        continue;
      }
      kept.push_back(e);
    }
    if (!changed) return cur;
    cur = WeightedGraph::from_edges(kept, cur.node_count());
  }
}

std::size_t AttributeTable::observed_age_count() const {
  std::size_t c = 0;
  for (std::size_t i = 0; i < age_.size(); ++i)
    if (has_age(static_cast<NodeId>(i))) ++c;
  return c;
}

std::size_t AttributeTable::observed_sex_count() const {
  std::size_t c = 0;
  for (std::size_t i = 0; i < sex_.size(); ++i)
    if (has_sex(static_cast<NodeId>(i))) ++c;
  return c;
}

std::size_t AttributeTable::observed_zip_count() const {
  std::size_t c = 0;
  for (std::size_t i = 0; i < zip_.size(); ++i)
    if (has_zip(static_cast<NodeId>(i))) ++c;
  return c;
}

} // namespace bowtie
