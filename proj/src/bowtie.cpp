#include "bowtie/bowtie.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "bowtie/error.hpp"

namespace bowtie {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr std::uint8_t kGroupI = 1;
constexpr std::uint8_t kGroupJ = 2;
constexpr std::uint8_t kGroupShared = 3;

// Reusable per-worker buffers; epoch stamping avoids clearing between edges.
struct Scratch {
  std::vector<std::uint32_t> epoch_of;
  std::vector<std::uint8_t> group_of;
  std::vector<double> w_from_i;
  std::vector<double> w_from_j;
  std::uint32_t epoch = 0;

  void init(std::size_t n) {
    epoch_of.assign(n, 0);
    group_of.assign(n, 0);
    w_from_i.assign(n, 0.0);
    w_from_j.assign(n, 0.0);
    epoch = 0;
  }
};

struct EdgeDecomposition {
  std::uint32_t k_i = 0, k_j = 0;
  double s_i = 0, s_j = 0, w_ij = 0;
  std::size_t n_shared = 0;
  double shared_weight_sum = 0; // Σ_{k in g_ij} (w_ik + w_jk)
  std::size_t m_i = 0, m_j = 0;
  std::size_t e_i = 0, e_j = 0, e_shared = 0;
  double wclust_i_sum = 0, wclust_j_sum = 0; // Σ cbrt(ŵ·ŵ·ŵ) per side group
};

// Marks every bow-tie member of (i,j) in the scratch and fills the shared-side
// weight sums. Group membership lives in scratch for the caller's edge counts.
void classify_groups(const WeightedGraph& g, NodeId i, NodeId j, Scratch& s,
                     EdgeDecomposition& d) {
  ++s.epoch;
  d.k_i = g.degree(i);
  d.k_j = g.degree(j);
  d.s_i = g.strength(i);
  d.s_j = g.strength(j);

  auto ni = g.neighbors(i);
  auto wi = g.neighbor_weights(i);
  for (std::size_t k = 0; k < ni.size(); ++k) {
    NodeId u = ni[k];
    if (u == j) {
      d.w_ij = wi[k];
      continue;
    }
    s.epoch_of[u] = s.epoch;
    s.group_of[u] = kGroupI;
    s.w_from_i[u] = wi[k];
  }
  auto nj = g.neighbors(j);
  auto wj = g.neighbor_weights(j);
  for (std::size_t k = 0; k < nj.size(); ++k) {
    NodeId u = nj[k];
    if (u == i) continue;
    if (s.epoch_of[u] == s.epoch) {
      s.group_of[u] = kGroupShared;
      s.w_from_j[u] = wj[k];
      ++d.n_shared;
      d.shared_weight_sum += s.w_from_i[u] + wj[k];
    } else {
      s.epoch_of[u] = s.epoch;
      s.group_of[u] = kGroupJ;
      s.w_from_j[u] = wj[k];
    }
  }
  d.m_i = d.k_i - 1 - d.n_shared;
  d.m_j = d.k_j - 1 - d.n_shared;
}

// Edges internal to one group plus, for the side groups, the Saramäki triangle
// sum with weights scaled by w_max.
void count_group_edges(const WeightedGraph& g, std::span<const NodeId> base,
                       std::uint8_t code, const Scratch& s, double w_max,
                       const std::vector<double>& w_focal, std::size_t* edge_count,
                       double* cbrt_sum) {
  std::size_t cnt = 0;
  double acc = 0;
  const double inv = w_max > 0 ? 1.0 / w_max : 0.0;
  for (NodeId u : base) {
    if (s.epoch_of[u] != s.epoch || s.group_of[u] != code) continue;
    auto nu = g.neighbors(u);
    auto wu = g.neighbor_weights(u);
    for (std::size_t k = 0; k < nu.size(); ++k) {
      NodeId v = nu[k];
      if (v <= u) continue;
      if (s.epoch_of[v] != s.epoch || s.group_of[v] != code) continue;
      ++cnt;
      if (cbrt_sum)
        acc += std::cbrt(w_focal[u] * inv * (wu[k] * inv) * (w_focal[v] * inv));
    }
  }
  *edge_count = cnt;
  if (cbrt_sum) *cbrt_sum = acc;
}

EdgeDecomposition analyze_edge(const WeightedGraph& g, NodeId i, NodeId j, Scratch& s) {
  EdgeDecomposition d;
  classify_groups(g, i, j, s, d);
  const double w_max = g.max_weight();
  count_group_edges(g, g.neighbors(i), kGroupI, s, w_max, s.w_from_i, &d.e_i,
                    &d.wclust_i_sum);
  count_group_edges(g, g.neighbors(j), kGroupJ, s, w_max, s.w_from_j, &d.e_j,
                    &d.wclust_j_sum);
  count_group_edges(g, g.neighbors(i), kGroupShared, s, w_max, s.w_from_i, &d.e_shared,
                    nullptr);
  return d;
}

double overlap_from(const EdgeDecomposition& d) {
  const double den = static_cast<double>(d.k_i) + static_cast<double>(d.k_j) - 2.0 -
                     static_cast<double>(d.n_shared);
  if (den <= 0) return 0.0;
  return static_cast<double>(d.n_shared) / den;
}

double weighted_overlap_from(const EdgeDecomposition& d) {
  const double den = d.s_i + d.s_j - 2.0 * d.w_ij;
  if (den <= 0) return 0.0;
  return d.shared_weight_sum / den;
}

double pair_clustering(std::size_t m, std::size_t e) {
  if (m < 2) return 0.0;
  return static_cast<double>(e) /
         (static_cast<double>(m) * static_cast<double>(m - 1) / 2.0);
}

double pair_weighted_clustering(std::size_t m, double cbrt_sum) {
  if (m < 2) return 0.0;
  return 2.0 * cbrt_sum / (static_cast<double>(m) * static_cast<double>(m - 1));
}

void require_edge(const WeightedGraph& g, NodeId i, NodeId j) {
  if (i >= g.node_count() || j >= g.node_count() || !g.has_edge(i, j))
    throw ValidationError("(" + std::to_string(i) + "," + std::to_string(j) +
                          ") is not an edge");
}

void fill_row(const WeightedGraph& g, const AttributeTable* attrs, NodeId i, NodeId j,
              Scratch& s, double* row) {
  EdgeDecomposition d = analyze_edge(g, i, j, s);

  row[0] = static_cast<double>(d.k_i + d.k_j);
  row[1] = std::abs(static_cast<double>(d.k_i) - static_cast<double>(d.k_j));
  row[2] = d.s_i + d.s_j;
  row[3] = std::abs(d.s_i - d.s_j);
  const double cc_i = pair_clustering(d.m_i, d.e_i);
  const double cc_j = pair_clustering(d.m_j, d.e_j);
  row[4] = cc_i + cc_j;
  row[5] = std::abs(cc_i - cc_j);
  const double wcc_i = pair_weighted_clustering(d.m_i, d.wclust_i_sum);
  const double wcc_j = pair_weighted_clustering(d.m_j, d.wclust_j_sum);
  row[6] = wcc_i + wcc_j;
  row[7] = std::abs(wcc_i - wcc_j);
  row[8] = kNaN;
  row[9] = kNaN;
  row[10] = kNaN;
  row[11] = kNaN;
  if (attrs && attrs->size() >= g.node_count()) {
    if (attrs->has_age(i) && attrs->has_age(j)) {
      row[8] = attrs->age(i) + attrs->age(j);
      row[9] = std::abs(attrs->age(i) - attrs->age(j));
    }
    if (attrs->has_sex(i) && attrs->has_sex(j)) {
      const bool fi = attrs->sex(i) == Sex::female;
      const bool fj = attrs->sex(j) == Sex::female;
      row[10] = static_cast<double>(fi && fj   ? SexPair::FF
                                    : fi || fj ? SexPair::FM
                                               : SexPair::MM);
    }
    if (attrs->has_zip(i) && attrs->has_zip(j))
      row[11] = attrs->zip(i) == attrs->zip(j) ? 1.0 : 0.0;
  }
  row[12] = overlap_from(d);
  row[13] = weighted_overlap_from(d);
  row[14] = static_cast<double>(d.n_shared);
  row[15] = static_cast<double>(d.e_shared);
  row[16] = static_cast<double>(d.m_i + d.m_j);
  row[17] = std::abs(static_cast<double>(d.m_i) - static_cast<double>(d.m_j));
  row[18] = static_cast<double>(d.e_i + d.e_j);
  row[19] = std::abs(static_cast<double>(d.e_i) - static_cast<double>(d.e_j));
}

} // namespace

int feature_index(const std::string& name) {
  for (std::size_t k = 0; k < kFeatureNames.size(); ++k)
    if (name == kFeatureNames[k]) return static_cast<int>(k);
  return -1;
}

BowTie extract_bowtie(const WeightedGraph& g, NodeId i, NodeId j) {
  require_edge(g, i, j);
  Scratch s;
  s.init(g.node_count());
  EdgeDecomposition d;
  classify_groups(g, i, j, s, d);

  BowTie bt;
  bt.focal_i = i;
  bt.focal_j = j;
  for (NodeId u : g.neighbors(i)) {
    if (u == j) continue;
    if (s.group_of[u] == kGroupShared)
      bt.group_shared.push_back(u);
    else
      bt.group_i.push_back(u);
  }
  for (NodeId u : g.neighbors(j)) {
    if (u == i) continue;
    if (s.group_of[u] == kGroupJ) bt.group_j.push_back(u);
  }

  // every edge among the union, once, in (src,dst) order
  std::vector<NodeId> members;
  members.reserve(bt.group_i.size() + bt.group_j.size() + bt.group_shared.size());
  for (NodeId u : bt.group_i) members.push_back(u);
  for (NodeId u : bt.group_j) members.push_back(u);
  for (NodeId u : bt.group_shared) members.push_back(u);
  std::sort(members.begin(), members.end());
  for (NodeId u : members) {
    auto nu = g.neighbors(u);
    auto wu = g.neighbor_weights(u);
    for (std::size_t k = 0; k < nu.size(); ++k) {
      NodeId v = nu[k];
      if (v <= u || s.epoch_of[v] != s.epoch) continue;
      bt.induced_edges.push_back({u, v, wu[k]});
    }
  }
  return bt;
}

double overlap(const WeightedGraph& g, NodeId i, NodeId j) {
  require_edge(g, i, j);
  Scratch s;
  s.init(g.node_count());
  EdgeDecomposition d;
  classify_groups(g, i, j, s, d);
  return overlap_from(d);
}

double weighted_overlap(const WeightedGraph& g, NodeId i, NodeId j) {
  require_edge(g, i, j);
  Scratch s;
  s.init(g.node_count());
  EdgeDecomposition d;
  classify_groups(g, i, j, s, d);
  return weighted_overlap_from(d);
}

double nonshared_clustering(const WeightedGraph& g, NodeId i, NodeId j, Side which) {
  require_edge(g, i, j);
  Scratch s;
  s.init(g.node_count());
  EdgeDecomposition d;
  classify_groups(g, i, j, s, d);
  const NodeId base = which == Side::i ? i : j;
  const std::uint8_t code = which == Side::i ? kGroupI : kGroupJ;
  std::size_t e = 0;
  count_group_edges(g, g.neighbors(base), code, s, 1.0,
                    which == Side::i ? s.w_from_i : s.w_from_j, &e, nullptr);
  return pair_clustering(which == Side::i ? d.m_i : d.m_j, e);
}

double nonshared_weighted_clustering(const WeightedGraph& g, NodeId i, NodeId j, Side which,
                                     double w_max) {
  if (!(w_max > 0)) throw ValidationError("w_max must be positive");
  require_edge(g, i, j);
  Scratch s;
  s.init(g.node_count());
  EdgeDecomposition d;
  classify_groups(g, i, j, s, d);
  const NodeId base = which == Side::i ? i : j;
  const std::uint8_t code = which == Side::i ? kGroupI : kGroupJ;
  std::size_t e = 0;
  double cbrt_sum = 0;
  count_group_edges(g, g.neighbors(base), code, s, w_max,
                    which == Side::i ? s.w_from_i : s.w_from_j, &e, &cbrt_sum);
  return pair_weighted_clustering(which == Side::i ? d.m_i : d.m_j, cbrt_sum);
}

EdgeFeatures edge_features(const WeightedGraph& g, const AttributeTable* attrs, NodeId i,
                           NodeId j) {
  require_edge(g, i, j);
  Scratch s;
  s.init(g.node_count());
  double row[kFeatureCount];
  fill_row(g, attrs, i, j, s, row);

  EdgeFeatures f;
  f.deg_sum = row[0];
  f.deg_diff = row[1];
  f.str_sum = row[2];
  f.str_diff = row[3];
  f.clust_sum = row[4];
  f.clust_diff = row[5];
  f.wclust_sum = row[6];
  f.wclust_diff = row[7];
  if (!std::isnan(row[8])) {
    f.age_sum = row[8];
    f.age_diff = row[9];
  }
  if (!std::isnan(row[10])) f.sex_pair = static_cast<SexPair>(static_cast<int>(row[10]));
  if (!std::isnan(row[11])) f.same_zip = row[11] != 0.0;
  f.overlap = row[12];
  f.weighted_overlap = row[13];
  f.shared_nodes = row[14];
  f.shared_edges = row[15];
  f.side_nodes_sum = row[16];
  f.side_nodes_diff = row[17];
  f.side_edges_sum = row[18];
  f.side_edges_diff = row[19];
  return f;
}

FeatureMatrix compute_features(const WeightedGraph& g, const AttributeTable* attrs,
                               unsigned threads) {
  auto edge_list = g.edges();
  const std::size_t rows = edge_list.size();
  std::vector<std::pair<NodeId, NodeId>> keys(rows);
  for (std::size_t r = 0; r < rows; ++r) keys[r] = {edge_list[r].src, edge_list[r].dst};
  std::vector<double> data(rows * kFeatureCount);

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(rows, 1)));

  std::atomic<std::size_t> next{0};
  constexpr std::size_t kChunk = 512;
  auto work = [&]() {
    Scratch s;
    s.init(g.node_count());
    for (;;) {
      const std::size_t r0 = next.fetch_add(kChunk);
      if (r0 >= rows) return;
      const std::size_t r1 = std::min(rows, r0 + kChunk);
      for (std::size_t r = r0; r < r1; ++r)
        fill_row(g, attrs, edge_list[r].src, edge_list[r].dst, s,
                 data.data() + r * kFeatureCount);
    }
  };

  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return FeatureMatrix(std::move(keys), std::move(data));
}

} // namespace bowtie
