#ifndef TESTS_SUPPORT_ORACLE_HPP
#define TESTS_SUPPORT_ORACLE_HPP

// Brute-force reference implementations over a dense adjacency matrix. These
// share no code with the library: groups come from std::set algebra and every
// quantity is recomputed from first principles, so agreement is evidence, not
// tautology.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "bowtie/attributes.hpp"
#include "bowtie/bowtie.hpp"
#include "bowtie/graph.hpp"

namespace testsupport {

class DenseGraph {
public:
  explicit DenseGraph(const bowtie::WeightedGraph& g)
      : n_(g.node_count()), w_(n_ * n_, 0.0) {
    for (const auto& e : g.edges()) {
      w_[e.src * n_ + e.dst] = e.weight;
      w_[e.dst * n_ + e.src] = e.weight;
    }
  }

  std::size_t size() const { return n_; }
  double weight(std::size_t i, std::size_t j) const { return w_[i * n_ + j]; }
  bool connected(std::size_t i, std::size_t j) const { return weight(i, j) > 0; }

  std::set<bowtie::NodeId> neighbors(std::size_t i) const {
    std::set<bowtie::NodeId> out;
    for (std::size_t j = 0; j < n_; ++j)
      if (connected(i, j)) out.insert(static_cast<bowtie::NodeId>(j));
    return out;
  }

  std::size_t degree(std::size_t i) const { return neighbors(i).size(); }

  double strength(std::size_t i) const {
    double s = 0;
    for (std::size_t j = 0; j < n_; ++j) s += weight(i, j);
    return s;
  }

  double max_weight() const {
    double m = 0;
    for (double v : w_) m = std::max(m, v);
    return m;
  }

  // classic clustering over the full neighborhood
  double local_clustering(std::size_t i) const {
    const auto nbr = neighbors(i);
    const std::size_t k = nbr.size();
    if (k < 2) return 0.0;
    std::size_t links = 0;
    for (auto a : nbr)
      for (auto b : nbr)
        if (a < b && connected(a, b)) ++links;
    return 2.0 * static_cast<double>(links) / (static_cast<double>(k) * (k - 1));
  }

private:
  std::size_t n_;
  std::vector<double> w_;
};

struct OracleBowTie {
  std::set<bowtie::NodeId> group_i, group_j, shared;
  std::vector<bowtie::WeightedEdge> induced; // src < dst, sorted
};

inline OracleBowTie oracle_bowtie(const DenseGraph& d, bowtie::NodeId i, bowtie::NodeId j) {
  OracleBowTie bt;
  const auto ni = d.neighbors(i);
  const auto nj = d.neighbors(j);
  std::set_intersection(ni.begin(), ni.end(), nj.begin(), nj.end(),
                        std::inserter(bt.shared, bt.shared.end()));
  std::set_difference(ni.begin(), ni.end(), nj.begin(), nj.end(),
                      std::inserter(bt.group_i, bt.group_i.end()));
  bt.group_i.erase(j);
  std::set_difference(nj.begin(), nj.end(), ni.begin(), ni.end(),
                      std::inserter(bt.group_j, bt.group_j.end()));
  bt.group_j.erase(i);

  std::set<bowtie::NodeId> all;
  for (const auto& s : {bt.group_i, bt.group_j, bt.shared}) all.insert(s.begin(), s.end());
  for (auto a : all)
    for (auto b : all)
      if (a < b && d.connected(a, b))
        bt.induced.push_back({a, b, d.weight(a, b)});
  return bt;
}

inline std::size_t edges_within(const DenseGraph& d, const std::set<bowtie::NodeId>& s) {
  std::size_t e = 0;
  for (auto a : s)
    for (auto b : s)
      if (a < b && d.connected(a, b)) ++e;
  return e;
}

inline double oracle_overlap(const DenseGraph& d, bowtie::NodeId i, bowtie::NodeId j) {
  const auto bt = oracle_bowtie(d, i, j);
  const double denom = static_cast<double>(d.degree(i)) + static_cast<double>(d.degree(j)) -
                       2.0 - static_cast<double>(bt.shared.size());
  if (denom == 0) return 0.0;
  return static_cast<double>(bt.shared.size()) / denom;
}

inline double oracle_weighted_overlap(const DenseGraph& d, bowtie::NodeId i,
                                      bowtie::NodeId j) {
  const auto bt = oracle_bowtie(d, i, j);
  double num = 0;
  for (auto k : bt.shared) num += d.weight(i, k) + d.weight(j, k);
  const double denom = d.strength(i) + d.strength(j) - 2.0 * d.weight(i, j);
  if (denom == 0) return 0.0;
  return num / denom;
}

inline double oracle_nonshared_clustering(const DenseGraph& d, bowtie::NodeId i,
                                          bowtie::NodeId j, bool side_i) {
  const auto bt = oracle_bowtie(d, i, j);
  const auto& grp = side_i ? bt.group_i : bt.group_j;
  const std::size_t m = grp.size();
  if (m < 2) return 0.0;
  const double pairs = 0.5 * static_cast<double>(m) * static_cast<double>(m - 1);
  return static_cast<double>(edges_within(d, grp)) / pairs;
}

inline double oracle_nonshared_weighted_clustering(const DenseGraph& d, bowtie::NodeId i,
                                                   bowtie::NodeId j, bool side_i,
                                                   double w_max) {
  const auto bt = oracle_bowtie(d, i, j);
  const auto& grp = side_i ? bt.group_i : bt.group_j;
  const std::size_t m = grp.size();
  if (m < 2) return 0.0;
  const bowtie::NodeId focal = side_i ? i : j;
  double sum = 0;
  for (auto u : grp)
    for (auto v : grp)
      if (u < v && d.connected(u, v))
        sum += std::cbrt((d.weight(focal, u) / w_max) * (d.weight(u, v) / w_max) *
                         (d.weight(focal, v) / w_max));
  return 2.0 * sum / (static_cast<double>(m) * static_cast<double>(m - 1));
}

// The 20 feature columns in matrix order; NaN where an attribute is missing.
inline std::array<double, bowtie::kFeatureCount>
oracle_feature_row(const DenseGraph& d, const bowtie::AttributeTable* attrs,
                   bowtie::NodeId i, bowtie::NodeId j) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  const auto bt = oracle_bowtie(d, i, j);
  const double ki = static_cast<double>(d.degree(i));
  const double kj = static_cast<double>(d.degree(j));
  const double si = d.strength(i);
  const double sj = d.strength(j);
  const double wmax = d.max_weight();
  const double cci = oracle_nonshared_clustering(d, i, j, true);
  const double ccj = oracle_nonshared_clustering(d, i, j, false);
  const double wci = oracle_nonshared_weighted_clustering(d, i, j, true, wmax);
  const double wcj = oracle_nonshared_weighted_clustering(d, i, j, false, wmax);

  std::array<double, bowtie::kFeatureCount> row{};
  row[0] = ki + kj;
  row[1] = std::abs(ki - kj);
  row[2] = si + sj;
  row[3] = std::abs(si - sj);
  row[4] = cci + ccj;
  row[5] = std::abs(cci - ccj);
  row[6] = wci + wcj;
  row[7] = std::abs(wci - wcj);
  row[8] = nan;
  row[9] = nan;
  row[10] = nan;
  row[11] = nan;
  if (attrs) {
    if (attrs->has_age(i) && attrs->has_age(j)) {
      row[8] = attrs->age(i) + attrs->age(j);
      row[9] = std::abs(attrs->age(i) - attrs->age(j));
    }
    if (attrs->has_sex(i) && attrs->has_sex(j)) {
      const bool fi = attrs->sex(i) == bowtie::Sex::female;
      const bool fj = attrs->sex(j) == bowtie::Sex::female;
      row[10] = (fi && fj) ? 1.0 : (fi != fj ? 2.0 : 0.0);
    }
    if (attrs->has_zip(i) && attrs->has_zip(j))
      row[11] = attrs->zip(i) == attrs->zip(j) ? 1.0 : 0.0;
  }
  row[12] = oracle_overlap(d, i, j);
  row[13] = oracle_weighted_overlap(d, i, j);
  row[14] = static_cast<double>(bt.shared.size());
  row[15] = static_cast<double>(edges_within(d, bt.shared));
  row[16] = static_cast<double>(bt.group_i.size() + bt.group_j.size());
  row[17] = std::abs(static_cast<double>(bt.group_i.size()) -
                     static_cast<double>(bt.group_j.size()));
  row[18] = static_cast<double>(edges_within(d, bt.group_i) + edges_within(d, bt.group_j));
  row[19] = std::abs(static_cast<double>(edges_within(d, bt.group_i)) -
                     static_cast<double>(edges_within(d, bt.group_j)));
  return row;
}

} // namespace testsupport

#endif
