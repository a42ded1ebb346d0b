#include <doctest.h>

#include <cmath>
#include <map>

#include "bowtie/error.hpp"
#include "bowtie/strength.hpp"
#include "support/synth.hpp"

using namespace bowtie;
using namespace testsupport;

TEST_CASE("multiplex strength copies integer weights per edge") {
  const auto g = WeightedGraph::from_multiplex({{0, 1, 0}, {0, 1, 1}, {1, 2, 4}});
  const auto t = multiplex_strength(g);
  REQUIRE(t.size() == 2);
  CHECK(t.kind() == TargetKind::multiplex_w);
  CHECK(t.values()[0] == 2.0);
  CHECK(t.values()[1] == 1.0);
  CHECK(t.rows()[0].orientation == Orientation::sym);
}

TEST_CASE("multiplex strength rejects non-integer or out-of-range weights") {
  const auto fractional = WeightedGraph::from_edges({{0, 1, 1.5}});
  CHECK_THROWS_AS(multiplex_strength(fractional), ValidationError);
  const auto too_big = WeightedGraph::from_edges({{0, 1, 13.0}});
  CHECK_THROWS_AS(multiplex_strength(too_big), ValidationError);
}

TEST_CASE("normalized strength divides by the endpoint strength") {
  const auto g = WeightedGraph::from_edges({{0, 1, 2.0}, {1, 2, 8.0}});
  const auto t = normalized_strengths(g);
  REQUIRE(t.size() == 4); // two rows per edge
  std::map<std::tuple<NodeId, NodeId, int>, double> by_row;
  for (std::size_t r = 0; r < t.size(); ++r)
    by_row[{t.rows()[r].src, t.rows()[r].dst,
            static_cast<int>(t.rows()[r].orientation)}] = t.values()[r];
  // y_01 = 2/2 = 1 (node 0 only has this edge); y_10 = 2/10
  CHECK(by_row[{0, 1, 0}] == doctest::Approx(1.0));
  CHECK(by_row[{0, 1, 1}] == doctest::Approx(0.2));
  CHECK(by_row[{1, 2, 0}] == doctest::Approx(0.8));
  CHECK(by_row[{1, 2, 1}] == doctest::Approx(1.0));
}

TEST_CASE("single orientation keeps one row per edge") {
  const auto g = WeightedGraph::from_edges({{0, 1, 2.0}, {1, 2, 8.0}});
  const auto t = normalized_strengths(g, false);
  REQUIRE(t.size() == 2);
  for (const auto& row : t.rows()) CHECK(row.orientation == Orientation::ij);
}

TEST_CASE("normalized strengths are row stochastic") {
  const auto g = random_graph(40, 0.3, 21);
  const auto t = normalized_strengths(g);
  std::vector<double> per_node(g.node_count(), 0.0);
  for (std::size_t r = 0; r < t.size(); ++r) {
    const auto& row = t.rows()[r];
    const NodeId perspective = row.orientation == Orientation::ij ? row.src : row.dst;
    per_node[perspective] += t.values()[r];
  }
  for (NodeId i = 0; i < g.node_count(); ++i)
    if (g.degree(i) > 0) CHECK(per_node[i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("averaged strength is the mean of both orientations") {
  const auto g = WeightedGraph::from_edges({{0, 1, 2.0}, {1, 2, 8.0}});
  const auto z = averaged_strength(g);
  REQUIRE(z.size() == 2);
  CHECK(z.values()[0] == doctest::Approx(0.6)); // (1.0 + 0.2)/2
  CHECK(z.values()[1] == doctest::Approx(0.9)); // (0.8 + 1.0)/2
  CHECK(z.rows()[0].orientation == Orientation::sym);
}

TEST_CASE("lone dyad averages to exactly 1") {
  const auto g = WeightedGraph::from_edges({{0, 1, 3.25}});
  const auto z = averaged_strength(g);
  CHECK(z.values()[0] == doctest::Approx(1.0));
}

TEST_CASE("log centering zeroes the mean and stores the center") {
  const auto g = random_graph(30, 0.3, 33);
  const auto z = averaged_strength(g);
  const auto c = apply_log_center(z);
  CHECK(c.log_centered());
  double mean = 0;
  for (double v : c.values()) mean += v;
  CHECK(mean / static_cast<double>(c.size()) == doctest::Approx(0.0).epsilon(1e-12));

  double log_mean = 0;
  for (double v : z.values()) log_mean += std::log(v);
  CHECK(c.center() == doctest::Approx(log_mean / static_cast<double>(z.size())));
}

TEST_CASE("log centering round trips") {
  const auto g = random_graph(30, 0.3, 35);
  const auto y = normalized_strengths(g);
  const auto back = invert_log_center(apply_log_center(y));
  CHECK_FALSE(back.log_centered());
  REQUIRE(back.size() == y.size());
  for (std::size_t r = 0; r < y.size(); ++r)
    CHECK(back.values()[r] == doctest::Approx(y.values()[r]).epsilon(1e-12));
}

TEST_CASE("constant vector centers to zero") {
  const auto g = WeightedGraph::from_edges({{0, 1, 2.0}, {2, 3, 2.0}});
  const auto w = multiplex_strength(g);
  const auto c = apply_log_center(w);
  for (double v : c.values()) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("double centering and inverting a raw target are rejected") {
  const auto g = WeightedGraph::from_edges({{0, 1, 2.0}});
  const auto w = multiplex_strength(g);
  CHECK_THROWS_AS(invert_log_center(w), ValidationError);
  CHECK_THROWS_AS(apply_log_center(apply_log_center(w)), ValidationError);
}
