#include <doctest.h>

#include <cmath>

#include "bowtie/error.hpp"
#include "bowtie/impute.hpp"
#include "bowtie/rng.hpp"
#include "support/synth.hpp"

using namespace bowtie;
using namespace testsupport;

namespace {

// Age tracks degree, sex tracks a high-or-low strength split, so forests have
// signal to recover; a fraction of each attribute is hidden.
struct ImputeFixture {
  WeightedGraph g;
  AttributeTable attrs;

  ImputeFixture(std::size_t n, double missing_frac, std::uint64_t seed)
      : g(random_graph(n, 8.0 / static_cast<double>(n), seed)), attrs(n) {
    Rng rng(seed + 1);
    for (NodeId i = 0; i < n; ++i) {
      if (rng.next_double() >= missing_frac)
        attrs.set_age(i, 20.0 + 3.0 * g.degree(i) + rng.uniform(-2.0, 2.0));
      if (rng.next_double() >= missing_frac)
        attrs.set_sex(i, g.strength(i) > 20.0 ? Sex::female : Sex::male);
      if (rng.next_double() >= missing_frac)
        attrs.set_zip(i, g.degree(i) > 8 ? "urban" : "rural");
    }
  }
};

} // namespace

TEST_CASE("imputation fills every hole and never touches observed values") {
  ImputeFixture f(400, 0.3, 131);
  const auto filled = impute_attributes(f.g, f.attrs, 5);

  for (NodeId i = 0; i < f.g.node_count(); ++i) {
    CHECK(filled.attrs.has_age(i));
    CHECK(filled.attrs.has_sex(i));
    if (f.attrs.has_age(i)) CHECK(filled.attrs.age(i) == f.attrs.age(i));
    if (f.attrs.has_sex(i)) CHECK(filled.attrs.sex(i) == f.attrs.sex(i));
  }
  CHECK(filled.report.age.observed + filled.report.age.imputed == f.g.node_count());
  CHECK(filled.report.age.imputed > 0);
  CHECK(filled.report.sex.imputed > 0);
  CHECK_FALSE(filled.report.node_covariates.empty());
}

TEST_CASE("imputed ages land near the degree-driven truth") {
  ImputeFixture f(500, 0.25, 133);
  const auto filled = impute_attributes(f.g, f.attrs, 7);
  // the held-out validation score is a mean absolute error in years
  CHECK(std::isfinite(filled.report.age.validation_score));
  CHECK(filled.report.age.validation_score < 6.0);
  // sanity on the fills themselves against the generating rule
  double mae = 0;
  std::size_t m = 0;
  for (NodeId i = 0; i < f.g.node_count(); ++i)
    if (!f.attrs.has_age(i)) {
      mae += std::abs(filled.attrs.age(i) - (20.0 + 3.0 * f.g.degree(i)));
      ++m;
    }
  REQUIRE(m > 0);
  CHECK(mae / static_cast<double>(m) < 8.0);
}

TEST_CASE("sex imputation reports a held-out accuracy") {
  ImputeFixture f(500, 0.25, 135);
  const auto filled = impute_attributes(f.g, f.attrs, 9);
  CHECK(std::isfinite(filled.report.sex.validation_score));
  CHECK(filled.report.sex.validation_score > 0.6);
}

TEST_CASE("imputation is deterministic in the seed") {
  ImputeFixture f(300, 0.3, 137);
  const auto a = impute_attributes(f.g, f.attrs, 11);
  const auto b = impute_attributes(f.g, f.attrs, 11);
  for (NodeId i = 0; i < f.g.node_count(); ++i) {
    CHECK(a.attrs.age(i) == b.attrs.age(i));
    CHECK(a.attrs.sex(i) == b.attrs.sex(i));
  }
  const auto c = impute_attributes(f.g, f.attrs, 12);
  bool any_diff = false;
  for (NodeId i = 0; i < f.g.node_count(); ++i)
    any_diff |= a.attrs.age(i) != c.attrs.age(i);
  CHECK(any_diff);
}

TEST_CASE("complete attributes return unchanged with zero imputed counts") {
  ImputeFixture f(200, 0.0, 139);
  const auto filled = impute_attributes(f.g, f.attrs, 13);
  CHECK(filled.report.age.imputed == 0);
  CHECK(filled.report.sex.imputed == 0);
  CHECK(std::isnan(filled.report.age.validation_score));
}

TEST_CASE("too few observed values is an error only when holes exist") {
  ImputeFixture f(80, 0.4, 141); // < 100 observed ages with missing ones
  CHECK_THROWS_AS(impute_attributes(f.g, f.attrs, 15), ValidationError);

  ImputeFixture complete(80, 0.0, 143); // few but complete: nothing to do
  CHECK_NOTHROW(impute_attributes(complete.g, complete.attrs, 15));
}

TEST_CASE("single observed sex class fills constantly with a perfect score") {
  ImputeFixture f(400, 0.0, 145);
  Rng rng(146);
  AttributeTable one_class(f.g.node_count());
  for (NodeId i = 0; i < f.g.node_count(); ++i) {
    one_class.set_age(i, f.attrs.age(i));
    if (rng.next_double() >= 0.3) one_class.set_sex(i, Sex::male);
  }
  const auto filled = impute_attributes(f.g, one_class, 17);
  for (NodeId i = 0; i < f.g.node_count(); ++i)
    CHECK(filled.attrs.sex(i) == Sex::male);
  CHECK(filled.report.sex.validation_score == 1.0);
}

TEST_CASE("attribute table size must match the graph") {
  ImputeFixture f(150, 0.0, 147);
  AttributeTable wrong(10);
  CHECK_THROWS_AS(impute_attributes(f.g, wrong, 19), ValidationError);
}

TEST_CASE("paired zip uses equality when observed and forests otherwise") {
  ImputeFixture f(400, 0.0, 149);
  // hide 30% of zips
  AttributeTable attrs = f.attrs;
  Rng rng(150);
  AttributeTable holes(f.g.node_count());
  for (NodeId i = 0; i < f.g.node_count(); ++i) {
    holes.set_age(i, attrs.age(i));
    holes.set_sex(i, attrs.sex(i));
    if (rng.next_double() >= 0.3) holes.set_zip(i, attrs.zip(i));
  }
  const auto pz = impute_paired_zip(f.g, holes, 21);
  REQUIRE(pz.z.size() == f.g.edge_count());
  const auto edges = f.g.edges();
  std::size_t imputed = 0;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    CHECK((pz.z[e] == 0.0 || pz.z[e] == 1.0));
    if (holes.has_zip(edges[e].src) && holes.has_zip(edges[e].dst)) {
      CHECK_FALSE(pz.was_imputed[e]);
      CHECK(pz.z[e] ==
            (holes.zip(edges[e].src) == holes.zip(edges[e].dst) ? 1.0 : 0.0));
    } else {
      CHECK(pz.was_imputed[e]);
      ++imputed;
    }
  }
  CHECK(imputed > 0);
  CHECK(pz.stats.imputed == imputed);
}

TEST_CASE("fully observed zips never impute") {
  ImputeFixture f(200, 0.0, 151);
  const auto pz = impute_paired_zip(f.g, f.attrs, 23);
  CHECK(pz.stats.imputed == 0);
  for (auto flag : pz.was_imputed) CHECK_FALSE(flag);
}

TEST_CASE("imputation report serializes with covariate provenance") {
  ImputeFixture f(300, 0.2, 153);
  const auto filled = impute_attributes(f.g, f.attrs, 25);
  const std::string json = imputation_report_json_string(filled.report);
  CHECK(json.find("\"age\"") != std::string::npos);
  CHECK(json.find("\"node_covariates\"") != std::string::npos);
  CHECK(json.find("covariate_note") != std::string::npos);
}
