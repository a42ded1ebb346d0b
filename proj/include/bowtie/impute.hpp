#ifndef BOWTIE_IMPUTE_HPP
#define BOWTIE_IMPUTE_HPP

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "bowtie/attributes.hpp"
#include "bowtie/bowtie.hpp"
#include "bowtie/graph.hpp"

namespace bowtie {

struct AttributeImputation {
  std::size_t observed = 0;
  std::size_t imputed = 0;
  // held-out 20% of the observed values: MAE for age, accuracy for sex and
  // paired zip; NaN when nothing needed imputing
  double validation_score = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
};

struct ImputationReport {
  AttributeImputation age;
  AttributeImputation sex;
  AttributeImputation paired_zip;
  // the node-level covariates behind age/sex fills, recorded because the
  // choice is ours, not the data's
  std::vector<std::string> node_covariates;
  std::vector<std::string> edge_covariates;
};

struct ImputedAttributes {
  AttributeTable attrs;
  ImputationReport report;
};

// Fills missing age (forest regression) and sex (forest classification) from
// node-level features of the observed nodes. Observed cells are never
// touched; each imputed attribute needs >= 100 observed values.
ImputedAttributes impute_attributes(const WeightedGraph& g, const AttributeTable& attrs,
                                    std::uint64_t seed);

struct PairedZip {
  std::vector<double> z;               // one per g.edges() row, 0 or 1
  std::vector<std::uint8_t> was_imputed;
  AttributeImputation stats;
};

// Z = 1 when both endpoints share a billing zip, 0 when they differ, and a
// forest classification on the edge's structural features otherwise. Pass a
// precomputed full-graph FeatureMatrix to skip recomputing it.
PairedZip impute_paired_zip(const WeightedGraph& g, const AttributeTable& attrs,
                            std::uint64_t seed, const FeatureMatrix* features = nullptr,
                            ImputationReport* report = nullptr);

void write_imputation_report(const ImputationReport& report, const std::string& path);
std::string imputation_report_json_string(const ImputationReport& report);

} // namespace bowtie

#endif
