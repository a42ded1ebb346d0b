#ifndef BOWTIE_MODEL_IO_HPP
#define BOWTIE_MODEL_IO_HPP

#include <optional>
#include <string>

#include "bowtie/dataset.hpp"
#include "bowtie/forest.hpp"
#include "bowtie/linear.hpp"
#include "bowtie/strength.hpp"

namespace bowtie {

// A fitted learner plus everything needed to apply it later: feature
// configuration, target transform state, and the seed it was trained under.
struct ModelArtifact {
  LearnerKind learner = LearnerKind::ols;
  FeatureConfig config = FeatureConfig::model1;
  TargetKind target_kind = TargetKind::multiplex_w;
  bool log_centered = false;
  double log_center = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;

  std::optional<ForestModel> forest;
  std::optional<LinearModel> linear;
};

// Versioned JSON files. Doubles are written as hex floats so a load/save
// round trip reproduces predictions bit for bit.
void save_model(const ModelArtifact& artifact, const std::string& path);
ModelArtifact load_model(const std::string& path);

// raw-row prediction through whichever learner the artifact holds
std::vector<double> predict_artifact(const ModelArtifact& artifact, const Dataset& d,
                                     std::size_t threads = 0);

} // namespace bowtie

#endif
