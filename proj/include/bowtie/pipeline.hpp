#ifndef BOWTIE_PIPELINE_HPP
#define BOWTIE_PIPELINE_HPP

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "bowtie/dataset.hpp"
#include "bowtie/graph.hpp"
#include "bowtie/impute.hpp"
#include "bowtie/linear.hpp"
#include "bowtie/strength.hpp"

namespace bowtie {

enum class DatasetKind : std::uint8_t { multiplex, cdr, generic };

const char* dataset_kind_name(DatasetKind k);
DatasetKind dataset_kind_from_name(const std::string& name);

struct RunConfig {
  DatasetKind kind = DatasetKind::generic;
  std::string edges_path;
  std::string layer_manifest_path; // multiplex layer-name manifest, optional
  std::string attributes_path;     // optional
  std::string output_dir = ".";

  std::vector<LearnerKind> learners;
  FeatureConfig config = FeatureConfig::model1;
  TargetKind target = TargetKind::multiplex_w;
  std::uint64_t seed = 1;
  double split_fraction = 0.8; // training share of modeling rows
  std::size_t sample_edges = 0; // 0 = model every edge
  bool complete_case_only = false;
  bool impute = false;
  bool include_zip = true;
  bool single_orientation = false; // y target: drop the ji rows
  bool in_sample = false;          // evaluate on the training rows, labeled as such
  bool filter_households = false;  // drop same- or missing-household ties
  bool drop_isolated_dyads = false;
  // log-then-center the response for the gaussian linear learners:
  // -1 = only for the duration-derived targets (y, z), 0 = never, 1 = always
  int log_target = -1;
  unsigned threads = 0;
};

// 16-hex-digit FNV-1a digest of the canonical config text; stamped into every
// artifact the run writes.
std::string config_hash(const RunConfig& cfg);

struct CoefficientEntry {
  std::string name;
  double value = 0.0;
  double std_error = std::numeric_limits<double>::quiet_NaN();
};

struct ConfusionCell {
  double truth = 0.0, predicted = 0.0;
  std::size_t count = 0;
};

struct ModelEvaluation {
  LearnerKind learner = LearnerKind::ols;
  std::string model_file;
  std::vector<std::string> schema;
  // normalized to sum 1: impurity decrease for forests, |coefficient| on the
  // standardized scale for the linear learners
  std::vector<double> importance;
  bool importance_from_trees = false;
  double null_importance = 0.0;

  double intercept = std::numeric_limits<double>::quiet_NaN();
  std::vector<CoefficientEntry> coefficients;
  double adjusted_r2 = std::numeric_limits<double>::quiet_NaN();
  double deviance = std::numeric_limits<double>::quiet_NaN();
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double shrinkage_ratio = std::numeric_limits<double>::quiet_NaN();
  std::size_t irls_iterations = 0;
  CVResult cv; // tuning curve, empty for untuned learners

  std::vector<double> thresholds;      // ascending
  std::vector<double> fraction_within; // nondecreasing, ends at 1
  double residual_mean_abs = std::numeric_limits<double>::quiet_NaN();
  double residual_median_abs = std::numeric_limits<double>::quiet_NaN();

  double exact_accuracy = std::numeric_limits<double>::quiet_NaN();
  double within_one_accuracy = std::numeric_limits<double>::quiet_NaN();
  std::vector<ConfusionCell> confusion; // classification, sorted by (truth, predicted)
};

struct EvaluationReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  DatasetKind kind = DatasetKind::generic;
  TargetKind target = TargetKind::multiplex_w;
  FeatureConfig config = FeatureConfig::model1;
  bool in_sample = false;
  bool log_target = false;

  std::size_t nodes = 0;
  std::size_t graph_edges = 0;
  std::size_t modeled_edges = 0;
  std::size_t target_rows = 0;
  std::size_t train_rows = 0;
  std::size_t eval_rows = 0;

  bool households_filtered = false;
  HouseholdFilterStats household;
  bool isolated_dyads_removed = false;
  std::size_t isolated_removed_edges = 0;
  std::vector<std::size_t> strength_histogram; // counts of w = 1..12, multiplex only

  bool imputed = false;
  ImputationReport imputation;

  std::vector<ModelEvaluation> models;
  std::vector<std::string> notes;
};

// ingest -> preprocess -> features -> impute -> fit -> evaluate -> report.
// Writes features, targets, models, report.json/report.txt, and plots under
// cfg.output_dir; holds a lock file there for the duration.
EvaluationReport run_pipeline(const RunConfig& cfg);

// fraction of |residual| <= t for each threshold; thresholds must ascend
std::vector<double> accuracy_curve(const std::vector<double>& residuals,
                                   const std::vector<double>& thresholds);

// 0..max|residual| in 200 even steps, plus the named report thresholds
// (1 strength unit, 0.05, 0.1), ascending and deduplicated
std::vector<double> residual_thresholds(const std::vector<double>& residuals);

// uniform edge-row sample without replacement, ascending indices into
// g.edges() order; n must not exceed the edge count
std::vector<std::size_t> sample_edges(const WeightedGraph& g, std::size_t n,
                                      std::uint64_t seed);

// accuracy curve SVG plus one importance SVG per model, with the 1/p null
// line, next to CSVs of the plotted values. No files for an empty model set.
void emit_plots(const EvaluationReport& report, const std::string& dir);

void write_report_json(const EvaluationReport& report, const std::string& path);
void write_report_text(const EvaluationReport& report, const std::string& path);
EvaluationReport load_report_json(const std::string& path);
std::string report_json_string(const EvaluationReport& report);
std::string evaluation_json_string(const ModelEvaluation& ev, std::size_t rows_used);

// Apply a saved model to a feature matrix and target on the raw scale. Rows
// with a hole in any model column are skipped; rows_used reports the rest.
struct ModelArtifact;
ModelEvaluation evaluate_artifact(const ModelArtifact& artifact, const FeatureMatrix& fm,
                                  const TieStrengthTarget& target,
                                  std::size_t* rows_used = nullptr);

} // namespace bowtie

#endif
