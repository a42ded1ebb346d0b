#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "bowtie/error.hpp"
#include "bowtie/io.hpp"
#include "bowtie/model_io.hpp"
#include "bowtie/pipeline.hpp"
#include "support/synth.hpp"

using namespace bowtie;
using namespace testsupport;
namespace fs = std::filesystem;

namespace {

// Multiplex network on disk plus a base configuration pointing at it.
struct PipelineFixture {
  TempDir dir{"pipeline"};
  WeightedGraph g;
  AttributeTable attrs;
  RunConfig cfg;

  explicit PipelineFixture(std::size_t n = 60, double p = 0.18,
                           std::uint64_t seed = 71, double p_attr = 1.0,
                           std::size_t households = 0)
      : g(random_multiplex_graph(n, p, seed)),
        attrs(random_attributes(n, seed + 1, p_attr, p_attr, p_attr, 5, households)) {
    write_file(dir.path() + "/edges.csv", multiplex_csv(g, seed + 2));
    write_file(dir.path() + "/attributes.csv", attributes_csv(attrs));
    cfg.kind = DatasetKind::multiplex;
    cfg.edges_path = dir.path() + "/edges.csv";
    cfg.attributes_path = dir.path() + "/attributes.csv";
    cfg.output_dir = dir.path() + "/out";
    cfg.seed = 9;
  }
};

bool file_exists(const std::string& path) { return fs::exists(path); }

void check_model_shape(const ModelEvaluation& ev) {
  CHECK(!ev.schema.empty());
  CHECK(ev.importance.size() == ev.schema.size());
  double total = 0;
  for (double v : ev.importance) {
    CHECK(v >= 0);
    total += v;
  }
  // all-zero rows are legal for a fully shrunk penalized fit
  CHECK((std::abs(total - 1.0) < 1e-9 || total == 0));
  CHECK(ev.null_importance == doctest::Approx(1.0 / double(ev.schema.size())));
  REQUIRE(!ev.thresholds.empty());
  CHECK(ev.thresholds.size() == ev.fraction_within.size());
  CHECK(std::is_sorted(ev.thresholds.begin(), ev.thresholds.end()));
  CHECK(std::is_sorted(ev.fraction_within.begin(), ev.fraction_within.end()));
  CHECK(ev.fraction_within.back() == doctest::Approx(1.0));
  CHECK(std::isfinite(ev.residual_mean_abs));
  CHECK(std::isfinite(ev.residual_median_abs));
}

} // namespace

TEST_CASE("full run writes every artifact and a coherent report") {
  PipelineFixture f;
  f.cfg.learners = {LearnerKind::forest_reg, LearnerKind::forest_clf,
                    LearnerKind::ols,        LearnerKind::poisson,
                    LearnerKind::lasso,      LearnerKind::ridge};
  EvaluationReport report = run_pipeline(f.cfg);

  const std::string out = f.cfg.output_dir;
  for (const char* name :
       {"nodemap.csv", "edges.csv", "features.csv", "features_schema.csv",
        "targets.csv", "report.json", "report.txt", "run_log.txt", "accuracy.svg",
        "accuracy.csv"})
    CHECK_MESSAGE(file_exists(out + "/" + name), name);
  for (const char* lname : {"forest_reg", "forest_clf", "ols", "poisson", "lasso", "ridge"}) {
    CHECK(file_exists(out + "/model_" + std::string(lname) + ".json"));
    CHECK(file_exists(out + "/importance_" + std::string(lname) + ".svg"));
    CHECK(file_exists(out + "/importance_" + std::string(lname) + ".csv"));
  }
  CHECK(!file_exists(out + "/.bowtie.lock"));

  CHECK(report.config_hash.size() == 16);
  CHECK(report.config_hash.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(report.nodes == f.g.node_count());
  CHECK(report.graph_edges == f.g.edge_count());
  CHECK(report.modeled_edges == report.graph_edges);
  CHECK(report.target_rows == report.graph_edges); // one row per edge for w
  CHECK(report.train_rows + report.eval_rows == report.target_rows);
  CHECK(report.eval_rows > 0);
  CHECK(!report.log_target); // counts stay on the raw scale by default

  REQUIRE(report.strength_histogram.size() == 12);
  std::size_t histogram_total = 0;
  for (std::size_t c : report.strength_histogram) histogram_total += c;
  CHECK(histogram_total == report.graph_edges);

  REQUIRE(report.models.size() == 6);
  for (const auto& ev : report.models) check_model_shape(ev);
  CHECK(report.models[0].learner == LearnerKind::forest_reg);
  CHECK(report.models[0].importance_from_trees);
  CHECK(!report.models[2].importance_from_trees);

  const ModelEvaluation& clf = report.models[1];
  CHECK(clf.learner == LearnerKind::forest_clf);
  CHECK(clf.exact_accuracy >= 0);
  CHECK(clf.within_one_accuracy >= clf.exact_accuracy);
  REQUIRE(!clf.confusion.empty());
  std::size_t confusion_total = 0;
  for (const auto& cell : clf.confusion) confusion_total += cell.count;
  CHECK(confusion_total == report.eval_rows);

  for (const auto& ev : report.models)
    if (ev.learner == LearnerKind::ols || ev.learner == LearnerKind::poisson) {
      CHECK(!ev.coefficients.empty());
      CHECK(std::isfinite(ev.intercept));
    }
  for (const auto& ev : report.models)
    if (ev.learner == LearnerKind::lasso || ev.learner == LearnerKind::ridge) {
      CHECK(std::isfinite(ev.lambda));
      REQUIRE(!ev.cv.lambda_grid.empty());
      CHECK(ev.cv.lambda_grid.size() == ev.cv.mean_loss.size());
      CHECK(ev.cv.chosen_lambda == ev.lambda);
    }
}

TEST_CASE("identical configurations reproduce byte-identical outputs") {
  PipelineFixture f;
  f.cfg.learners = {LearnerKind::forest_reg, LearnerKind::lasso};
  RunConfig second = f.cfg;
  second.output_dir = f.dir.path() + "/out2";
  run_pipeline(f.cfg);
  run_pipeline(second);
  for (const char* name : {"report.json", "features.csv", "targets.csv", "edges.csv",
                           "model_forest_reg.json", "model_lasso.json", "accuracy.csv"})
    CHECK_MESSAGE(read_file(f.cfg.output_dir + "/" + std::string(name)) ==
                      read_file(second.output_dir + "/" + std::string(name)),
                  name);
}

TEST_CASE("config hash tracks the modeling configuration") {
  PipelineFixture f;
  const std::string base = config_hash(f.cfg);
  CHECK(base == config_hash(f.cfg));
  RunConfig other = f.cfg;
  other.seed = f.cfg.seed + 1;
  CHECK(config_hash(other) != base);
  other = f.cfg;
  other.config = FeatureConfig::model3;
  CHECK(config_hash(other) != base);
  other = f.cfg;
  other.output_dir = "/somewhere/else"; // placement never changes the digest
  CHECK(config_hash(other) == base);
}

TEST_CASE("report json round trips through the loader") {
  PipelineFixture f;
  f.cfg.learners = {LearnerKind::forest_clf, LearnerKind::poisson};
  EvaluationReport report = run_pipeline(f.cfg);
  const std::string path = f.cfg.output_dir + "/report.json";
  EvaluationReport loaded = load_report_json(path);
  CHECK(report_json_string(loaded) == read_file(path));
  CHECK(report_json_string(loaded) == report_json_string(report));
  CHECK(loaded.models.size() == 2);
  CHECK(loaded.models[1].learner == LearnerKind::poisson);
}

TEST_CASE("saved models re-evaluate identically on the written artifacts") {
  PipelineFixture f;
  f.cfg.learners = {LearnerKind::forest_reg, LearnerKind::poisson};
  f.cfg.in_sample = true;
  EvaluationReport report = run_pipeline(f.cfg);

  FeatureMatrix fm = load_feature_csv(f.cfg.output_dir + "/features.csv");
  TieStrengthTarget target = load_target_csv(f.cfg.output_dir + "/targets.csv");
  // a reloaded multiplex target carries the symmetric tag; evaluation re-tags it
  CHECK(target.kind() == TargetKind::averaged_z);

  for (std::size_t m = 0; m < report.models.size(); ++m) {
    ModelArtifact artifact =
        load_model(f.cfg.output_dir + "/" + report.models[m].model_file);
    std::size_t rows_used = 0;
    ModelEvaluation ev = evaluate_artifact(artifact, fm, target, &rows_used);
    CHECK(rows_used == report.target_rows);
    CHECK(ev.residual_mean_abs == report.models[m].residual_mean_abs);
    CHECK(ev.residual_median_abs == report.models[m].residual_median_abs);
    CHECK(ev.importance == report.models[m].importance);
    CHECK(ev.fraction_within == report.models[m].fraction_within);
  }
}

TEST_CASE("orientation mismatches stop artifact evaluation") {
  PipelineFixture f(40, 0.2, 77);
  f.cfg.learners = {LearnerKind::forest_reg};
  f.cfg.in_sample = true;
  run_pipeline(f.cfg);
  ModelArtifact artifact = load_model(f.cfg.output_dir + "/model_forest_reg.json");
  FeatureMatrix fm = load_feature_csv(f.cfg.output_dir + "/features.csv");
  // same graph, but oriented rows cannot stand in for a symmetric target
  LoadedGraph loaded = load_multiplex_csv(f.cfg.edges_path, "");
  TieStrengthTarget oriented = normalized_strengths(loaded.graph, true);
  CHECK_THROWS_AS(evaluate_artifact(artifact, fm, oriented), ValidationError);
}

TEST_CASE("log-scale fitting round trips through the saved artifact") {
  PipelineFixture f;
  f.cfg.learners = {LearnerKind::ols};
  f.cfg.target = TargetKind::averaged_z;
  f.cfg.in_sample = true;
  EvaluationReport report = run_pipeline(f.cfg);
  CHECK(report.log_target);

  ModelArtifact artifact = load_model(f.cfg.output_dir + "/model_ols.json");
  CHECK(artifact.log_centered);
  CHECK(std::isfinite(artifact.log_center));

  FeatureMatrix fm = load_feature_csv(f.cfg.output_dir + "/features.csv");
  TieStrengthTarget target = load_target_csv(f.cfg.output_dir + "/targets.csv");
  std::size_t rows_used = 0;
  ModelEvaluation ev = evaluate_artifact(artifact, fm, target, &rows_used);
  CHECK(rows_used == report.target_rows);
  CHECK(ev.residual_mean_abs == report.models[0].residual_mean_abs);
}

TEST_CASE("a run without learners still writes features and the report") {
  PipelineFixture f;
  f.cfg.learners = {};
  EvaluationReport report = run_pipeline(f.cfg);
  CHECK(file_exists(f.cfg.output_dir + "/features.csv"));
  CHECK(file_exists(f.cfg.output_dir + "/targets.csv"));
  CHECK(file_exists(f.cfg.output_dir + "/report.json"));
  CHECK(!file_exists(f.cfg.output_dir + "/accuracy.svg"));
  CHECK(report.models.empty());
  REQUIRE(!report.notes.empty());
  CHECK(report.notes[0].find("no learners") != std::string::npos);
  EvaluationReport loaded = load_report_json(f.cfg.output_dir + "/report.json");
  CHECK(loaded.models.empty());
}

TEST_CASE("household filtering and dyad removal are recorded in the report") {
  PipelineFixture f(60, 0.18, 71, 1.0, 12);
  f.cfg.learners = {};
  f.cfg.filter_households = true;
  f.cfg.drop_isolated_dyads = true;
  EvaluationReport report = run_pipeline(f.cfg);
  CHECK(report.households_filtered);
  CHECK(report.isolated_dyads_removed);
  CHECK(report.graph_edges <= f.g.edge_count());
  CHECK(report.household.removed_same_household +
            report.household.removed_missing_household + report.isolated_removed_edges ==
        f.g.edge_count() - report.graph_edges);
}

TEST_CASE("imputation fills attribute holes before features are written") {
  PipelineFixture f(200, 0.08, 83, 0.7);
  f.cfg.learners = {};
  f.cfg.impute = true;
  EvaluationReport report = run_pipeline(f.cfg);
  CHECK(report.imputed);
  CHECK(report.imputation.age.imputed > 0);
  CHECK(file_exists(f.cfg.output_dir + "/attributes_imputed.csv"));
  CHECK(file_exists(f.cfg.output_dir + "/imputation_report.json"));

  FeatureMatrix fm = load_feature_csv(f.cfg.output_dir + "/features.csv");
  const auto a_s = static_cast<std::size_t>(feature_index("a_s"));
  const auto sex = static_cast<std::size_t>(feature_index("sex"));
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    CHECK(!std::isnan(fm.value(r, a_s)));
    CHECK(!std::isnan(fm.value(r, sex)));
  }
}

TEST_CASE("edge sampling restricts modeling rows but not the feature table") {
  PipelineFixture f;
  f.cfg.learners = {LearnerKind::ols};
  f.cfg.sample_edges = 50;
  EvaluationReport report = run_pipeline(f.cfg);
  CHECK(report.modeled_edges == 50);
  CHECK(report.target_rows == 50);
  CHECK(report.graph_edges == f.g.edge_count());
  FeatureMatrix fm = load_feature_csv(f.cfg.output_dir + "/features.csv");
  CHECK(fm.rows() == report.graph_edges);

  // the sample is part of the seeded surface: same seed, same rows
  RunConfig second = f.cfg;
  second.output_dir = f.dir.path() + "/out2";
  run_pipeline(second);
  CHECK(read_file(f.cfg.output_dir + "/targets.csv") ==
        read_file(second.output_dir + "/targets.csv"));
}

TEST_CASE("in-sample evaluation reuses the training rows") {
  PipelineFixture f(40, 0.2, 91);
  f.cfg.learners = {LearnerKind::forest_reg};
  f.cfg.in_sample = true;
  EvaluationReport report = run_pipeline(f.cfg);
  CHECK(report.train_rows == report.target_rows);
  CHECK(report.eval_rows == report.target_rows);
  bool noted = false;
  for (const auto& note : report.notes)
    if (note.find("in-sample") != std::string::npos) noted = true;
  CHECK(noted);
}

TEST_CASE("bad run configurations are rejected up front") {
  PipelineFixture f;
  SUBCASE("missing edge path") {
    f.cfg.edges_path.clear();
    CHECK_THROWS_AS(run_pipeline(f.cfg), ValidationError);
  }
  SUBCASE("split fraction outside (0,1)") {
    f.cfg.split_fraction = 1.0;
    CHECK_THROWS_AS(run_pipeline(f.cfg), ValidationError);
  }
  SUBCASE("learner listed twice") {
    f.cfg.learners = {LearnerKind::ols, LearnerKind::ols};
    CHECK_THROWS_AS(run_pipeline(f.cfg), ValidationError);
  }
  SUBCASE("sampling more edges than the graph has") {
    f.cfg.learners = {LearnerKind::ols};
    f.cfg.sample_edges = f.g.edge_count() + 1;
    CHECK_THROWS_AS(run_pipeline(f.cfg), ValidationError);
  }
  SUBCASE("split that empties the training side") {
    f.cfg.learners = {LearnerKind::ols};
    f.cfg.sample_edges = 4;
    f.cfg.split_fraction = 0.1;
    CHECK_THROWS_AS(run_pipeline(f.cfg), ValidationError);
  }
}

TEST_CASE("residual thresholds are ascending and carry the report markers") {
  const std::vector<double> residuals{0.0, -0.5, 2.0, 1.5};
  const std::vector<double> t = residual_thresholds(residuals);
  CHECK(std::is_sorted(t.begin(), t.end()));
  CHECK(std::adjacent_find(t.begin(), t.end()) == t.end()); // strictly ascending
  CHECK(t.front() == 0.0);
  CHECK(t.back() == doctest::Approx(2.0));
  for (double marker : {1.0, 0.05, 0.1})
    CHECK(std::find(t.begin(), t.end(), marker) != t.end());
}

TEST_CASE("accuracy curve counts the covered residual share") {
  const std::vector<double> residuals{0.0, -0.5, 2.0};
  const std::vector<double> t{0.0, 0.5, 1.0, 2.0};
  const std::vector<double> frac = accuracy_curve(residuals, t);
  REQUIRE(frac.size() == 4);
  CHECK(frac[0] == doctest::Approx(1.0 / 3));
  CHECK(frac[1] == doctest::Approx(2.0 / 3));
  CHECK(frac[2] == doctest::Approx(2.0 / 3));
  CHECK(frac[3] == doctest::Approx(1.0));
  CHECK_THROWS_AS(accuracy_curve(residuals, std::vector<double>{1.0, 0.5}),
                  ValidationError);
}

TEST_CASE("edge sampling is a deterministic ascending subset") {
  WeightedGraph g = random_graph(40, 0.3, 17);
  const std::size_t m = g.edge_count();
  auto rows = sample_edges(g, 20, 5);
  CHECK(rows.size() == 20);
  CHECK(std::is_sorted(rows.begin(), rows.end()));
  CHECK(std::adjacent_find(rows.begin(), rows.end()) == rows.end());
  CHECK(rows.back() < m);
  CHECK(rows == sample_edges(g, 20, 5));
  CHECK(rows != sample_edges(g, 20, 6));
  auto all = sample_edges(g, m, 5);
  for (std::size_t r = 0; r < m; ++r) CHECK(all[r] == r);
  CHECK_THROWS_AS(sample_edges(g, m + 1, 5), ValidationError);
}
