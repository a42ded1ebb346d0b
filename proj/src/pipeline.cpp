#include "bowtie/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <numeric>
#include <sstream>
#include <unistd.h>
#include <unordered_set>

#include "bowtie/error.hpp"
#include "bowtie/forest.hpp"
#include "bowtie/io.hpp"
#include "bowtie/model_io.hpp"
#include "bowtie/rng.hpp"

namespace bowtie {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr std::uint64_t kSampleStream = 0x5A3B1E;
constexpr std::uint64_t kSplitStream = 0x5B117;
constexpr std::uint64_t kCvStreamBase = 0xC0FD;
constexpr std::uint64_t kFitStreamBase = 0xF17;
constexpr std::uint64_t kImputeStream = 0x1347;

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (ParseError& e) {
    throw ParseError(std::string("stage ") + name + ": " + e.what());
  } catch (ValidationError& e) {
    throw ValidationError(std::string("stage ") + name + ": " + e.what());
  } catch (NumericError& e) {
    throw NumericError(std::string("stage ") + name + ": " + e.what());
  }
}

// one pipeline per working directory
class LockFile {
public:
  explicit LockFile(const std::string& dir) : path_(dir + "/.bowtie.lock") {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f)
      throw ValidationError("another run holds " + path_ +
                            " (remove it if that run is dead)");
    std::fprintf(f, "pid %ld\n", static_cast<long>(::getpid()));
    std::fclose(f);
  }
  ~LockFile() { std::remove(path_.c_str()); }
  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;

private:
  std::string path_;
};

TieStrengthTarget subset_target(const TieStrengthTarget& t,
                                const std::vector<std::size_t>& keep) {
  std::vector<TargetRow> rows;
  std::vector<double> values;
  rows.reserve(keep.size());
  values.reserve(keep.size());
  for (std::size_t i : keep) {
    rows.push_back(t.rows()[i]);
    values.push_back(t.values()[i]);
  }
  TieStrengthTarget out(t.kind(), std::move(rows), std::move(values));
  out.set_transform_state(t.log_centered(), t.center());
  return out;
}

std::uint64_t edge_key(NodeId a, NodeId b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

// swap the attribute-derived columns for ones backed by the imputed table and
// the per-edge paired-zip fill
FeatureMatrix refresh_attribute_columns(const FeatureMatrix& fm,
                                        const AttributeTable& attrs,
                                        const PairedZip& zip) {
  const int col_as = feature_index("a_s");
  const int col_ad = feature_index("a_d");
  const int col_sex = feature_index("sex");
  const int col_z = feature_index("z");
  std::vector<double> data = fm.data();
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    const auto [i, j] = fm.edge(r);
    double* row = data.data() + r * kFeatureCount;
    if (attrs.has_age(i) && attrs.has_age(j)) {
      row[col_as] = attrs.age(i) + attrs.age(j);
      row[col_ad] = std::abs(attrs.age(i) - attrs.age(j));
    }
    if (attrs.has_sex(i) && attrs.has_sex(j)) {
      if (attrs.sex(i) != attrs.sex(j))
        row[col_sex] = static_cast<double>(SexPair::FM);
      else
        row[col_sex] = attrs.sex(i) == Sex::male
                           ? static_cast<double>(SexPair::MM)
                           : static_cast<double>(SexPair::FF);
    }
    row[col_z] = zip.z[r];
  }
  return FeatureMatrix(fm.edges(), std::move(data));
}

Dataset with_response(const Dataset& d, std::vector<double> y) {
  return Dataset(d.schema(), d.x(), std::move(y));
}

struct LogCenter {
  bool applied = false;
  double center = 0.0;
};

// ln then center on the training rows; the response must be positive
LogCenter log_center_in_place(std::vector<double>& y) {
  for (double v : y)
    if (!(v > 0))
      throw ValidationError("log transform needs positive responses, found " +
                            format_double(v));
  double mean = 0;
  for (double& v : y) {
    v = std::log(v);
    mean += v;
  }
  mean /= static_cast<double>(y.size());
  for (double& v : y) v -= mean;
  return {true, mean};
}

std::vector<CoefficientEntry> coefficient_table(const LinearModel& m) {
  std::vector<CoefficientEntry> out;
  out.reserve(m.schema.size());
  for (std::size_t c = 0; c < m.schema.size(); ++c) {
    CoefficientEntry e;
    e.name = m.schema[c];
    e.value = m.coefficients[c];
    if (!m.std_errors.empty()) e.std_error = m.std_errors[c + 1];
    out.push_back(std::move(e));
  }
  return out;
}

// |coefficient| on the standardized scale, normalized to sum 1 when any
// feature is active
std::vector<double> linear_importance(const LinearModel& m,
                                      const std::vector<double>& train_sd) {
  std::vector<double> imp(m.coefficients.size(), 0.0);
  double total = 0;
  for (std::size_t c = 0; c < imp.size(); ++c) {
    const double scale = m.col_mean.empty() ? train_sd[c] : 1.0;
    imp[c] = std::abs(m.coefficients[c]) * scale;
    total += imp[c];
  }
  if (total > 0)
    for (double& v : imp) v /= total;
  return imp;
}

std::vector<double> column_sds(const Dataset& d) {
  std::vector<double> sd(d.cols(), 0.0);
  const std::size_t n = d.rows();
  for (std::size_t c = 0; c < d.cols(); ++c) {
    double mean = 0;
    for (std::size_t r = 0; r < n; ++r) mean += d.at(r, c);
    mean /= static_cast<double>(n);
    double var = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const double v = d.at(r, c) - mean;
      var += v * v;
    }
    sd[c] = std::sqrt(var / static_cast<double>(n));
  }
  return sd;
}

void eval_residuals(ModelEvaluation& ev, const std::vector<double>& predictions,
                    const std::vector<double>& truth) {
  std::vector<double> abs_res(truth.size());
  for (std::size_t r = 0; r < truth.size(); ++r)
    abs_res[r] = std::abs(predictions[r] - truth[r]);
  ev.thresholds = residual_thresholds(abs_res);
  ev.fraction_within = accuracy_curve(abs_res, ev.thresholds);
  double mean = 0;
  for (double v : abs_res) mean += v;
  ev.residual_mean_abs = mean / static_cast<double>(abs_res.size());
  std::vector<double> sorted = abs_res;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  ev.residual_median_abs =
      n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

void eval_classification(ModelEvaluation& ev, const std::vector<double>& predictions,
                         const std::vector<double>& truth) {
  std::size_t exact = 0, within = 0;
  std::map<std::pair<double, double>, std::size_t> cells;
  for (std::size_t r = 0; r < truth.size(); ++r) {
    if (predictions[r] == truth[r]) ++exact;
    if (std::abs(predictions[r] - truth[r]) <= 1.0) ++within;
    ++cells[{truth[r], predictions[r]}];
  }
  const double n = static_cast<double>(truth.size());
  ev.exact_accuracy = static_cast<double>(exact) / n;
  ev.within_one_accuracy = static_cast<double>(within) / n;
  for (const auto& [key, count] : cells)
    ev.confusion.push_back({key.first, key.second, count});
}

std::string provenance_line(const std::string& hash, std::uint64_t seed) {
  return "config=" + hash + " seed=" + std::to_string(seed);
}

} // namespace

const char* dataset_kind_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::multiplex: return "multiplex";
    case DatasetKind::cdr: return "cdr";
    case DatasetKind::generic: return "generic";
  }
  return "?";
}

DatasetKind dataset_kind_from_name(const std::string& name) {
  for (DatasetKind k :
       {DatasetKind::multiplex, DatasetKind::cdr, DatasetKind::generic})
    if (name == dataset_kind_name(k)) return k;
  throw ValidationError("unknown dataset kind '" + name + "'");
}

std::string config_hash(const RunConfig& cfg) {
  std::ostringstream os;
  os << "kind=" << dataset_kind_name(cfg.kind) << "\n"
     << "edges=" << cfg.edges_path << "\n"
     << "manifest=" << cfg.layer_manifest_path << "\n"
     << "attributes=" << cfg.attributes_path << "\n"
     << "learners=";
  for (LearnerKind k : cfg.learners) os << learner_name(k) << ",";
  os << "\nconfig=" << feature_config_name(cfg.config) << "\n"
     << "target=" << target_kind_name(cfg.target) << "\n"
     << "seed=" << cfg.seed << "\n"
     << "split=" << format_double(cfg.split_fraction) << "\n"
     << "sample=" << cfg.sample_edges << "\n"
     << "complete_case=" << cfg.complete_case_only << "\n"
     << "impute=" << cfg.impute << "\n"
     << "zip=" << cfg.include_zip << "\n"
     << "single_orientation=" << cfg.single_orientation << "\n"
     << "in_sample=" << cfg.in_sample << "\n"
     << "households=" << cfg.filter_households << "\n"
     << "dyads=" << cfg.drop_isolated_dyads << "\n"
     << "log_target=" << cfg.log_target << "\n";
  const std::string text = os.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<double> accuracy_curve(const std::vector<double>& residuals,
                                   const std::vector<double>& thresholds) {
  for (std::size_t k = 1; k < thresholds.size(); ++k)
    if (thresholds[k] < thresholds[k - 1])
      throw ValidationError("thresholds must ascend");
  std::vector<double> abs_res(residuals.size());
  for (std::size_t r = 0; r < residuals.size(); ++r) abs_res[r] = std::abs(residuals[r]);
  std::sort(abs_res.begin(), abs_res.end());
  std::vector<double> out;
  out.reserve(thresholds.size());
  const double n = static_cast<double>(abs_res.size());
  for (double t : thresholds) {
    const auto it = std::upper_bound(abs_res.begin(), abs_res.end(), t);
    out.push_back(n > 0 ? static_cast<double>(it - abs_res.begin()) / n : 0.0);
  }
  return out;
}

std::vector<double> residual_thresholds(const std::vector<double>& residuals) {
  double max_res = 0;
  for (double v : residuals) max_res = std::max(max_res, std::abs(v));
  std::vector<double> t;
  t.reserve(204);
  for (int k = 0; k <= 200; ++k)
    t.push_back(max_res * static_cast<double>(k) / 200.0);
  t.push_back(1.0);
  t.push_back(0.05);
  t.push_back(0.1);
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

std::vector<std::size_t> sample_edges(const WeightedGraph& g, std::size_t n,
                                      std::uint64_t seed) {
  const std::size_t m = g.edge_count();
  if (n > m)
    throw ValidationError("cannot sample " + std::to_string(n) + " of " +
                          std::to_string(m) + " edges");
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, kSampleStream));
  rng.shuffle(perm);
  perm.resize(n);
  std::sort(perm.begin(), perm.end());
  return perm;
}

EvaluationReport run_pipeline(const RunConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  if (cfg.edges_path.empty()) throw ValidationError("no input edge file given");
  if (!cfg.in_sample && !(cfg.split_fraction > 0 && cfg.split_fraction < 1))
    throw ValidationError("split fraction must lie in (0,1)");
  {
    std::unordered_set<int> seen;
    for (LearnerKind k : cfg.learners)
      if (!seen.insert(static_cast<int>(k)).second)
        throw ValidationError(std::string("learner '") + learner_name(k) +
                              "' listed twice");
  }

  fs::create_directories(cfg.output_dir);
  LockFile lock(cfg.output_dir);
  const std::string hash = config_hash(cfg);
  const std::string prov = provenance_line(hash, cfg.seed);
  auto out_path = [&](const std::string& name) {
    return cfg.output_dir + "/" + name;
  };

  std::ofstream log(out_path("run_log.txt"), std::ios::binary);
  auto log_stage = [&](const std::string& line) {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t_start)
                        .count();
    log << "[" << ms << " ms] " << line << "\n";
    log.flush();
  };
  log_stage("run " + prov);

  EvaluationReport report;
  report.config_hash = hash;
  report.seed = cfg.seed;
  report.kind = cfg.kind;
  report.target = cfg.target;
  report.config = cfg.config;
  report.in_sample = cfg.in_sample;

  // ingest
  LoadedGraph loaded = stage("ingest", [&] {
    switch (cfg.kind) {
      case DatasetKind::multiplex:
        return load_multiplex_csv(cfg.edges_path, cfg.layer_manifest_path);
      case DatasetKind::cdr: return load_cdr_csv(cfg.edges_path);
      case DatasetKind::generic: return load_edge_list_csv(cfg.edges_path);
    }
    throw ValidationError("bad dataset kind");
  });
  WeightedGraph graph = std::move(loaded.graph);

  bool have_attrs = !cfg.attributes_path.empty();
  AttributeTable attrs;
  if (have_attrs)
    attrs = stage("ingest",
                  [&] { return load_attributes_csv(cfg.attributes_path, loaded.nodemap); });
  log_stage("ingest: " + std::to_string(graph.node_count()) + " nodes, " +
            std::to_string(graph.edge_count()) + " edges");

  // preprocess
  stage("preprocess", [&] {
    if (cfg.filter_households) {
      if (!have_attrs)
        throw ValidationError("household filtering needs an attribute file");
      graph = filter_same_household(graph, attrs, &report.household);
      report.households_filtered = true;
    }
    if (cfg.drop_isolated_dyads) {
      const std::size_t before = graph.edge_count();
      graph = remove_isolated_ties(graph);
      report.isolated_dyads_removed = true;
      report.isolated_removed_edges = before - graph.edge_count();
    }
    return 0;
  });
  report.nodes = graph.node_count();
  report.graph_edges = graph.edge_count();
  if (graph.edge_count() == 0) throw ValidationError("graph has no edges left");

  if (cfg.kind == DatasetKind::multiplex) {
    report.strength_histogram.assign(kMultiplexLayerCount, 0);
    for (const auto& e : graph.edges())
      ++report.strength_histogram[static_cast<std::size_t>(e.weight) - 1];
  }
  write_nodemap_csv(loaded.nodemap, out_path("nodemap.csv"));
  write_edge_list_csv(graph, out_path("edges.csv"), prov);
  log_stage("preprocess: " + std::to_string(graph.edge_count()) + " edges kept");

  // features
  FeatureMatrix fm = stage("features", [&] {
    return compute_features(graph, have_attrs ? &attrs : nullptr, cfg.threads);
  });
  log_stage("features: " + std::to_string(fm.rows()) + " rows");

  // impute
  if (cfg.impute) {
    stage("impute", [&] {
      if (!have_attrs) throw ValidationError("imputation needs an attribute file");
      ImputedAttributes filled =
          impute_attributes(graph, attrs, derive_seed(cfg.seed, kImputeStream));
      report.imputation = filled.report;
      PairedZip zip = impute_paired_zip(graph, filled.attrs,
                                        derive_seed(cfg.seed, kImputeStream), &fm,
                                        &report.imputation);
      attrs = std::move(filled.attrs);
      fm = refresh_attribute_columns(fm, attrs, zip);
      report.imputed = true;
      write_attributes_csv(attrs, out_path("attributes_imputed.csv"), prov);
      write_imputation_report(report.imputation, out_path("imputation_report.json"));
      return 0;
    });
    log_stage("impute: age " + std::to_string(report.imputation.age.imputed) +
              ", sex " + std::to_string(report.imputation.sex.imputed) + ", zip " +
              std::to_string(report.imputation.paired_zip.imputed));
  }
  write_feature_csv(fm, out_path("features.csv"), out_path("features_schema.csv"),
                    prov);

  // targets
  TieStrengthTarget target = stage("targets", [&] {
    switch (cfg.target) {
      case TargetKind::multiplex_w: return multiplex_strength(graph);
      case TargetKind::normalized_y:
        return normalized_strengths(graph, !cfg.single_orientation);
      case TargetKind::averaged_z: return averaged_strength(graph);
    }
    throw ValidationError("bad target kind");
  });
  write_target_csv(target, out_path("targets.csv"), prov);

  // edge sampling restricts the modeling rows; features stay full-graph
  report.modeled_edges = graph.edge_count();
  if (cfg.sample_edges > 0 && cfg.sample_edges != graph.edge_count()) {
    const std::vector<std::size_t> rows =
        sample_edges(graph, cfg.sample_edges, cfg.seed);
    std::unordered_set<std::uint64_t> keep;
    keep.reserve(rows.size() * 2);
    for (std::size_t r : rows) {
      const auto [a, b] = fm.edge(r);
      keep.insert(edge_key(a, b));
    }
    std::vector<std::size_t> target_keep;
    for (std::size_t i = 0; i < target.size(); ++i) {
      const TargetRow& row = target.rows()[i];
      const auto key = row.src < row.dst ? edge_key(row.src, row.dst)
                                         : edge_key(row.dst, row.src);
      if (keep.count(key)) target_keep.push_back(i);
    }
    target = subset_target(target, target_keep);
    report.modeled_edges = rows.size();
    log_stage("sample: " + std::to_string(rows.size()) + " edges");
  }
  report.target_rows = target.size();

  const bool log_target =
      cfg.log_target == 1 ||
      (cfg.log_target == -1 && cfg.target != TargetKind::multiplex_w);
  report.log_target = log_target;

  if (cfg.learners.empty()) {
    report.notes.push_back("no learners requested: features and targets only, no "
                           "model or plot files");
    write_report_json(report, out_path("report.json"));
    write_report_text(report, out_path("report.txt"));
    log_stage("done (no learners)");
    return report;
  }

  // frames: one categorical-sex encoding for forests, one dummy encoding for
  // the linear learners; identical row sets by construction
  bool need_forest = false, need_linear = false;
  for (LearnerKind k : cfg.learners)
    (learner_is_forest(k) ? need_forest : need_linear) = true;

  FrameOptions base;
  base.config = cfg.config;
  base.include_zip = cfg.include_zip;
  base.complete_case_only = cfg.complete_case_only;

  ModelFrame forest_frame, linear_frame;
  std::size_t n_rows = 0;
  stage("frames", [&] {
    if (need_forest) {
      FrameOptions fo = base;
      fo.learner = LearnerKind::forest_reg;
      forest_frame = build_frame(fm, target, fo);
      n_rows = forest_frame.data.rows();
    }
    if (need_linear) {
      FrameOptions lo = base;
      lo.learner = LearnerKind::ols;
      linear_frame = build_frame(fm, target, lo);
      n_rows = linear_frame.data.rows();
    }
    if (need_forest && need_linear &&
        forest_frame.source_rows != linear_frame.source_rows)
      throw ValidationError("frame encodings disagree on rows");
    if (n_rows < 2) throw ValidationError("not enough modeling rows");
    return 0;
  });

  // split
  std::vector<std::size_t> train_idx, eval_idx;
  if (cfg.in_sample) {
    train_idx.resize(n_rows);
    std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
    eval_idx = train_idx;
    report.notes.push_back("in-sample evaluation: residuals are computed on the "
                           "training rows");
  } else {
    std::vector<std::size_t> perm(n_rows);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, kSplitStream));
    rng.shuffle(perm);
    const auto n_train =
        static_cast<std::size_t>(cfg.split_fraction * static_cast<double>(n_rows));
    if (n_train == 0 || n_train == n_rows)
      throw ValidationError("split leaves an empty train or evaluation side");
    train_idx.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    eval_idx.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(eval_idx.begin(), eval_idx.end());
  }
  report.train_rows = train_idx.size();
  report.eval_rows = eval_idx.size();
  log_stage("split: " + std::to_string(train_idx.size()) + " train, " +
            std::to_string(eval_idx.size()) + " eval");

  if (log_target)
    report.notes.push_back(
        "gaussian linear learners fit ln(target) centered on the training mean; "
        "residuals are reported on the raw scale");

  // fit + evaluate
  for (LearnerKind learner : cfg.learners) {
    const std::string lname = learner_name(learner);
    stage(lname.c_str(), [&] {
      const ModelFrame& frame = learner_is_forest(learner) ? forest_frame : linear_frame;
      Dataset train = frame.data.subset(train_idx);
      Dataset eval = frame.data.subset(eval_idx);

      ModelEvaluation ev;
      ev.learner = learner;
      for (const auto& c : frame.data.schema()) ev.schema.push_back(c.name);
      ev.null_importance = 1.0 / static_cast<double>(frame.data.cols());

      ModelArtifact artifact;
      artifact.learner = learner;
      artifact.config = cfg.config;
      artifact.target_kind = cfg.target;
      artifact.config_hash = hash;
      artifact.seed = cfg.seed;

      const std::uint64_t fit_seed =
          derive_seed(cfg.seed, kFitStreamBase + static_cast<std::uint64_t>(learner));
      std::vector<double> predictions;

      if (learner == LearnerKind::forest_reg || learner == LearnerKind::forest_clf) {
        if (learner == LearnerKind::forest_clf) {
          std::vector<double> labels = frame.data.y();
          std::sort(labels.begin(), labels.end());
          labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
          if (labels.size() > 20)
            throw ValidationError("classification target has " +
                                  std::to_string(labels.size()) +
                                  " distinct values; the cap is 20");
        }
        ForestOptions fo;
        fo.threads = cfg.threads;
        ForestModel model = fit_forest(train,
                                       learner == LearnerKind::forest_clf
                                           ? ForestTask::classification
                                           : ForestTask::regression,
                                       fit_seed, fo);
        predictions = predict_forest(model, eval, cfg.threads);
        ev.importance = model.importance;
        ev.importance_from_trees = true;
        artifact.forest = std::move(model);
      } else {
        std::vector<double> y_train = train.y();
        LogCenter lc;
        const bool gaussian = learner != LearnerKind::poisson;
        if (log_target && gaussian) lc = log_center_in_place(y_train);
        artifact.log_centered = lc.applied;
        artifact.log_center = lc.center;

        const std::vector<double> train_sd = column_sds(train);
        Dataset train_fit = with_response(train, std::move(y_train));
        LinearModel model;
        switch (learner) {
          case LearnerKind::ols: {
            train_fit.standardize();
            model = fit_ols(train_fit);
            break;
          }
          case LearnerKind::poisson: {
            for (double v : train_fit.y())
              if (v < 0 || v != std::floor(v))
                throw ValidationError("poisson needs nonnegative integer targets");
            model = fit_poisson(train_fit);
            break;
          }
          case LearnerKind::lasso:
          case LearnerKind::ridge: {
            const bool is_lasso = learner == LearnerKind::lasso;
            const std::vector<double> grid =
                is_lasso ? log_lambda_grid(1e-4, 1e1, 100)
                         : log_lambda_grid(1e-4, 1e3, 100);
            ev.cv = cross_validate(
                train_fit,
                is_lasso ? LinearFamily::gaussian_lasso : LinearFamily::gaussian_ridge,
                grid, 10,
                derive_seed(cfg.seed, kCvStreamBase + static_cast<std::uint64_t>(learner)));
            train_fit.standardize();
            model = is_lasso ? fit_lasso(train_fit, ev.cv.chosen_lambda)
                             : fit_ridge(train_fit, ev.cv.chosen_lambda);
            break;
          }
          default: throw ValidationError("unreachable learner");
        }
        predictions = predict_linear(model, eval);
        if (lc.applied)
          for (double& v : predictions) v = std::exp(v + lc.center);
        ev.importance = linear_importance(model, train_sd);
        ev.intercept = model.intercept;
        ev.coefficients = coefficient_table(model);
        ev.adjusted_r2 = model.adjusted_r2;
        ev.deviance = model.deviance;
        if (learner == LearnerKind::lasso || learner == LearnerKind::ridge) {
          ev.lambda = model.lambda;
          ev.shrinkage_ratio = model.shrinkage_ratio;
        }
        ev.irls_iterations = model.irls_iterations;
        artifact.linear = std::move(model);
      }

      eval_residuals(ev, predictions, eval.y());
      if (learner == LearnerKind::forest_clf)
        eval_classification(ev, predictions, eval.y());

      ev.model_file = "model_" + lname + ".json";
      save_model(artifact, out_path(ev.model_file));
      report.models.push_back(std::move(ev));
      return 0;
    });
    log_stage("fit+evaluate: " + lname);
  }

  bool any_linear_dead = false;
  for (const auto& ev : report.models) {
    double total = 0;
    for (double v : ev.importance) total += v;
    if (!ev.importance_from_trees && total == 0) any_linear_dead = true;
  }
  if (any_linear_dead)
    report.notes.push_back("a fully shrunk linear model has an all-zero "
                           "importance row; its bars are empty by design");

  stage("report", [&] {
    write_report_json(report, out_path("report.json"));
    write_report_text(report, out_path("report.txt"));
    emit_plots(report, cfg.output_dir);
    return 0;
  });
  log_stage("done");
  return report;
}

namespace {

Json model_to_json(const ModelEvaluation& ev) {
  Json j;
  j["learner"] = learner_name(ev.learner);
  j["model_file"] = ev.model_file;
  j["schema"] = ev.schema;
  j["importance"] = ev.importance;
  j["importance_from_trees"] = ev.importance_from_trees;
  j["null_importance"] = ev.null_importance;
  if (!std::isnan(ev.intercept)) {
    j["intercept"] = ev.intercept;
    Json coef = Json::array();
    for (const auto& c : ev.coefficients) {
      Json e;
      e["name"] = c.name;
      e["value"] = c.value;
      if (!std::isnan(c.std_error)) e["std_error"] = c.std_error;
      coef.push_back(std::move(e));
    }
    j["coefficients"] = std::move(coef);
  }
  if (!std::isnan(ev.adjusted_r2)) j["adjusted_r2"] = ev.adjusted_r2;
  if (!std::isnan(ev.deviance)) j["deviance"] = ev.deviance;
  if (!std::isnan(ev.lambda)) {
    j["lambda"] = ev.lambda;
    j["shrinkage_ratio"] = ev.shrinkage_ratio;
    j["cv"] = {{"lambda_grid", ev.cv.lambda_grid},
               {"mean_loss", ev.cv.mean_loss},
               {"sd_loss", ev.cv.sd_loss},
               {"chosen_lambda", ev.cv.chosen_lambda}};
  }
  if (ev.irls_iterations) j["irls_iterations"] = ev.irls_iterations;
  j["accuracy_curve"] = {{"threshold", ev.thresholds},
                         {"fraction_within", ev.fraction_within}};
  j["residual_mean_abs"] = ev.residual_mean_abs;
  j["residual_median_abs"] = ev.residual_median_abs;
  if (!std::isnan(ev.exact_accuracy)) {
    j["exact_accuracy"] = ev.exact_accuracy;
    j["within_one_accuracy"] = ev.within_one_accuracy;
    Json conf = Json::array();
    for (const auto& c : ev.confusion)
      conf.push_back({{"truth", c.truth}, {"predicted", c.predicted}, {"count", c.count}});
    j["confusion"] = std::move(conf);
  }
  return j;
}

} // namespace

std::string report_json_string(const EvaluationReport& report) {
  Json j;
  j["config_hash"] = report.config_hash;
  j["seed"] = report.seed;
  j["dataset_kind"] = dataset_kind_name(report.kind);
  j["target"] = target_kind_name(report.target);
  j["feature_config"] = feature_config_name(report.config);
  j["in_sample"] = report.in_sample;
  j["log_target"] = report.log_target;
  j["nodes"] = report.nodes;
  j["graph_edges"] = report.graph_edges;
  j["modeled_edges"] = report.modeled_edges;
  j["target_rows"] = report.target_rows;
  j["train_rows"] = report.train_rows;
  j["eval_rows"] = report.eval_rows;
  if (report.households_filtered)
    j["household_filter"] = {
        {"removed_same_household", report.household.removed_same_household},
        {"removed_missing_household", report.household.removed_missing_household}};
  if (report.isolated_dyads_removed)
    j["isolated_dyads_removed_edges"] = report.isolated_removed_edges;
  if (!report.strength_histogram.empty())
    j["strength_histogram"] = report.strength_histogram;
  if (report.imputed) {
    auto put = [](const AttributeImputation& a) {
      Json o;
      o["observed"] = a.observed;
      o["imputed"] = a.imputed;
      if (!std::isnan(a.validation_score)) o["validation_score"] = a.validation_score;
      return o;
    };
    j["imputation"] = {{"age", put(report.imputation.age)},
                       {"sex", put(report.imputation.sex)},
                       {"paired_zip", put(report.imputation.paired_zip)}};
  }
  Json models = Json::array();
  for (const auto& ev : report.models) models.push_back(model_to_json(ev));
  j["models"] = std::move(models);
  j["notes"] = report.notes;
  return j.dump(1, '\t') + "\n";
}

void write_report_json(const EvaluationReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << report_json_string(report);
}

std::string evaluation_json_string(const ModelEvaluation& ev, std::size_t rows_used) {
  Json j = model_to_json(ev);
  j.erase("model_file");
  j["rows_used"] = rows_used;
  return j.dump(1, '\t') + "\n";
}

namespace {

std::string fixed(double v, int places = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", places, v);
  return buf;
}

} // namespace

EvaluationReport load_report_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    EvaluationReport r;
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.kind = dataset_kind_from_name(j.at("dataset_kind").get<std::string>());
    r.target = target_kind_from_name(j.at("target").get<std::string>());
    r.config = feature_config_from_name(j.at("feature_config").get<std::string>());
    r.in_sample = j.at("in_sample").get<bool>();
    r.log_target = j.at("log_target").get<bool>();
    r.nodes = j.at("nodes").get<std::size_t>();
    r.graph_edges = j.at("graph_edges").get<std::size_t>();
    r.modeled_edges = j.at("modeled_edges").get<std::size_t>();
    r.target_rows = j.at("target_rows").get<std::size_t>();
    r.train_rows = j.at("train_rows").get<std::size_t>();
    r.eval_rows = j.at("eval_rows").get<std::size_t>();
    if (j.contains("household_filter")) {
      r.households_filtered = true;
      r.household.removed_same_household =
          j["household_filter"].at("removed_same_household").get<std::size_t>();
      r.household.removed_missing_household =
          j["household_filter"].at("removed_missing_household").get<std::size_t>();
    }
    if (j.contains("isolated_dyads_removed_edges")) {
      r.isolated_dyads_removed = true;
      r.isolated_removed_edges = j["isolated_dyads_removed_edges"].get<std::size_t>();
    }
    if (j.contains("strength_histogram"))
      r.strength_histogram = j["strength_histogram"].get<std::vector<std::size_t>>();
    if (j.contains("imputation")) {
      r.imputed = true;
      auto get = [&](const char* key, AttributeImputation& a) {
        const Json& o = j["imputation"].at(key);
        a.observed = o.at("observed").get<std::size_t>();
        a.imputed = o.at("imputed").get<std::size_t>();
        if (o.contains("validation_score"))
          a.validation_score = o["validation_score"].get<double>();
      };
      get("age", r.imputation.age);
      get("sex", r.imputation.sex);
      get("paired_zip", r.imputation.paired_zip);
    }
    for (const Json& m : j.at("models")) {
      ModelEvaluation ev;
      ev.learner = learner_from_name(m.at("learner").get<std::string>());
      ev.model_file = m.at("model_file").get<std::string>();
      ev.schema = m.at("schema").get<std::vector<std::string>>();
      ev.importance = m.at("importance").get<std::vector<double>>();
      ev.importance_from_trees = m.at("importance_from_trees").get<bool>();
      ev.null_importance = m.at("null_importance").get<double>();
      if (m.contains("intercept")) {
        ev.intercept = m["intercept"].get<double>();
        for (const Json& c : m.at("coefficients")) {
          CoefficientEntry e;
          e.name = c.at("name").get<std::string>();
          e.value = c.at("value").get<double>();
          if (c.contains("std_error")) e.std_error = c["std_error"].get<double>();
          ev.coefficients.push_back(std::move(e));
        }
      }
      if (m.contains("adjusted_r2")) ev.adjusted_r2 = m["adjusted_r2"].get<double>();
      if (m.contains("deviance")) ev.deviance = m["deviance"].get<double>();
      if (m.contains("lambda")) {
        ev.lambda = m["lambda"].get<double>();
        ev.shrinkage_ratio = m["shrinkage_ratio"].get<double>();
        ev.cv.lambda_grid = m["cv"].at("lambda_grid").get<std::vector<double>>();
        ev.cv.mean_loss = m["cv"].at("mean_loss").get<std::vector<double>>();
        ev.cv.sd_loss = m["cv"].at("sd_loss").get<std::vector<double>>();
        ev.cv.chosen_lambda = m["cv"].at("chosen_lambda").get<double>();
      }
      if (m.contains("irls_iterations"))
        ev.irls_iterations = m["irls_iterations"].get<std::size_t>();
      ev.thresholds = m.at("accuracy_curve").at("threshold").get<std::vector<double>>();
      ev.fraction_within =
          m.at("accuracy_curve").at("fraction_within").get<std::vector<double>>();
      ev.residual_mean_abs = m.at("residual_mean_abs").get<double>();
      ev.residual_median_abs = m.at("residual_median_abs").get<double>();
      if (m.contains("exact_accuracy")) {
        ev.exact_accuracy = m["exact_accuracy"].get<double>();
        ev.within_one_accuracy = m["within_one_accuracy"].get<double>();
        for (const Json& c : m.at("confusion"))
          ev.confusion.push_back({c.at("truth").get<double>(),
                                  c.at("predicted").get<double>(),
                                  c.at("count").get<std::size_t>()});
      }
      r.models.push_back(std::move(ev));
    }
    r.notes = j.at("notes").get<std::vector<std::string>>();
    return r;
  } catch (const Json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

ModelEvaluation evaluate_artifact(const ModelArtifact& artifact, const FeatureMatrix& fm,
                                  const TieStrengthTarget& target,
                                  std::size_t* rows_used) {
  // Target files carry orientation, not kind, so a reloaded multiplex target
  // comes back as the symmetric kind; re-tag it. Oriented vs symmetric
  // mismatches stay fatal.
  const bool symmetric_pair = target.kind() == TargetKind::averaged_z &&
                              artifact.target_kind == TargetKind::multiplex_w;
  if (target.kind() != artifact.target_kind && !symmetric_pair)
    throw ValidationError(std::string("model was trained on the '") +
                          target_kind_name(artifact.target_kind) +
                          "' target, given '" + target_kind_name(target.kind()) + "'");
  if (target.log_centered())
    throw ValidationError("evaluation expects the raw-scale target");
  const TieStrengthTarget aligned =
      symmetric_pair
          ? TieStrengthTarget(artifact.target_kind, target.rows(), target.values())
          : target;

  const std::vector<std::string> model_schema = [&] {
    std::vector<std::string> names;
    if (artifact.forest)
      for (const auto& c : artifact.forest->columns) names.push_back(c.name);
    else if (artifact.linear)
      names = artifact.linear->schema;
    return names;
  }();

  FrameOptions opt;
  opt.config = artifact.config;
  opt.learner = artifact.learner;
  opt.complete_case_only = true; // holes cannot be imputed at this point
  opt.include_zip = std::find(model_schema.begin(), model_schema.end(), "z") !=
                    model_schema.end();
  ModelFrame frame = build_frame(fm, aligned, opt);
  if (frame.data.rows() == 0) throw ValidationError("no usable evaluation rows");
  if (rows_used) *rows_used = frame.data.rows();

  std::vector<double> pred = predict_artifact(artifact, frame.data);
  if (artifact.log_centered)
    for (double& v : pred) v = std::exp(v + artifact.log_center);

  ModelEvaluation ev;
  ev.learner = artifact.learner;
  for (const auto& c : frame.data.schema()) ev.schema.push_back(c.name);
  ev.null_importance = 1.0 / static_cast<double>(frame.data.cols());
  if (artifact.forest) {
    ev.importance = artifact.forest->importance;
    ev.importance_from_trees = true;
  } else {
    ev.importance = linear_importance(*artifact.linear, column_sds(frame.data));
    ev.intercept = artifact.linear->intercept;
    ev.coefficients = coefficient_table(*artifact.linear);
    ev.adjusted_r2 = artifact.linear->adjusted_r2;
    ev.deviance = artifact.linear->deviance;
    if (artifact.learner == LearnerKind::lasso || artifact.learner == LearnerKind::ridge) {
      ev.lambda = artifact.linear->lambda;
      ev.shrinkage_ratio = artifact.linear->shrinkage_ratio;
    }
    ev.irls_iterations = artifact.linear->irls_iterations;
  }
  eval_residuals(ev, pred, frame.data.y());
  if (artifact.learner == LearnerKind::forest_clf)
    eval_classification(ev, pred, frame.data.y());
  ev.model_file = "";
  return ev;
}

void write_report_text(const EvaluationReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << "tie strength run " << report.config_hash << " (seed " << report.seed
      << ")\n";
  out << "dataset: " << dataset_kind_name(report.kind) << ", target "
      << target_kind_name(report.target) << ", features "
      << feature_config_name(report.config) << "\n";
  out << "graph: " << report.nodes << " nodes, " << report.graph_edges
      << " edges";
  if (report.households_filtered)
    out << " (dropped " << report.household.removed_same_household
        << " same-household, " << report.household.removed_missing_household
        << " missing-household)";
  if (report.isolated_dyads_removed)
    out << " (dropped " << report.isolated_removed_edges << " isolated-dyad edges)";
  out << "\n";
  if (!report.strength_histogram.empty()) {
    std::size_t total = 0;
    for (std::size_t c : report.strength_histogram) total += c;
    out << "strength counts:";
    for (std::size_t w = 0; w < report.strength_histogram.size(); ++w)
      out << " " << (w + 1) << ":" << report.strength_histogram[w];
    if (total > 0)
      out << "  (top strength share "
          << fixed(static_cast<double>(report.strength_histogram.back()) /
                       static_cast<double>(total),
                   3)
          << ")";
    out << "\n";
  }
  if (report.imputed) {
    out << "imputed: age " << report.imputation.age.imputed << "/"
        << (report.imputation.age.imputed + report.imputation.age.observed)
        << ", sex " << report.imputation.sex.imputed << "/"
        << (report.imputation.sex.imputed + report.imputation.sex.observed)
        << ", paired zip " << report.imputation.paired_zip.imputed << "/"
        << (report.imputation.paired_zip.imputed +
            report.imputation.paired_zip.observed)
        << "\n";
  }
  out << "rows: " << report.target_rows << " modeling (" << report.train_rows
      << " train, " << report.eval_rows
      << (report.in_sample ? " in-sample eval" : " held-out eval") << ")\n";
  if (report.log_target)
    out << "gaussian responses were log-transformed and centered before fitting\n";

  for (const auto& ev : report.models) {
    out << "\n== " << learner_name(ev.learner) << " ==\n";
    out << "model file: " << ev.model_file << "\n";
    if (!std::isnan(ev.adjusted_r2))
      out << "adjusted R2: " << fixed(ev.adjusted_r2) << "\n";
    if (!std::isnan(ev.deviance)) out << "deviance: " << fixed(ev.deviance, 2) << "\n";
    if (!std::isnan(ev.lambda))
      out << "lambda: " << format_double(ev.lambda)
          << ", shrinkage ratio: " << fixed(ev.shrinkage_ratio) << "\n";
    if (!std::isnan(ev.intercept)) {
      out << "intercept: " << fixed(ev.intercept) << "\n";
      out << "coefficients:\n";
      for (const auto& c : ev.coefficients) {
        out << "  " << c.name << " = " << fixed(c.value);
        if (!std::isnan(c.std_error)) out << " (se " << fixed(c.std_error) << ")";
        out << "\n";
      }
    }
    out << "importance (null " << fixed(ev.null_importance) << "):\n";
    std::vector<std::size_t> order(ev.importance.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return ev.importance[a] > ev.importance[b];
    });
    for (std::size_t k : order)
      out << "  " << ev.schema[k] << " " << fixed(ev.importance[k]) << "\n";
    out << "abs residuals: mean " << fixed(ev.residual_mean_abs) << ", median "
        << fixed(ev.residual_median_abs) << "\n";
    if (!std::isnan(ev.exact_accuracy))
      out << "accuracy: exact " << fixed(ev.exact_accuracy) << ", within one unit "
          << fixed(ev.within_one_accuracy) << "\n";
  }
  for (const auto& n : report.notes) out << "\nnote: " << n << "\n";
}

} // namespace bowtie
