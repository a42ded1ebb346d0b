// Command-line front end. Talks to the library exclusively through the C API
// so the shared library stays the single supported entry point.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bowtie/bowtie_c.h"

namespace {

using Json = nlohmann::ordered_json;

// Options shared by every subcommand that loads a graph.
struct GraphArgs {
  std::string kind = "generic";
  std::string edges;
  std::string layer_manifest;
  std::string attributes;
};

void add_graph_args(CLI::App* cmd, GraphArgs& a) {
  cmd->add_option("--kind", a.kind, "dataset kind")
      ->check(CLI::IsMember({"multiplex", "cdr", "generic"}))
      ->capture_default_str();
  cmd->add_option("--edges", a.edges, "edge or record CSV")->required();
  cmd->add_option("--layer-manifest", a.layer_manifest,
                  "layer name -> index map (multiplex only)");
  cmd->add_option("--attributes", a.attributes, "node attribute CSV");
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

int fail(bt_status st) {
  std::fprintf(stderr, "error: %s\n", bt_last_error());
  return static_cast<int>(st);
}

struct GraphHandle {
  bt_graph* g = nullptr;
  ~GraphHandle() { bt_graph_free(g); }
};

struct FeaturesHandle {
  bt_features* f = nullptr;
  ~FeaturesHandle() { bt_features_free(f); }
};

int load_graph(const GraphArgs& a, GraphHandle& h) {
  const bt_status st = bt_graph_load(a.kind.c_str(), a.edges.c_str(),
                                     opt(a.layer_manifest), opt(a.attributes), &h.g);
  return st == BT_OK ? 0 : fail(st);
}

bool write_text(const std::string& path, const char* text) {
  if (path.empty() || path == "-") {
    std::fputs(text, stdout);
    return true;
  }
  std::FILE* out = std::fopen(path.c_str(), "wb");
  if (!out) return false;
  std::fputs(text, out);
  std::fclose(out);
  return true;
}

// Options behind the modeling config JSON; fit and pipeline share them.
struct RunArgs {
  GraphArgs graph;
  std::string output_dir = ".";
  std::vector<std::string> learners;
  int feature_config = 1;
  std::string target = "w";
  std::uint64_t seed = 1;
  double split_fraction = 0.8;
  std::size_t sample_edges = 0;
  bool complete_case_only = false;
  bool impute = false;
  bool no_zip = false;
  bool single_orientation = false;
  bool filter_households = false;
  bool drop_isolated_dyads = false;
  std::string log_target = "auto";
  unsigned threads = 0;
  bool print_report = false;
};

void add_run_args(CLI::App* cmd, RunArgs& a) {
  add_graph_args(cmd, a.graph);
  cmd->add_option("--out", a.output_dir, "artifact directory")->capture_default_str();
  cmd->add_option("--learners", a.learners, "learners to fit")
      ->delimiter(',')
      ->check(CLI::IsMember(
          {"forest_reg", "forest_clf", "ols", "poisson", "lasso", "ridge"}));
  cmd->add_option("--model", a.feature_config,
                  "feature set: 1 full, 2 without weighted overlap, 3 without "
                  "unweighted overlap")
      ->check(CLI::Range(1, 3))
      ->capture_default_str();
  cmd->add_option("--target", a.target,
                  "w multiplex strength, y normalized closeness, z averaged")
      ->check(CLI::IsMember({"w", "y", "z"}))
      ->capture_default_str();
  cmd->add_option("--seed", a.seed, "RNG seed")->capture_default_str();
  cmd->add_option("--sample-edges", a.sample_edges,
                  "model a uniform edge sample of this size (0 = all)");
  cmd->add_flag("--complete-case-only", a.complete_case_only,
                "drop rows with missing attributes");
  cmd->add_flag("--impute", a.impute, "fill missing attributes with forests");
  cmd->add_flag("--no-zip", a.no_zip, "exclude the shared-zip indicator");
  cmd->add_flag("--single-orientation", a.single_orientation,
                "y target: keep one row per edge instead of both directions");
  cmd->add_flag("--filter-households", a.filter_households,
                "drop same- or unknown-household ties");
  cmd->add_flag("--drop-isolated-dyads", a.drop_isolated_dyads,
                "remove dyads disconnected from the rest of the graph");
  cmd->add_option("--log-target", a.log_target,
                  "log-then-center the response for ols/lasso/ridge")
      ->check(CLI::IsMember({"auto", "on", "off"}))
      ->capture_default_str();
  cmd->add_option("--threads", a.threads, "worker threads (0 = cores)");
  cmd->add_flag("--print-report", a.print_report, "print report JSON to stdout");
}

int run_modeling(const RunArgs& a, double split_fraction, bool in_sample) {
  Json cfg;
  cfg["kind"] = a.graph.kind;
  cfg["edges"] = a.graph.edges;
  if (!a.graph.layer_manifest.empty()) cfg["layer_manifest"] = a.graph.layer_manifest;
  if (!a.graph.attributes.empty()) cfg["attributes"] = a.graph.attributes;
  cfg["output_dir"] = a.output_dir;
  cfg["learners"] = a.learners;
  cfg["feature_config"] = a.feature_config;
  cfg["target"] = a.target;
  cfg["seed"] = a.seed;
  cfg["split_fraction"] = split_fraction;
  if (a.sample_edges) cfg["sample_edges"] = a.sample_edges;
  if (a.complete_case_only) cfg["complete_case_only"] = true;
  if (a.impute) cfg["impute"] = true;
  if (a.no_zip) cfg["include_zip"] = false;
  if (a.single_orientation) cfg["single_orientation"] = true;
  if (in_sample) cfg["in_sample"] = true;
  if (a.filter_households) cfg["filter_households"] = true;
  if (a.drop_isolated_dyads) cfg["drop_isolated_dyads"] = true;
  if (a.log_target == "auto")
    cfg["log_target"] = "auto";
  else
    cfg["log_target"] = a.log_target == "on";
  if (a.threads) cfg["threads"] = a.threads;

  char* report = nullptr;
  const bt_status st = bt_pipeline_run(cfg.dump().c_str(), &report);
  if (st != BT_OK) return fail(st);
  if (a.print_report && report) std::fputs(report, stdout);
  bt_string_free(report);
  if (!a.print_report)
    std::printf("report written to %s/report.json\n", a.output_dir.c_str());
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"bow-tie tie-strength toolkit"};
  app.require_subcommand(1);

  // ingest: normalize raw records into the canonical node map and edge list
  auto* ingest = app.add_subcommand("ingest", "normalize a dataset to canonical CSVs");
  GraphArgs ingest_args;
  std::string ingest_out = ".";
  bool ingest_households = false, ingest_dyads = false;
  add_graph_args(ingest, ingest_args);
  ingest->add_option("--out", ingest_out, "output directory")->capture_default_str();
  ingest->add_flag("--filter-households", ingest_households,
                   "drop same- or unknown-household ties");
  ingest->add_flag("--drop-isolated-dyads", ingest_dyads,
                   "remove dyads disconnected from the rest of the graph");

  // features: the per-edge predictor table
  auto* features = app.add_subcommand("features", "compute per-edge predictors");
  GraphArgs feat_args;
  std::string feat_out = "features.csv", feat_schema;
  unsigned feat_threads = 0;
  add_graph_args(features, feat_args);
  features->add_option("--out", feat_out, "feature CSV path")->capture_default_str();
  features->add_option("--schema-out", feat_schema, "column description CSV");
  features->add_option("--threads", feat_threads, "worker threads (0 = cores)");

  // impute: fill missing node attributes
  auto* impute = app.add_subcommand("impute", "fill missing ages and sexes");
  GraphArgs imp_args;
  std::string imp_attrs_out = "attributes_imputed.csv";
  std::string imp_report_out = "imputation.json";
  std::uint64_t imp_seed = 1;
  add_graph_args(impute, imp_args);
  impute->add_option("--attributes-out", imp_attrs_out, "imputed attribute CSV")
      ->capture_default_str();
  impute->add_option("--report-out", imp_report_out, "imputation report JSON")
      ->capture_default_str();
  impute->add_option("--seed", imp_seed, "RNG seed")->capture_default_str();

  // fit: train on every modeling row and evaluate in sample
  auto* fit = app.add_subcommand("fit", "fit learners on all rows, evaluate in sample");
  RunArgs fit_args;
  add_run_args(fit, fit_args);

  // pipeline: the full held-out evaluation flow
  auto* pipeline =
      app.add_subcommand("pipeline", "fit on a training split, evaluate held out");
  RunArgs pipe_args;
  bool pipe_in_sample = false;
  add_run_args(pipeline, pipe_args);
  pipeline->add_option("--split-fraction", pipe_args.split_fraction,
                       "training share of modeling rows")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  pipeline->add_flag("--in-sample", pipe_in_sample,
                     "evaluate on the training rows instead of the held-out split");

  // evaluate: saved model against feature/target files
  auto* evaluate = app.add_subcommand("evaluate", "apply a saved model to new rows");
  std::string eval_model, eval_features, eval_targets, eval_out = "-";
  evaluate->add_option("--model-file", eval_model, "saved model JSON")->required();
  evaluate->add_option("--features", eval_features, "feature CSV")->required();
  evaluate->add_option("--targets", eval_targets, "target CSV")->required();
  evaluate->add_option("--out", eval_out, "evaluation JSON path (- = stdout)")
      ->capture_default_str();

  // report: regenerate the text report and plots from report.json
  auto* report = app.add_subcommand("report", "render report.txt and plots");
  std::string rep_json = "report.json", rep_out = ".";
  report->add_option("--report", rep_json, "report JSON path")->capture_default_str();
  report->add_option("--out", rep_out, "output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (*ingest) {
    GraphHandle h;
    if (int rc = load_graph(ingest_args, h)) return rc;
    if (ingest_households) {
      size_t same = 0, missing = 0;
      const bt_status st = bt_graph_filter_households(h.g, &same, &missing);
      if (st != BT_OK) return fail(st);
      std::printf("removed %zu same-household and %zu unknown-household ties\n",
                  same, missing);
    }
    if (ingest_dyads) {
      size_t removed = 0;
      const bt_status st = bt_graph_drop_isolated_dyads(h.g, &removed);
      if (st != BT_OK) return fail(st);
      std::printf("removed %zu isolated-dyad ties\n", removed);
    }
    const bt_status st = bt_graph_write_canonical(h.g, ingest_out.c_str(), nullptr);
    if (st != BT_OK) return fail(st);
    std::printf("%zu nodes, %zu edges -> %s\n", bt_graph_node_count(h.g),
                bt_graph_edge_count(h.g), ingest_out.c_str());
    return 0;
  }

  if (*features) {
    GraphHandle h;
    if (int rc = load_graph(feat_args, h)) return rc;
    FeaturesHandle f;
    bt_status st = bt_features_compute(h.g, feat_threads, &f.f);
    if (st != BT_OK) return fail(st);
    st = bt_features_write_csv(f.f, feat_out.c_str(), opt(feat_schema), nullptr);
    if (st != BT_OK) return fail(st);
    std::printf("%zu feature rows -> %s\n", bt_features_row_count(f.f),
                feat_out.c_str());
    return 0;
  }

  if (*impute) {
    GraphHandle h;
    if (int rc = load_graph(imp_args, h)) return rc;
    char* rep = nullptr;
    bt_status st = bt_impute_attributes(h.g, imp_seed, &rep);
    if (st != BT_OK) return fail(st);
    const bool ok = write_text(imp_report_out, rep ? rep : "");
    bt_string_free(rep);
    if (!ok) {
      std::fprintf(stderr, "error: cannot write '%s'\n", imp_report_out.c_str());
      return static_cast<int>(BT_ERROR_OTHER);
    }
    st = bt_graph_write_attributes(h.g, imp_attrs_out.c_str(), nullptr);
    if (st != BT_OK) return fail(st);
    std::printf("imputed attributes -> %s, report -> %s\n", imp_attrs_out.c_str(),
                imp_report_out.c_str());
    return 0;
  }

  if (*fit) return run_modeling(fit_args, 1.0, true);

  if (*pipeline)
    return run_modeling(pipe_args, pipe_args.split_fraction, pipe_in_sample);

  if (*evaluate) {
    char* out = nullptr;
    const bt_status st = bt_evaluate_model(eval_model.c_str(), eval_features.c_str(),
                                           eval_targets.c_str(), &out);
    if (st != BT_OK) return fail(st);
    const bool ok = write_text(eval_out, out ? out : "");
    bt_string_free(out);
    if (!ok) {
      std::fprintf(stderr, "error: cannot write '%s'\n", eval_out.c_str());
      return static_cast<int>(BT_ERROR_OTHER);
    }
    return 0;
  }

  if (*report) {
    const bt_status st = bt_report_render(rep_json.c_str(), rep_out.c_str());
    if (st != BT_OK) return fail(st);
    std::printf("report rendered under %s\n", rep_out.c_str());
    return 0;
  }

  return 0;
}
