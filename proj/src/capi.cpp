#include "bowtie/bowtie_c.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>

#include "bowtie/attributes.hpp"
#include "bowtie/bowtie.hpp"
#include "bowtie/error.hpp"
#include "bowtie/graph.hpp"
#include "bowtie/impute.hpp"
#include "bowtie/io.hpp"
#include "bowtie/model_io.hpp"
#include "bowtie/pipeline.hpp"

struct bt_graph {
  bowtie::WeightedGraph graph;
  bowtie::NodeMap nodemap;
  std::optional<bowtie::AttributeTable> attrs;
};

struct bt_features {
  bowtie::FeatureMatrix fm;
};

namespace {

using Json = nlohmann::ordered_json;

thread_local std::string t_last_error;

// Exceptions never cross the C boundary; every entry point funnels through
// here and the category decides the status.
template <typename Fn>
bt_status guard(Fn&& fn) {
  try {
    fn();
    return BT_OK;
  } catch (const bowtie::ParseError& e) {
    t_last_error = e.what();
    return BT_ERROR_PARSE;
  } catch (const bowtie::ValidationError& e) {
    t_last_error = e.what();
    return BT_ERROR_VALIDATION;
  } catch (const bowtie::NumericError& e) {
    t_last_error = e.what();
    return BT_ERROR_NUMERIC;
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return BT_ERROR_OTHER;
  } catch (...) {
    t_last_error = "unknown error";
    return BT_ERROR_OTHER;
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string require(const char* v, const char* name) {
  if (!v) throw bowtie::ValidationError(std::string(name) + " must not be NULL");
  return v;
}

bowtie::RunConfig parse_run_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception& e) {
    throw bowtie::ParseError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw bowtie::ParseError("config: expected a JSON object");

  bowtie::RunConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "kind") {
        cfg.kind = bowtie::dataset_kind_from_name(value.get<std::string>());
      } else if (key == "edges") {
        cfg.edges_path = value.get<std::string>();
      } else if (key == "layer_manifest") {
        cfg.layer_manifest_path = value.get<std::string>();
      } else if (key == "attributes") {
        cfg.attributes_path = value.get<std::string>();
      } else if (key == "output_dir") {
        cfg.output_dir = value.get<std::string>();
      } else if (key == "learners") {
        for (const Json& name : value)
          cfg.learners.push_back(bowtie::learner_from_name(name.get<std::string>()));
      } else if (key == "feature_config") {
        cfg.config = bowtie::feature_config_from_name(
            value.is_number() ? std::to_string(value.get<int>())
                              : value.get<std::string>());
      } else if (key == "target") {
        cfg.target = bowtie::target_kind_from_name(value.get<std::string>());
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "split_fraction") {
        cfg.split_fraction = value.get<double>();
      } else if (key == "sample_edges") {
        cfg.sample_edges = value.get<std::size_t>();
      } else if (key == "complete_case_only") {
        cfg.complete_case_only = value.get<bool>();
      } else if (key == "impute") {
        cfg.impute = value.get<bool>();
      } else if (key == "include_zip") {
        cfg.include_zip = value.get<bool>();
      } else if (key == "single_orientation") {
        cfg.single_orientation = value.get<bool>();
      } else if (key == "in_sample") {
        cfg.in_sample = value.get<bool>();
      } else if (key == "filter_households") {
        cfg.filter_households = value.get<bool>();
      } else if (key == "drop_isolated_dyads") {
        cfg.drop_isolated_dyads = value.get<bool>();
      } else if (key == "log_target") {
        if (value.is_string() && value.get<std::string>() == "auto")
          cfg.log_target = -1;
        else
          cfg.log_target = value.get<bool>() ? 1 : 0;
      } else if (key == "threads") {
        cfg.threads = value.get<unsigned>();
      } else {
        throw bowtie::ParseError("config: unknown key '" + key + "'");
      }
    }
  } catch (const Json::exception& e) {
    throw bowtie::ParseError(std::string("config: ") + e.what());
  }
  if (cfg.edges_path.empty()) throw bowtie::ValidationError("config: 'edges' is required");
  return cfg;
}

} // namespace

extern "C" {

const char* bt_version(void) { return "1.0.0"; }

const char* bt_last_error(void) { return t_last_error.c_str(); }

void bt_string_free(char* s) { std::free(s); }

bt_status bt_graph_load(const char* kind, const char* edges_path,
                        const char* layer_manifest_path,
                        const char* attributes_path, bt_graph** out) {
  return guard([&] {
    const std::string kind_name = require(kind, "kind");
    const std::string path = require(edges_path, "edges_path");
    if (!out) throw bowtie::ValidationError("out must not be NULL");

    bowtie::LoadedGraph loaded;
    if (kind_name == "multiplex")
      loaded = bowtie::load_multiplex_csv(
          path, layer_manifest_path ? layer_manifest_path : "");
    else if (kind_name == "cdr")
      loaded = bowtie::load_cdr_csv(path);
    else if (kind_name == "generic")
      loaded = bowtie::load_edge_list_csv(path);
    else
      throw bowtie::ValidationError("unknown dataset kind '" + kind_name + "'");

    auto g = std::make_unique<bt_graph>();
    g->graph = std::move(loaded.graph);
    g->nodemap = std::move(loaded.nodemap);
    if (attributes_path)
      g->attrs = bowtie::load_attributes_csv(attributes_path, g->nodemap);
    *out = g.release();
  });
}

size_t bt_graph_node_count(const bt_graph* g) {
  return g ? g->graph.node_count() : 0;
}

size_t bt_graph_edge_count(const bt_graph* g) {
  return g ? g->graph.edge_count() : 0;
}

bt_status bt_graph_filter_households(bt_graph* g, size_t* removed_same,
                                     size_t* removed_missing) {
  return guard([&] {
    if (!g) throw bowtie::ValidationError("g must not be NULL");
    if (!g->attrs)
      throw bowtie::ValidationError("household filtering needs attributes");
    bowtie::HouseholdFilterStats stats;
    g->graph = bowtie::filter_same_household(g->graph, *g->attrs, &stats);
    if (removed_same) *removed_same = stats.removed_same_household;
    if (removed_missing) *removed_missing = stats.removed_missing_household;
  });
}

bt_status bt_graph_drop_isolated_dyads(bt_graph* g, size_t* removed_edges) {
  return guard([&] {
    if (!g) throw bowtie::ValidationError("g must not be NULL");
    const std::size_t before = g->graph.edge_count();
    g->graph = bowtie::remove_isolated_ties(g->graph);
    if (removed_edges) *removed_edges = before - g->graph.edge_count();
  });
}

bt_status bt_graph_write_canonical(const bt_graph* g, const char* dir,
                                   const char* provenance) {
  return guard([&] {
    if (!g) throw bowtie::ValidationError("g must not be NULL");
    const std::string base = require(dir, "dir");
    std::filesystem::create_directories(base);
    const std::string tag = provenance ? provenance : "";
    bowtie::write_nodemap_csv(g->nodemap, base + "/nodemap.csv");
    bowtie::write_edge_list_csv(g->graph, base + "/edges.csv", tag);
    if (g->attrs)
      bowtie::write_attributes_csv(*g->attrs, base + "/attributes.csv", tag);
  });
}

void bt_graph_free(bt_graph* g) { delete g; }

bt_status bt_features_compute(const bt_graph* g, unsigned threads,
                              bt_features** out) {
  return guard([&] {
    if (!g) throw bowtie::ValidationError("g must not be NULL");
    if (!out) throw bowtie::ValidationError("out must not be NULL");
    auto f = std::make_unique<bt_features>();
    f->fm = bowtie::compute_features(g->graph,
                                     g->attrs ? &*g->attrs : nullptr, threads);
    *out = f.release();
  });
}

size_t bt_features_row_count(const bt_features* f) {
  return f ? f->fm.rows() : 0;
}

bt_status bt_features_write_csv(const bt_features* f, const char* csv_path,
                                const char* schema_path,
                                const char* provenance) {
  return guard([&] {
    if (!f) throw bowtie::ValidationError("f must not be NULL");
    bowtie::write_feature_csv(f->fm, require(csv_path, "csv_path"),
                              schema_path ? schema_path : "",
                              provenance ? provenance : "");
  });
}

void bt_features_free(bt_features* f) { delete f; }

bt_status bt_impute_attributes(bt_graph* g, unsigned long long seed,
                               char** report_json_out) {
  return guard([&] {
    if (!g) throw bowtie::ValidationError("g must not be NULL");
    if (!g->attrs) throw bowtie::ValidationError("imputation needs attributes");
    bowtie::ImputedAttributes filled =
        bowtie::impute_attributes(g->graph, *g->attrs, seed);
    g->attrs = std::move(filled.attrs);
    if (report_json_out)
      *report_json_out =
          copy_string(bowtie::imputation_report_json_string(filled.report));
  });
}

bt_status bt_graph_write_attributes(const bt_graph* g, const char* path,
                                    const char* provenance) {
  return guard([&] {
    if (!g) throw bowtie::ValidationError("g must not be NULL");
    if (!g->attrs) throw bowtie::ValidationError("no attributes loaded");
    bowtie::write_attributes_csv(*g->attrs, require(path, "path"),
                                 provenance ? provenance : "");
  });
}

bt_status bt_pipeline_run(const char* config_json, char** report_json_out) {
  return guard([&] {
    bowtie::RunConfig cfg = parse_run_config(require(config_json, "config_json"));
    bowtie::EvaluationReport report = bowtie::run_pipeline(cfg);
    if (report_json_out)
      *report_json_out = copy_string(bowtie::report_json_string(report));
  });
}

bt_status bt_evaluate_model(const char* model_path, const char* features_csv,
                            const char* targets_csv,
                            char** evaluation_json_out) {
  return guard([&] {
    bowtie::ModelArtifact artifact =
        bowtie::load_model(require(model_path, "model_path"));
    bowtie::FeatureMatrix fm =
        bowtie::load_feature_csv(require(features_csv, "features_csv"));
    bowtie::TieStrengthTarget target =
        bowtie::load_target_csv(require(targets_csv, "targets_csv"));
    std::size_t rows_used = 0;
    bowtie::ModelEvaluation ev =
        bowtie::evaluate_artifact(artifact, fm, target, &rows_used);
    if (evaluation_json_out)
      *evaluation_json_out =
          copy_string(bowtie::evaluation_json_string(ev, rows_used));
  });
}

bt_status bt_report_render(const char* report_json_path, const char* dir) {
  return guard([&] {
    bowtie::EvaluationReport report =
        bowtie::load_report_json(require(report_json_path, "report_json_path"));
    const std::string base = require(dir, "dir");
    std::filesystem::create_directories(base);
    bowtie::write_report_text(report, base + "/report.txt");
    bowtie::emit_plots(report, base);
  });
}

} // extern "C"
