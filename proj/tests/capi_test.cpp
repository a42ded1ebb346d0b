#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <json.hpp>
#include <string>

#include "bowtie/bowtie.hpp"
#include "bowtie/bowtie_c.h"
#include "bowtie/io.hpp"
#include "bowtie/pipeline.hpp"
#include "support/synth.hpp"

using namespace bowtie;
using namespace testsupport;
using Json = nlohmann::json;

namespace {

// Owns a char* returned through the C boundary.
struct CStr {
  char* s = nullptr;
  ~CStr() { bt_string_free(s); }
  std::string view() const { return s ? std::string(s) : std::string(); }
};

struct GraphHandle {
  bt_graph* g = nullptr;
  ~GraphHandle() { bt_graph_free(g); }
};

struct FeaturesHandle {
  bt_features* f = nullptr;
  ~FeaturesHandle() { bt_features_free(f); }
};

// Multiplex edge file plus attributes with a few holes for the impute test.
struct CApiFixture {
  TempDir dir{"capi"};
  WeightedGraph g;
  AttributeTable attrs;
  std::string edges_path, attrs_path;

  explicit CApiFixture(std::size_t n = 50, double p = 0.2, std::uint64_t seed = 31,
                       double p_attr = 1.0, std::size_t households = 0)
      : g(random_multiplex_graph(n, p, seed)),
        attrs(random_attributes(n, seed + 1, p_attr, p_attr, p_attr, 5, households)),
        edges_path(dir.path() + "/edges.csv"),
        attrs_path(dir.path() + "/attributes.csv") {
    write_file(edges_path, multiplex_csv(g, seed + 2));
    write_file(attrs_path, attributes_csv(attrs));
  }
};

} // namespace

TEST_CASE("version and error strings are always safe to read") {
  REQUIRE(bt_version() != nullptr);
  CHECK(std::strlen(bt_version()) > 0);
  REQUIRE(bt_last_error() != nullptr);
  bt_string_free(nullptr); // freeing NULL is a no-op
}

TEST_CASE("graphs load through the C boundary with matching counts") {
  CApiFixture f;
  GraphHandle h;
  REQUIRE(bt_graph_load("multiplex", f.edges_path.c_str(), nullptr,
                        f.attrs_path.c_str(), &h.g) == BT_OK);
  CHECK(bt_graph_node_count(h.g) == f.g.node_count());
  CHECK(bt_graph_edge_count(h.g) == f.g.edge_count());

  // generic kind reads the plain weighted edge list
  const std::string plain = f.dir.path() + "/plain.csv";
  write_file(plain, edges_csv(f.g.edges()));
  GraphHandle h2;
  REQUIRE(bt_graph_load("generic", plain.c_str(), nullptr, nullptr, &h2.g) == BT_OK);
  CHECK(bt_graph_edge_count(h2.g) == f.g.edge_count());
}

TEST_CASE("load failures come back as status codes with a message") {
  GraphHandle h;
  CHECK(bt_graph_load("generic", "/no/such/file.csv", nullptr, nullptr, &h.g) ==
        BT_ERROR_PARSE);
  CHECK(std::strlen(bt_last_error()) > 0);
  CHECK(h.g == nullptr);

  CHECK(bt_graph_load("martian", "/tmp/x.csv", nullptr, nullptr, &h.g) ==
        BT_ERROR_VALIDATION);
  CHECK(bt_graph_load(nullptr, "/tmp/x.csv", nullptr, nullptr, &h.g) ==
        BT_ERROR_VALIDATION);
  CApiFixture f;
  CHECK(bt_graph_load("generic", f.edges_path.c_str(), nullptr, nullptr, nullptr) ==
        BT_ERROR_VALIDATION);
}

TEST_CASE("preprocessing steps mirror the native filters") {
  CApiFixture f(50, 0.2, 31, 1.0, 10);
  GraphHandle h;
  REQUIRE(bt_graph_load("multiplex", f.edges_path.c_str(), nullptr,
                        f.attrs_path.c_str(), &h.g) == BT_OK);

  HouseholdFilterStats stats;
  WeightedGraph expect = filter_same_household(f.g, f.attrs, &stats);
  size_t removed_same = 0, removed_missing = 0;
  REQUIRE(bt_graph_filter_households(h.g, &removed_same, &removed_missing) == BT_OK);
  CHECK(removed_same == stats.removed_same_household);
  CHECK(removed_missing == stats.removed_missing_household);
  CHECK(bt_graph_edge_count(h.g) == expect.edge_count());

  const std::size_t before = expect.edge_count();
  expect = remove_isolated_ties(expect);
  size_t removed_edges = 0;
  REQUIRE(bt_graph_drop_isolated_dyads(h.g, &removed_edges) == BT_OK);
  CHECK(removed_edges == before - expect.edge_count());
  CHECK(bt_graph_edge_count(h.g) == expect.edge_count());

  // filtering without attributes is refused
  const std::string plain = f.dir.path() + "/plain.csv";
  write_file(plain, edges_csv(f.g.edges()));
  GraphHandle bare;
  REQUIRE(bt_graph_load("generic", plain.c_str(), nullptr, nullptr, &bare.g) == BT_OK);
  CHECK(bt_graph_filter_households(bare.g, nullptr, nullptr) == BT_ERROR_VALIDATION);
}

TEST_CASE("canonical graph files round trip through the C writer") {
  CApiFixture f;
  GraphHandle h;
  REQUIRE(bt_graph_load("multiplex", f.edges_path.c_str(), nullptr,
                        f.attrs_path.c_str(), &h.g) == BT_OK);
  const std::string out = f.dir.path() + "/canon";
  REQUIRE(bt_graph_write_canonical(h.g, out.c_str(), "config=cafe seed=3") == BT_OK);
  CHECK(std::filesystem::exists(out + "/nodemap.csv"));
  CHECK(std::filesystem::exists(out + "/attributes.csv"));
  LoadedGraph reloaded = load_edge_list_csv(out + "/edges.csv");
  CHECK(reloaded.graph.edge_count() == f.g.edge_count());
  CHECK(read_file(out + "/edges.csv").rfind("# config=cafe seed=3", 0) == 0);
}

TEST_CASE("feature computation matches the native path exactly") {
  CApiFixture f;
  GraphHandle h;
  REQUIRE(bt_graph_load("multiplex", f.edges_path.c_str(), nullptr,
                        f.attrs_path.c_str(), &h.g) == BT_OK);
  FeaturesHandle feats;
  REQUIRE(bt_features_compute(h.g, 1, &feats.f) == BT_OK);
  CHECK(bt_features_row_count(feats.f) == f.g.edge_count());

  const std::string csv = f.dir.path() + "/features.csv";
  const std::string schema = f.dir.path() + "/features_schema.csv";
  REQUIRE(bt_features_write_csv(feats.f, csv.c_str(), schema.c_str(), nullptr) == BT_OK);
  CHECK(std::filesystem::exists(schema));

  LoadedGraph native = load_multiplex_csv(f.edges_path);
  AttributeTable attrs = load_attributes_csv(f.attrs_path, native.nodemap);
  FeatureMatrix expect = compute_features(native.graph, &attrs, 1);
  FeatureMatrix got = load_feature_csv(csv);
  REQUIRE(got.rows() == expect.rows());
  for (std::size_t r = 0; r < got.rows(); ++r)
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      const double a = got.value(r, c), b = expect.value(r, c);
      CHECK((a == b || (std::isnan(a) && std::isnan(b))));
    }
}

TEST_CASE("imputation through the C boundary fills holes and reports them") {
  CApiFixture f(220, 0.1, 41, 0.7);
  GraphHandle h;
  REQUIRE(bt_graph_load("multiplex", f.edges_path.c_str(), nullptr,
                        f.attrs_path.c_str(), &h.g) == BT_OK);
  CStr report;
  REQUIRE(bt_impute_attributes(h.g, 7, &report.s) == BT_OK);
  REQUIRE(report.s != nullptr);
  Json j = Json::parse(report.view());
  CHECK(j.contains("age"));
  CHECK(j.at("age").at("imputed").get<std::size_t>() > 0);

  const std::string out = f.dir.path() + "/attributes_imputed.csv";
  REQUIRE(bt_graph_write_attributes(h.g, out.c_str(), nullptr) == BT_OK);
  LoadedGraph native = load_multiplex_csv(f.edges_path);
  // the writer emits canonical dense ids, so reload without the label map
  AttributeTable filled =
      load_attributes_dense_csv(out, native.graph.node_count());
  for (NodeId i = 0; i < native.graph.node_count(); ++i)
    if (native.graph.degree(i) > 0) {
      CHECK(filled.has_age(i));
      CHECK(filled.has_sex(i));
    }

  // imputing without attributes is refused
  GraphHandle bare;
  const std::string plain = f.dir.path() + "/plain.csv";
  write_file(plain, edges_csv(f.g.edges()));
  REQUIRE(bt_graph_load("generic", plain.c_str(), nullptr, nullptr, &bare.g) == BT_OK);
  CHECK(bt_impute_attributes(bare.g, 7, nullptr) == BT_ERROR_VALIDATION);
}

TEST_CASE("pipeline runs from a JSON config and returns the report") {
  CApiFixture f;
  const std::string out = f.dir.path() + "/run";
  Json cfg{{"kind", "multiplex"},
           {"edges", f.edges_path},
           {"attributes", f.attrs_path},
           {"output_dir", out},
           {"learners", Json::array({"forest_reg", "ols"})},
           {"target", "w"},
           {"feature_config", 2},
           {"seed", 5},
           {"in_sample", true}};
  CStr report;
  REQUIRE(bt_pipeline_run(cfg.dump().c_str(), &report.s) == BT_OK);
  REQUIRE(report.s != nullptr);
  CHECK(report.view() == read_file(out + "/report.json"));
  Json j = Json::parse(report.view());
  CHECK(j.at("seed").get<int>() == 5);
  CHECK(j.at("models").size() == 2);
  CHECK(j.at("feature_config").get<std::string>() == "model2");
}

TEST_CASE("config mistakes are parse errors naming the key") {
  CStr out;
  CHECK(bt_pipeline_run("{\"edges\": \"x.csv\", \"surprise\": 1}", &out.s) ==
        BT_ERROR_PARSE);
  CHECK(std::string(bt_last_error()).find("surprise") != std::string::npos);
  CHECK(bt_pipeline_run("not json", &out.s) == BT_ERROR_PARSE);
  CHECK(bt_pipeline_run("{}", &out.s) == BT_ERROR_VALIDATION); // edges missing
  CHECK(bt_pipeline_run(nullptr, &out.s) == BT_ERROR_VALIDATION);
}

TEST_CASE("saved models evaluate and reports render through the C boundary") {
  CApiFixture f;
  const std::string out = f.dir.path() + "/run";
  Json cfg{{"kind", "multiplex"},
           {"edges", f.edges_path},
           {"attributes", f.attrs_path},
           {"output_dir", out},
           {"learners", Json::array({"forest_reg"})},
           {"target", "w"},
           {"seed", 5},
           {"in_sample", true}};
  REQUIRE(bt_pipeline_run(cfg.dump().c_str(), nullptr) == BT_OK);

  CStr evaluation;
  REQUIRE(bt_evaluate_model((out + "/model_forest_reg.json").c_str(),
                            (out + "/features.csv").c_str(),
                            (out + "/targets.csv").c_str(), &evaluation.s) == BT_OK);
  Json ev = Json::parse(evaluation.view());
  CHECK(ev.at("learner").get<std::string>() == "forest_reg");
  CHECK(ev.at("rows_used").get<std::size_t>() > 0);
  CHECK(!ev.contains("model_file"));

  const std::string rendered = f.dir.path() + "/rendered";
  REQUIRE(bt_report_render((out + "/report.json").c_str(), rendered.c_str()) == BT_OK);
  CHECK(std::filesystem::exists(rendered + "/report.txt"));
  CHECK(std::filesystem::exists(rendered + "/accuracy.svg"));
  CHECK(std::filesystem::exists(rendered + "/importance_forest_reg.svg"));

  CHECK(bt_evaluate_model("/no/such/model.json", (out + "/features.csv").c_str(),
                          (out + "/targets.csv").c_str(), &evaluation.s) != BT_OK);
}
