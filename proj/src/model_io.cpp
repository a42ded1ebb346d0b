#include "bowtie/model_io.hpp"

#include <charconv>
#include <fstream>
#include <json.hpp>

#include "bowtie/error.hpp"

namespace bowtie {

namespace {

using Json = nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

// hex floats survive the text round trip bit for bit, which decimal printing
// of NaN payloads and subnormals does not guarantee
std::string hexf(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
  return std::string(buf, res.ptr);
}

double unhexf(const std::string& s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ParseError("bad hex float '" + s + "' in model file");
  return v;
}

Json hex_array(const std::vector<double>& v) {
  Json arr = Json::array();
  for (double x : v) arr.push_back(hexf(x));
  return arr;
}

std::vector<double> unhex_array(const Json& arr) {
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& s : arr) out.push_back(unhexf(s.get<std::string>()));
  return out;
}

Json schema_to_json(const std::vector<ColumnInfo>& schema) {
  Json arr = Json::array();
  for (const auto& c : schema) {
    Json col;
    col["name"] = c.name;
    if (c.categorical) {
      col["categorical"] = true;
      col["n_categories"] = c.n_categories;
    }
    arr.push_back(std::move(col));
  }
  return arr;
}

std::vector<ColumnInfo> schema_from_json(const Json& arr) {
  std::vector<ColumnInfo> schema;
  schema.reserve(arr.size());
  for (const auto& col : arr) {
    ColumnInfo c;
    c.name = col.at("name").get<std::string>();
    if (col.contains("categorical") && col["categorical"].get<bool>()) {
      c.categorical = true;
      c.n_categories = col.at("n_categories").get<int>();
    }
    schema.push_back(std::move(c));
  }
  return schema;
}

// trees serialize columnar: one array per node field, index = node id
Json forest_to_json(const ForestModel& m) {
  Json f;
  f["task"] = m.task == ForestTask::regression ? "regression" : "classification";
  f["n_trees"] = m.n_trees;
  f["max_features"] = m.max_features;
  f["rule"] = m.rule == MaxFeatures::sqrt_rule ? "sqrt" : "all";
  f["columns"] = schema_to_json(m.columns);
  f["importance"] = hex_array(m.importance);
  f["y_min"] = hexf(m.y_min);
  f["y_max"] = hexf(m.y_max);
  if (m.task == ForestTask::classification) f["class_labels"] = hex_array(m.class_labels);
  Json trees = Json::array();
  for (const Tree& t : m.trees) {
    Json jt;
    Json feature = Json::array(), left = Json::array(), right = Json::array();
    Json mask = Json::array(), threshold = Json::array(), value = Json::array();
    for (const TreeNode& n : t.nodes) {
      feature.push_back(n.feature);
      left.push_back(n.left);
      right.push_back(n.right);
      mask.push_back(n.category_mask);
      threshold.push_back(hexf(n.threshold));
      value.push_back(hexf(n.value));
    }
    jt["feature"] = std::move(feature);
    jt["left"] = std::move(left);
    jt["right"] = std::move(right);
    jt["mask"] = std::move(mask);
    jt["threshold"] = std::move(threshold);
    jt["value"] = std::move(value);
    trees.push_back(std::move(jt));
  }
  f["trees"] = std::move(trees);
  return f;
}

ForestModel forest_from_json(const Json& f) {
  ForestModel m;
  const std::string task = f.at("task").get<std::string>();
  if (task == "regression")
    m.task = ForestTask::regression;
  else if (task == "classification")
    m.task = ForestTask::classification;
  else
    throw ParseError("unknown forest task '" + task + "'");
  m.n_trees = f.at("n_trees").get<std::size_t>();
  m.max_features = f.at("max_features").get<std::size_t>();
  m.rule = f.at("rule").get<std::string>() == "sqrt" ? MaxFeatures::sqrt_rule
                                                     : MaxFeatures::all_rule;
  m.columns = schema_from_json(f.at("columns"));
  m.importance = unhex_array(f.at("importance"));
  m.y_min = unhexf(f.at("y_min").get<std::string>());
  m.y_max = unhexf(f.at("y_max").get<std::string>());
  if (f.contains("class_labels")) m.class_labels = unhex_array(f["class_labels"]);
  for (const auto& jt : f.at("trees")) {
    const auto& feature = jt.at("feature");
    const auto& left = jt.at("left");
    const auto& right = jt.at("right");
    const auto& mask = jt.at("mask");
    const auto& threshold = jt.at("threshold");
    const auto& value = jt.at("value");
    const std::size_t n = feature.size();
    if (left.size() != n || right.size() != n || mask.size() != n ||
        threshold.size() != n || value.size() != n)
      throw ParseError("tree node arrays disagree on length");
    Tree t;
    t.nodes.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      TreeNode& node = t.nodes[k];
      node.feature = feature[k].get<std::int32_t>();
      node.left = left[k].get<std::int32_t>();
      node.right = right[k].get<std::int32_t>();
      node.category_mask = mask[k].get<std::uint32_t>();
      node.threshold = unhexf(threshold[k].get<std::string>());
      node.value = unhexf(value[k].get<std::string>());
      if (node.feature >= 0) {
        const auto lo = static_cast<std::size_t>(node.left);
        const auto hi = static_cast<std::size_t>(node.right);
        if (node.left <= static_cast<std::int32_t>(k) || lo >= n || hi >= n)
          throw ParseError("tree node " + std::to_string(k) + " has bad children");
      }
    }
    m.trees.push_back(std::move(t));
  }
  if (m.trees.empty()) throw ParseError("model file holds a forest with no trees");
  return m;
}

const char* family_name(LinearFamily f) {
  switch (f) {
    case LinearFamily::gaussian_ols: return "ols";
    case LinearFamily::gaussian_lasso: return "lasso";
    case LinearFamily::gaussian_ridge: return "ridge";
    case LinearFamily::poisson: return "poisson";
  }
  return "?";
}

Json linear_to_json(const LinearModel& m) {
  Json l;
  l["family"] = family_name(m.family);
  l["intercept"] = hexf(m.intercept);
  l["coefficients"] = hex_array(m.coefficients);
  l["schema"] = m.schema;
  l["lambda"] = hexf(m.lambda);
  l["col_mean"] = hex_array(m.col_mean);
  l["col_sd"] = hex_array(m.col_sd);
  l["adjusted_r2"] = hexf(m.adjusted_r2);
  l["deviance"] = hexf(m.deviance);
  l["std_errors"] = hex_array(m.std_errors);
  l["shrinkage_ratio"] = hexf(m.shrinkage_ratio);
  l["irls_iterations"] = m.irls_iterations;
  return l;
}

LinearModel linear_from_json(const Json& l) {
  LinearModel m;
  const std::string fam = l.at("family").get<std::string>();
  bool known = false;
  for (LinearFamily f : {LinearFamily::gaussian_ols, LinearFamily::gaussian_lasso,
                         LinearFamily::gaussian_ridge, LinearFamily::poisson})
    if (fam == family_name(f)) {
      m.family = f;
      known = true;
    }
  if (!known) throw ParseError("unknown linear family '" + fam + "'");
  m.intercept = unhexf(l.at("intercept").get<std::string>());
  m.coefficients = unhex_array(l.at("coefficients"));
  m.schema = l.at("schema").get<std::vector<std::string>>();
  m.lambda = unhexf(l.at("lambda").get<std::string>());
  m.col_mean = unhex_array(l.at("col_mean"));
  m.col_sd = unhex_array(l.at("col_sd"));
  m.adjusted_r2 = unhexf(l.at("adjusted_r2").get<std::string>());
  m.deviance = unhexf(l.at("deviance").get<std::string>());
  m.std_errors = unhex_array(l.at("std_errors"));
  m.shrinkage_ratio = unhexf(l.at("shrinkage_ratio").get<std::string>());
  m.irls_iterations = l.at("irls_iterations").get<std::size_t>();
  if (m.coefficients.size() != m.schema.size())
    throw ParseError("coefficient count disagrees with schema");
  return m;
}

} // namespace

void save_model(const ModelArtifact& artifact, const std::string& path) {
  if (learner_is_forest(artifact.learner) != artifact.forest.has_value() ||
      learner_is_forest(artifact.learner) == artifact.linear.has_value())
    throw ValidationError("artifact learner kind disagrees with its payload");
  Json j;
  j["format"] = "bowtie-model";
  j["version"] = kFormatVersion;
  j["learner"] = learner_name(artifact.learner);
  j["feature_config"] = feature_config_name(artifact.config);
  j["target_kind"] = target_kind_name(artifact.target_kind);
  j["log_centered"] = artifact.log_centered;
  j["log_center"] = hexf(artifact.log_center);
  j["seed"] = artifact.seed;
  j["config_hash"] = artifact.config_hash;
  if (artifact.forest) j["forest"] = forest_to_json(*artifact.forest);
  if (artifact.linear) j["linear"] = linear_to_json(*artifact.linear);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << j.dump(1, '\t') << "\n";
  if (!out) throw ParseError("short write to '" + path + "'");
}

ModelArtifact load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "bowtie-model")
      throw ParseError("'" + path + "' is not a model file");
    if (j.at("version").get<int>() != kFormatVersion)
      throw ParseError("unsupported model file version " +
                       std::to_string(j["version"].get<int>()));
    ModelArtifact a;
    a.learner = learner_from_name(j.at("learner").get<std::string>());
    a.config = feature_config_from_name(j.at("feature_config").get<std::string>());
    a.target_kind = target_kind_from_name(j.at("target_kind").get<std::string>());
    a.log_centered = j.at("log_centered").get<bool>();
    a.log_center = unhexf(j.at("log_center").get<std::string>());
    a.seed = j.at("seed").get<std::uint64_t>();
    a.config_hash = j.at("config_hash").get<std::string>();
    if (j.contains("forest")) a.forest = forest_from_json(j["forest"]);
    if (j.contains("linear")) a.linear = linear_from_json(j["linear"]);
    if (learner_is_forest(a.learner) != a.forest.has_value())
      throw ParseError("model payload disagrees with learner kind");
    return a;
  } catch (const Json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::vector<double> predict_artifact(const ModelArtifact& artifact, const Dataset& d,
                                     std::size_t threads) {
  if (artifact.forest) return predict_forest(*artifact.forest, d, threads);
  if (artifact.linear) return predict_linear(*artifact.linear, d);
  throw ValidationError("artifact holds no fitted model");
}

} // namespace bowtie
