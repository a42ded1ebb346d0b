#include "bowtie/impute.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "bowtie/dataset.hpp"
#include "bowtie/error.hpp"
#include "bowtie/forest.hpp"
#include "bowtie/rng.hpp"

namespace bowtie {

namespace {

constexpr std::size_t kMinObserved = 100;
constexpr std::uint64_t kAgeStream = 11;
constexpr std::uint64_t kSexStream = 12;
constexpr std::uint64_t kZipStream = 13;

const std::vector<std::string> kNodeCovariates = {
    "degree",       "strength",       "clustering",         "nbr_age_mean",
    "nbr_age_frac", "nbr_male_frac",  "nbr_sex_frac"};

// structural predictor columns of the edge feature matrix (everything except
// the attribute-derived ones)
const std::vector<std::string> kEdgeCovariates = {
    "k_s", "k_d", "s_s", "s_d", "cc_s", "cc_d", "wcc_s", "wcc_d",
    "o",   "wo",  "n_ij", "e_ij", "n_s", "n_d", "e_s",   "e_d"};

std::vector<ColumnInfo> plain_schema(const std::vector<std::string>& names) {
  std::vector<ColumnInfo> schema;
  schema.reserve(names.size());
  for (const auto& n : names) schema.push_back({n, false, 0});
  return schema;
}

// One row of node-level covariates; neighbor summaries skip nodes whose
// attribute is missing and carry the observed fraction alongside.
void node_row(const WeightedGraph& g, const AttributeTable& attrs, NodeId i,
              std::vector<double>& out) {
  const auto nbrs = g.neighbors(i);
  double age_sum = 0, male = 0;
  std::size_t age_n = 0, sex_n = 0;
  for (NodeId u : nbrs) {
    if (attrs.has_age(u)) {
      age_sum += attrs.age(u);
      ++age_n;
    }
    if (attrs.has_sex(u)) {
      if (attrs.sex(u) == Sex::male) male += 1;
      ++sex_n;
    }
  }
  const double deg = static_cast<double>(nbrs.size());
  out.push_back(deg);
  out.push_back(g.strength(i));
  out.push_back(g.local_clustering(i));
  out.push_back(age_n ? age_sum / static_cast<double>(age_n) : 0.0);
  out.push_back(deg > 0 ? static_cast<double>(age_n) / deg : 0.0);
  out.push_back(sex_n ? male / static_cast<double>(sex_n) : 0.0);
  out.push_back(deg > 0 ? static_cast<double>(sex_n) / deg : 0.0);
}

struct SplitIdx {
  std::vector<std::size_t> train, held;
};

// 20% held out for the validation score, deterministic in the seed
SplitIdx holdout_split(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5A11D));
  rng.shuffle(perm);
  const std::size_t held = n / 5;
  SplitIdx s;
  s.held.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(held));
  s.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(held), perm.end());
  std::sort(s.held.begin(), s.held.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

bool single_class(const std::vector<double>& y) {
  for (double v : y)
    if (v != y.front()) return false;
  return true;
}

// Fit on 80% of the observed rows for the score, then on all of them for the
// fill. Degenerate single-class labels turn into a constant predictor.
struct FilledColumn {
  std::vector<double> predictions; // one per query row
  double score = std::numeric_limits<double>::quiet_NaN();
};

FilledColumn fill_with_forest(const std::vector<ColumnInfo>& schema,
                              const std::vector<double>& x_obs,
                              const std::vector<double>& y_obs,
                              const std::vector<double>& x_query,
                              std::size_t query_rows, ForestTask task,
                              std::uint64_t seed) {
  const std::size_t p = schema.size();
  const std::size_t n = y_obs.size();
  FilledColumn out;

  if (task == ForestTask::classification && single_class(y_obs)) {
    out.predictions.assign(query_rows, y_obs.front());
    out.score = 1.0; // a constant predictor is exact on a one-class holdout
    return out;
  }

  const SplitIdx split = holdout_split(n, seed);
  bool can_score = !split.held.empty();
  if (can_score && task == ForestTask::classification) {
    std::vector<double> yt;
    for (std::size_t r : split.train) yt.push_back(y_obs[r]);
    can_score = !single_class(yt); // the probe fit needs both classes
  }
  if (can_score) {
    std::vector<double> xt, yt, xh, yh;
    for (std::size_t r : split.train) {
      xt.insert(xt.end(), x_obs.begin() + static_cast<std::ptrdiff_t>(r * p),
                x_obs.begin() + static_cast<std::ptrdiff_t>((r + 1) * p));
      yt.push_back(y_obs[r]);
    }
    for (std::size_t r : split.held) {
      xh.insert(xh.end(), x_obs.begin() + static_cast<std::ptrdiff_t>(r * p),
                x_obs.begin() + static_cast<std::ptrdiff_t>((r + 1) * p));
      yh.push_back(y_obs[r]);
    }
    Dataset train(schema, std::move(xt), std::move(yt));
    ForestModel probe = fit_forest(train, task, derive_seed(seed, 1));
    Dataset held(schema, std::move(xh), yh);
    std::vector<double> pred = predict_forest(probe, held);
    double total = 0;
    for (std::size_t r = 0; r < yh.size(); ++r)
      total += task == ForestTask::regression ? std::abs(pred[r] - yh[r])
                                              : (pred[r] == yh[r] ? 1.0 : 0.0);
    out.score = total / static_cast<double>(yh.size());
  }

  Dataset full(schema, x_obs, y_obs);
  ForestModel model = fit_forest(full, task, derive_seed(seed, 2));
  Dataset query(schema, x_query, std::vector<double>(query_rows, 0.0));
  out.predictions = predict_forest(model, query);
  return out;
}

} // namespace

ImputedAttributes impute_attributes(const WeightedGraph& g, const AttributeTable& attrs,
                                    std::uint64_t seed) {
  if (attrs.size() != g.node_count())
    throw ValidationError("attribute table covers " + std::to_string(attrs.size()) +
                          " nodes, graph has " + std::to_string(g.node_count()));
  const std::size_t n = g.node_count();

  ImputedAttributes result{attrs, {}};
  ImputationReport& rep = result.report;
  rep.node_covariates = kNodeCovariates;
  rep.edge_covariates = kEdgeCovariates;
  rep.age.seed = derive_seed(seed, kAgeStream);
  rep.sex.seed = derive_seed(seed, kSexStream);
  rep.age.observed = attrs.observed_age_count();
  rep.sex.observed = attrs.observed_sex_count();

  std::vector<NodeId> missing_age, missing_sex;
  for (NodeId i = 0; i < n; ++i) {
    if (!attrs.has_age(i)) missing_age.push_back(i);
    if (!attrs.has_sex(i)) missing_sex.push_back(i);
  }
  if (missing_age.empty() && missing_sex.empty()) return result;

  if (!missing_age.empty() && rep.age.observed < kMinObserved)
    throw ValidationError("imputing age needs >= " + std::to_string(kMinObserved) +
                          " observed values, have " + std::to_string(rep.age.observed));
  if (!missing_sex.empty() && rep.sex.observed < kMinObserved)
    throw ValidationError("imputing sex needs >= " + std::to_string(kMinObserved) +
                          " observed values, have " + std::to_string(rep.sex.observed));

  const std::vector<ColumnInfo> schema = plain_schema(kNodeCovariates);
  std::vector<double> row;
  row.reserve(kNodeCovariates.size());

  auto gather = [&](const std::vector<NodeId>& nodes) {
    std::vector<double> x;
    x.reserve(nodes.size() * kNodeCovariates.size());
    for (NodeId i : nodes) {
      row.clear();
      node_row(g, attrs, i, row);
      x.insert(x.end(), row.begin(), row.end());
    }
    return x;
  };

  if (!missing_age.empty()) {
    std::vector<NodeId> observed;
    std::vector<double> y;
    for (NodeId i = 0; i < n; ++i)
      if (attrs.has_age(i)) {
        observed.push_back(i);
        y.push_back(attrs.age(i));
      }
    FilledColumn filled =
        fill_with_forest(schema, gather(observed), y, gather(missing_age),
                         missing_age.size(), ForestTask::regression, rep.age.seed);
    for (std::size_t k = 0; k < missing_age.size(); ++k)
      result.attrs.set_age(missing_age[k], filled.predictions[k]);
    rep.age.imputed = missing_age.size();
    rep.age.validation_score = filled.score;
  }

  if (!missing_sex.empty()) {
    std::vector<NodeId> observed;
    std::vector<double> y;
    for (NodeId i = 0; i < n; ++i)
      if (attrs.has_sex(i)) {
        observed.push_back(i);
        y.push_back(attrs.sex(i) == Sex::male ? 0.0 : 1.0);
      }
    FilledColumn filled =
        fill_with_forest(schema, gather(observed), y, gather(missing_sex),
                         missing_sex.size(), ForestTask::classification, rep.sex.seed);
    for (std::size_t k = 0; k < missing_sex.size(); ++k)
      result.attrs.set_sex(missing_sex[k],
                           filled.predictions[k] == 0.0 ? Sex::male : Sex::female);
    rep.sex.imputed = missing_sex.size();
    rep.sex.validation_score = filled.score;
  }

  return result;
}

PairedZip impute_paired_zip(const WeightedGraph& g, const AttributeTable& attrs,
                            std::uint64_t seed, const FeatureMatrix* features,
                            ImputationReport* report) {
  if (attrs.size() != g.node_count())
    throw ValidationError("attribute table covers " + std::to_string(attrs.size()) +
                          " nodes, graph has " + std::to_string(g.node_count()));

  FeatureMatrix local;
  if (!features) {
    local = compute_features(g, nullptr);
    features = &local;
  } else if (features->rows() != g.edge_count()) {
    throw ValidationError("feature matrix rows disagree with the edge count");
  }

  const std::size_t m = features->rows();
  PairedZip out;
  out.z.assign(m, 0.0);
  out.was_imputed.assign(m, 0);
  out.stats.seed = derive_seed(seed, kZipStream);

  std::vector<int> col_of;
  for (const auto& name : kEdgeCovariates) col_of.push_back(feature_index(name));
  const std::size_t p = col_of.size();

  std::vector<std::size_t> observed_rows, missing_rows;
  std::vector<double> y_obs;
  for (std::size_t r = 0; r < m; ++r) {
    const auto [i, j] = features->edge(r);
    if (attrs.has_zip(i) && attrs.has_zip(j)) {
      out.z[r] = attrs.zip(i) == attrs.zip(j) ? 1.0 : 0.0;
      observed_rows.push_back(r);
      y_obs.push_back(out.z[r]);
    } else {
      missing_rows.push_back(r);
    }
  }
  out.stats.observed = observed_rows.size();

  if (!missing_rows.empty()) {
    if (observed_rows.size() < kMinObserved)
      throw ValidationError("imputing paired zip needs >= " +
                            std::to_string(kMinObserved) + " observable edges, have " +
                            std::to_string(observed_rows.size()));
    auto gather = [&](const std::vector<std::size_t>& rows) {
      std::vector<double> x;
      x.reserve(rows.size() * p);
      for (std::size_t r : rows)
        for (int c : col_of) x.push_back(features->value(r, static_cast<std::size_t>(c)));
      return x;
    };
    FilledColumn filled = fill_with_forest(
        plain_schema(kEdgeCovariates), gather(observed_rows), y_obs,
        gather(missing_rows), missing_rows.size(), ForestTask::classification,
        out.stats.seed);
    for (std::size_t k = 0; k < missing_rows.size(); ++k) {
      out.z[missing_rows[k]] = filled.predictions[k];
      out.was_imputed[missing_rows[k]] = 1;
    }
    out.stats.imputed = missing_rows.size();
    out.stats.validation_score = filled.score;
  }

  if (report) report->paired_zip = out.stats;
  return out;
}

std::string imputation_report_json_string(const ImputationReport& report) {
  nlohmann::ordered_json j;
  auto put = [](const AttributeImputation& a) {
    nlohmann::ordered_json o;
    o["observed"] = a.observed;
    o["imputed"] = a.imputed;
    if (std::isnan(a.validation_score))
      o["validation_score"] = nullptr;
    else
      o["validation_score"] = a.validation_score;
    o["seed"] = a.seed;
    return o;
  };
  j["age"] = put(report.age);
  j["sex"] = put(report.sex);
  j["paired_zip"] = put(report.paired_zip);
  j["node_covariates"] = report.node_covariates;
  j["edge_covariates"] = report.edge_covariates;
  j["covariate_note"] =
      "imputation covariates are an implementation choice; the source analyses "
      "do not list theirs";
  return j.dump(1, '\t') + "\n";
}

void write_imputation_report(const ImputationReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << imputation_report_json_string(report);
}

} // namespace bowtie
