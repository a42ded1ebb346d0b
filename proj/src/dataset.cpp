#include "bowtie/dataset.hpp"

#include <array>
#include <cmath>
#include <unordered_map>

#include "bowtie/error.hpp"

namespace bowtie {

Dataset::Dataset(std::vector<ColumnInfo> schema, std::vector<double> x, std::vector<double> y)
    : schema_(std::move(schema)), x_(std::move(x)), y_(std::move(y)) {
  if (x_.size() != y_.size() * schema_.size())
    throw ValidationError("dataset shape mismatch: " + std::to_string(x_.size()) +
                          " cells for " + std::to_string(y_.size()) + " rows x " +
                          std::to_string(schema_.size()) + " cols");
  for (double v : x_)
    if (std::isnan(v)) throw ValidationError("dataset contains NaN cells");
  for (double v : y_)
    if (std::isnan(v)) throw ValidationError("dataset target contains NaN");
}

Dataset Dataset::subset(std::span<const std::size_t> keep) const {
  std::vector<double> x;
  std::vector<double> y;
  x.reserve(keep.size() * cols());
  y.reserve(keep.size());
  for (std::size_t r : keep) {
    auto row_span = row(r);
    x.insert(x.end(), row_span.begin(), row_span.end());
    y.push_back(y_[r]);
  }
  Dataset out(schema_, std::move(x), std::move(y));
  // the recorded transform still describes how the cells were produced
  out.standardized_ = standardized_;
  out.mean_ = mean_;
  out.sd_ = sd_;
  return out;
}

void Dataset::standardize() {
  if (standardized_) throw ValidationError("dataset is already standardized");
  const std::size_t n = rows();
  const std::size_t p = cols();
  if (n == 0) throw ValidationError("cannot standardize an empty dataset");
  mean_.assign(p, 0.0);
  sd_.assign(p, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < p; ++c) mean_[c] += x_[r * p + c];
  for (std::size_t c = 0; c < p; ++c) mean_[c] /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < p; ++c) {
      const double d = x_[r * p + c] - mean_[c];
      sd_[c] += d * d;
    }
  for (std::size_t c = 0; c < p; ++c) {
    sd_[c] = std::sqrt(sd_[c] / static_cast<double>(n));
    if (sd_[c] == 0.0) sd_[c] = 1.0; // constant column: center only
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < p; ++c)
      x_[r * p + c] = (x_[r * p + c] - mean_[c]) / sd_[c];
  standardized_ = true;
}

int Dataset::column_index(const std::string& name) const {
  for (std::size_t c = 0; c < schema_.size(); ++c)
    if (schema_[c].name == name) return static_cast<int>(c);
  return -1;
}

bool learner_is_forest(LearnerKind k) {
  return k == LearnerKind::forest_reg || k == LearnerKind::forest_clf;
}

const char* learner_name(LearnerKind k) {
  switch (k) {
    case LearnerKind::forest_reg: return "forest_reg";
    case LearnerKind::forest_clf: return "forest_clf";
    case LearnerKind::ols: return "ols";
    case LearnerKind::poisson: return "poisson";
    case LearnerKind::lasso: return "lasso";
    case LearnerKind::ridge: return "ridge";
  }
  return "?";
}

const char* feature_config_name(FeatureConfig c) {
  switch (c) {
    case FeatureConfig::model1: return "model1";
    case FeatureConfig::model2: return "model2";
    case FeatureConfig::model3: return "model3";
  }
  return "?";
}

LearnerKind learner_from_name(const std::string& name) {
  for (LearnerKind k : {LearnerKind::forest_reg, LearnerKind::forest_clf,
                        LearnerKind::ols, LearnerKind::poisson, LearnerKind::lasso,
                        LearnerKind::ridge})
    if (name == learner_name(k)) return k;
  throw ValidationError("unknown learner '" + name + "'");
}

FeatureConfig feature_config_from_name(const std::string& name) {
  for (FeatureConfig c :
       {FeatureConfig::model1, FeatureConfig::model2, FeatureConfig::model3})
    if (name == feature_config_name(c) ||
        name == std::to_string(static_cast<int>(c)))
      return c;
  throw ValidationError("unknown feature configuration '" + name + "'");
}

namespace {

constexpr int kColAgeSum = 8;
constexpr int kColAgeDiff = 9;
constexpr int kColSex = 10;
constexpr int kColZip = 11;
constexpr int kColNonsharedSum = 16;
constexpr int kColNonsharedDiff = 17;

bool is_attribute_column(std::size_t c) {
  return c == kColAgeSum || c == kColAgeDiff || c == kColSex || c == kColZip;
}

} // namespace

ModelFrame build_frame(const FeatureMatrix& fm, const TieStrengthTarget& target,
                       const FrameOptions& opt) {
  // feature row lookup by edge
  std::unordered_map<std::uint64_t, std::size_t> edge_row;
  edge_row.reserve(fm.rows());
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    auto [s, d] = fm.edge(r);
    edge_row.emplace((static_cast<std::uint64_t>(s) << 32) | d, r);
  }
  std::vector<std::size_t> feat_row_of(target.size());
  for (std::size_t k = 0; k < target.size(); ++k) {
    const auto& row = target.rows()[k];
    auto it = edge_row.find((static_cast<std::uint64_t>(row.src) << 32) | row.dst);
    if (it == edge_row.end())
      throw ValidationError("target edge (" + std::to_string(row.src) + "," +
                            std::to_string(row.dst) + ") has no feature row");
    feat_row_of[k] = it->second;
  }

  const int dropped = opt.config == FeatureConfig::model2   ? feature_index("wo")
                      : opt.config == FeatureConfig::model3 ? feature_index("o")
                                                            : -1;

  // a column participates only if observed somewhere in the selected rows
  std::array<bool, kFeatureCount> any_observed{};
  for (std::size_t k = 0; k < target.size(); ++k)
    for (std::size_t c = 0; c < kFeatureCount; ++c)
      if (!std::isnan(fm.value(feat_row_of[k], c))) any_observed[c] = true;

  // The group sizes are exact linear functions of the degree columns:
  // n_d equals k_d, and k_s = n_s + 2*n_ij + 2. Trees split on them freely,
  // but with an intercept they make every linear design singular, so the
  // linear frames leave them out.
  const bool forest = learner_is_forest(opt.learner);

  std::vector<std::size_t> source_cols;
  for (std::size_t c = 0; c < kFeatureCount; ++c) {
    if (static_cast<int>(c) == dropped) continue;
    if (c == kColZip && !opt.include_zip) continue;
    if (is_attribute_column(c) && !any_observed[c]) continue;
    if (!forest && (static_cast<int>(c) == kColNonsharedSum ||
                    static_cast<int>(c) == kColNonsharedDiff))
      continue;
    source_cols.push_back(c);
  }

  // complete-case restriction looks only at the participating columns
  std::vector<std::size_t> keep;
  keep.reserve(target.size());
  for (std::size_t k = 0; k < target.size(); ++k) {
    bool ok = true;
    if (opt.complete_case_only) {
      for (std::size_t c : source_cols)
        if (std::isnan(fm.value(feat_row_of[k], c))) {
          ok = false;
          break;
        }
    }
    if (ok) keep.push_back(k);
  }
  if (keep.empty()) throw ValidationError("no rows left after complete-case filtering");

  std::vector<ColumnInfo> schema;
  for (std::size_t c : source_cols) {
    if (c == kColSex) {
      if (forest) {
        schema.push_back({"sex", true, 3});
      } else {
        schema.push_back({"i_ff", false, 0});
        schema.push_back({"i_fm", false, 0});
      }
    } else {
      schema.push_back({kFeatureNames[c], false, 0});
    }
  }

  std::vector<double> x;
  std::vector<double> y;
  x.reserve(keep.size() * schema.size());
  y.reserve(keep.size());
  std::vector<std::size_t> source_rows;
  source_rows.reserve(keep.size());
  for (std::size_t k : keep) {
    const std::size_t r = feat_row_of[k];
    for (std::size_t c : source_cols) {
      const double v = fm.value(r, c);
      if (std::isnan(v))
        throw ValidationError(std::string("feature '") + kFeatureNames[c] +
                              "' has missing values; impute attributes or use "
                              "complete-case rows");
      if (c == kColSex && !forest) {
        x.push_back(v == static_cast<double>(SexPair::FF) ? 1.0 : 0.0);
        x.push_back(v == static_cast<double>(SexPair::FM) ? 1.0 : 0.0);
      } else {
        x.push_back(v);
      }
    }
    y.push_back(target.values()[k]);
    source_rows.push_back(k);
  }

  return {Dataset(std::move(schema), std::move(x), std::move(y)), std::move(source_rows)};
}

} // namespace bowtie
