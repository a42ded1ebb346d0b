#ifndef BOWTIE_DATASET_HPP
#define BOWTIE_DATASET_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bowtie/bowtie.hpp"
#include "bowtie/strength.hpp"

namespace bowtie {

struct ColumnInfo {
  std::string name;
  bool categorical = false;
  int n_categories = 0;
};

// Dense design matrix plus response. NaN cells are rejected at construction;
// missingness must be resolved upstream (imputation or complete-case rows).
class Dataset {
public:
  Dataset() = default;
  Dataset(std::vector<ColumnInfo> schema, std::vector<double> x, std::vector<double> y);

  std::size_t rows() const { return y_.size(); }
  std::size_t cols() const { return schema_.size(); }
  const std::vector<ColumnInfo>& schema() const { return schema_; }
  const std::vector<double>& x() const { return x_; }
  const std::vector<double>& y() const { return y_; }
  double at(std::size_t r, std::size_t c) const { return x_[r * cols() + c]; }
  std::span<const double> row(std::size_t r) const { return {x_.data() + r * cols(), cols()}; }

  Dataset subset(std::span<const std::size_t> keep) const;

  // center to mean 0 / scale to unit sd per column; constant columns are
  // centered only. Records the transform.
  void standardize();
  bool standardized() const { return standardized_; }
  const std::vector<double>& column_means() const { return mean_; }
  const std::vector<double>& column_sds() const { return sd_; }

  int column_index(const std::string& name) const; // -1 if absent

private:
  std::vector<ColumnInfo> schema_;
  std::vector<double> x_; // row-major
  std::vector<double> y_;
  bool standardized_ = false;
  std::vector<double> mean_, sd_;
};

// Feature subsets from the modeling section: the full set, the set without
// weighted overlap, and the set without unweighted overlap.
enum class FeatureConfig : int { model1 = 1, model2 = 2, model3 = 3 };

enum class LearnerKind { forest_reg, forest_clf, ols, poisson, lasso, ridge };

bool learner_is_forest(LearnerKind k);
const char* learner_name(LearnerKind k);
const char* feature_config_name(FeatureConfig c);
LearnerKind learner_from_name(const std::string& name);
FeatureConfig feature_config_from_name(const std::string& name);

struct FrameOptions {
  FeatureConfig config = FeatureConfig::model1;
  LearnerKind learner = LearnerKind::ols;
  bool include_zip = true;         // the India analysis drops the zip indicator
  bool complete_case_only = false; // restrict to rows with full attributes
};

// A Dataset assembled from the feature matrix and one target, plus the target
// row behind each dataset row. Sex becomes one categorical column for forests
// and the i_ff/i_fm dummies (male-male reference) for regressions. Linear
// frames also omit n_s and n_d: the neighborhood partition makes them exact
// linear functions of k_s, k_d, and n_ij, which would leave any design with
// an intercept rank-deficient.
struct ModelFrame {
  Dataset data;
  std::vector<std::size_t> source_rows;
};

ModelFrame build_frame(const FeatureMatrix& fm, const TieStrengthTarget& target,
                       const FrameOptions& opt);

} // namespace bowtie

#endif
