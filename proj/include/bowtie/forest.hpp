#ifndef BOWTIE_FOREST_HPP
#define BOWTIE_FOREST_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bowtie/dataset.hpp"

namespace bowtie {

enum class ForestTask : std::uint8_t { regression, classification };
enum class MaxFeatures : std::uint8_t { sqrt_rule, all_rule };

// One node of a CART tree. Internal nodes have feature >= 0; a nonzero
// category_mask marks a categorical split (go left when the value's bit is
// set), otherwise go left when value < threshold.
struct TreeNode {
  std::int32_t feature = -1;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::uint32_t category_mask = 0;
  double threshold = 0.0;
  double value = 0.0; // leaf payload: mean response or modal class label
};

struct Tree {
  std::vector<TreeNode> nodes; // nodes[0] is the root
  double predict(std::span<const double> row) const;
};

struct ForestModel {
  ForestTask task = ForestTask::regression;
  std::size_t n_trees = 0;
  std::size_t max_features = 0; // resolved per-split candidate count
  MaxFeatures rule = MaxFeatures::all_rule;
  std::uint64_t seed = 0;
  std::vector<ColumnInfo> columns;
  std::vector<Tree> trees;
  std::vector<double> importance;    // per column, sums to 1
  std::vector<double> class_labels;  // classification only, sorted ascending
  double y_min = 0.0, y_max = 0.0;   // training response range
};

struct ForestOptions {
  std::size_t n_trees = 200;
  std::size_t max_features = 0; // 0 = task default (sqrt(p) clf, p reg)
  std::size_t min_leaf = 1;
  std::size_t threads = 0; // 0 = hardware concurrency
};

// Bootstrap-resampled CART ensemble grown to purity. Splits maximize variance
// reduction (regression) or Gini decrease (classification); equal-gain ties go
// to the lowest feature index, then the lowest threshold. Tree t draws only
// from derive_seed(seed, t), so thread count never changes the result.
ForestModel fit_forest(const Dataset& d, ForestTask task, std::uint64_t seed,
                       const ForestOptions& opt = {});

// Mean of the tree outputs (regression) or the modal vote with ties going to
// the lowest label (classification). Rows must match the training schema.
std::vector<double> predict_forest(const ForestModel& m, const Dataset& d,
                                   std::size_t threads = 0);
double predict_forest_row(const ForestModel& m, std::span<const double> row);

} // namespace bowtie

#endif
