#include "bowtie/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "bowtie/error.hpp"
#include "bowtie/rng.hpp"

namespace bowtie {

namespace {

constexpr double kMinGain = 1e-12;

struct SplitChoice {
  double gain = 0.0;
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::uint32_t category_mask = 0;
};

struct ValuePair {
  double v;
  double y;   // regression response
  int cls;    // classification label index
};

// Everything a worker reuses across trees; sized once per thread.
struct TreeScratch {
  std::vector<std::size_t> idx;      // dataset row ids, partitioned in place
  std::vector<ValuePair> pairs;
  std::vector<std::size_t> features; // candidate pool for per-node sampling
  std::vector<double> importance;    // raw gain accumulator
  std::vector<std::size_t> cat_cnt;  // [category]
  std::vector<double> cat_sum, cat_sum2;
  std::vector<std::size_t> cat_cls;  // [category * n_classes + class]
  std::vector<std::size_t> cls_tot, cls_left;
};

struct BuildItem {
  std::int32_t node;
  std::uint32_t begin, end;
};

// n * Gini impurity from class counts: n - sum(c^2)/n
double gini_times_n(const std::vector<std::size_t>& counts, std::size_t n) {
  if (n == 0) return 0.0;
  double sumsq = 0;
  for (std::size_t c : counts) sumsq += static_cast<double>(c) * static_cast<double>(c);
  return static_cast<double>(n) - sumsq / static_cast<double>(n);
}

// threshold strictly above lo so the lo-group stays on the left
double split_threshold(double lo, double hi) {
  const double mid = 0.5 * (lo + hi);
  return mid > lo ? mid : hi;
}

void scan_numeric_regression(std::span<ValuePair> pairs, double node_sse,
                             std::int32_t feature, std::size_t min_leaf,
                             SplitChoice& best) {
  const std::size_t m = pairs.size();
  std::sort(pairs.begin(), pairs.end(),
            [](const ValuePair& a, const ValuePair& b) { return a.v < b.v; });
  if (pairs.front().v == pairs.back().v) return;
  double tot = 0, tot2 = 0;
  for (const auto& p : pairs) {
    tot += p.y;
    tot2 += p.y * p.y;
  }
  double sum_l = 0, sum2_l = 0;
  for (std::size_t t = 0; t + 1 < m; ++t) {
    sum_l += pairs[t].y;
    sum2_l += pairs[t].y * pairs[t].y;
    if (pairs[t].v == pairs[t + 1].v) continue;
    if (t + 1 < min_leaf || m - t - 1 < min_leaf) continue;
    const double nl = static_cast<double>(t + 1);
    const double nr = static_cast<double>(m - t - 1);
    const double sse_l = sum2_l - sum_l * sum_l / nl;
    const double sse_r = (tot2 - sum2_l) - (tot - sum_l) * (tot - sum_l) / nr;
    const double gain = node_sse - sse_l - sse_r;
    if (gain > best.gain) {
      best.gain = gain;
      best.feature = feature;
      best.threshold = split_threshold(pairs[t].v, pairs[t + 1].v);
      best.category_mask = 0;
    }
  }
}

void scan_numeric_classification(std::span<ValuePair> pairs, double node_h,
                                 std::int32_t feature, std::size_t min_leaf,
                                 TreeScratch& s, SplitChoice& best) {
  const std::size_t m = pairs.size();
  std::sort(pairs.begin(), pairs.end(),
            [](const ValuePair& a, const ValuePair& b) { return a.v < b.v; });
  if (pairs.front().v == pairs.back().v) return;
  const std::size_t n_cls = s.cls_tot.size();
  std::fill(s.cls_left.begin(), s.cls_left.end(), std::size_t{0});
  // running sum(c^2) on both sides; moving one row updates each in O(1)
  double sumsq_l = 0, sumsq_r = 0;
  for (std::size_t k = 0; k < n_cls; ++k)
    sumsq_r += static_cast<double>(s.cls_tot[k]) * static_cast<double>(s.cls_tot[k]);
  for (std::size_t t = 0; t + 1 < m; ++t) {
    const std::size_t k = static_cast<std::size_t>(pairs[t].cls);
    sumsq_l += 2.0 * static_cast<double>(s.cls_left[k]) + 1.0;
    const std::size_t right_k = s.cls_tot[k] - s.cls_left[k];
    sumsq_r -= 2.0 * static_cast<double>(right_k) - 1.0;
    ++s.cls_left[k];
    if (pairs[t].v == pairs[t + 1].v) continue;
    if (t + 1 < min_leaf || m - t - 1 < min_leaf) continue;
    const double nl = static_cast<double>(t + 1);
    const double nr = static_cast<double>(m - t - 1);
    const double gain = node_h - (nl - sumsq_l / nl) - (nr - sumsq_r / nr);
    if (gain > best.gain) {
      best.gain = gain;
      best.feature = feature;
      best.threshold = split_threshold(pairs[t].v, pairs[t + 1].v);
      best.category_mask = 0;
    }
  }
}

int category_of(double v, int n_categories, const std::string& col) {
  const int c = static_cast<int>(v);
  if (v != std::floor(v) || c < 0 || c >= n_categories)
    throw ValidationError("column '" + col + "' has non-category value " +
                          std::to_string(v));
  return c;
}

// Binary partitions of the category set, enumerated as bitmasks over the
// categories without the top one (its complement covers the rest).
void scan_categorical(const Dataset& d, std::span<const std::size_t> rows,
                      std::size_t col, const std::vector<int>& class_of_row,
                      double node_impurity, double tot, double tot2,
                      std::size_t min_leaf, TreeScratch& s, SplitChoice& best) {
  const ColumnInfo& info = d.schema()[col];
  const int n_cat = info.n_categories;
  const bool classification = !class_of_row.empty();
  const std::size_t n_cls = classification ? s.cls_tot.size() : 0;
  s.cat_cnt.assign(static_cast<std::size_t>(n_cat), 0);
  if (classification) {
    s.cat_cls.assign(static_cast<std::size_t>(n_cat) * n_cls, 0);
    for (std::size_t r : rows) {
      const int c = category_of(d.at(r, col), n_cat, info.name);
      ++s.cat_cnt[c];
      ++s.cat_cls[static_cast<std::size_t>(c) * n_cls +
                  static_cast<std::size_t>(class_of_row[r])];
    }
  } else {
    s.cat_sum.assign(static_cast<std::size_t>(n_cat), 0.0);
    s.cat_sum2.assign(static_cast<std::size_t>(n_cat), 0.0);
    for (std::size_t r : rows) {
      const int c = category_of(d.at(r, col), n_cat, info.name);
      const double y = d.y()[r];
      ++s.cat_cnt[c];
      s.cat_sum[c] += y;
      s.cat_sum2[c] += y * y;
    }
  }
  const std::size_t m = rows.size();
  const std::uint32_t top = 1u << (n_cat - 1);
  for (std::uint32_t mask = 1; mask < top; ++mask) {
    std::size_t nl = 0;
    for (int c = 0; c < n_cat; ++c)
      if ((mask >> c) & 1u) nl += s.cat_cnt[c];
    if (nl < min_leaf || m - nl < min_leaf || nl == 0 || nl == m) continue;
    const double dl = static_cast<double>(nl);
    const double dr = static_cast<double>(m - nl);
    double gain;
    if (classification) {
      double sumsq_l = 0, sumsq_r = 0;
      for (std::size_t k = 0; k < n_cls; ++k) {
        std::size_t cl = 0;
        for (int c = 0; c < n_cat; ++c)
          if ((mask >> c) & 1u) cl += s.cat_cls[static_cast<std::size_t>(c) * n_cls + k];
        const std::size_t cr = s.cls_tot[k] - cl;
        sumsq_l += static_cast<double>(cl) * static_cast<double>(cl);
        sumsq_r += static_cast<double>(cr) * static_cast<double>(cr);
      }
      gain = node_impurity - (dl - sumsq_l / dl) - (dr - sumsq_r / dr);
    } else {
      double sum_l = 0, sum2_l = 0;
      for (int c = 0; c < n_cat; ++c)
        if ((mask >> c) & 1u) {
          sum_l += s.cat_sum[c];
          sum2_l += s.cat_sum2[c];
        }
      const double sse_l = sum2_l - sum_l * sum_l / dl;
      const double sse_r = (tot2 - sum2_l) - (tot - sum_l) * (tot - sum_l) / dr;
      gain = node_impurity - sse_l - sse_r;
    }
    if (gain > best.gain) {
      best.gain = gain;
      best.feature = static_cast<std::int32_t>(col);
      best.threshold = 0.0;
      best.category_mask = mask;
    }
  }
}

} // namespace

double Tree::predict(std::span<const double> row) const {
  const TreeNode* n = nodes.data();
  while (n->feature >= 0) {
    const double x = row[static_cast<std::size_t>(n->feature)];
    bool left;
    if (n->category_mask != 0) {
      const int v = static_cast<int>(x);
      left = v >= 0 && v < 32 && ((n->category_mask >> v) & 1u);
    } else {
      left = x < n->threshold;
    }
    n = nodes.data() + (left ? n->left : n->right);
  }
  return n->value;
}

namespace {

struct FitContext {
  const Dataset* d = nullptr;
  ForestTask task = ForestTask::regression;
  std::size_t mtry = 0;
  std::size_t min_leaf = 1;
  std::vector<int> class_of_row;  // classification label index per dataset row
  std::vector<double> class_labels;
};

void grow_tree(const FitContext& ctx, std::uint64_t tree_seed, Tree& out,
               TreeScratch& s) {
  const Dataset& d = *ctx.d;
  const std::size_t n = d.rows();
  const std::size_t p = d.cols();
  const bool clf = ctx.task == ForestTask::classification;
  const std::size_t n_cls = ctx.class_labels.size();

  Rng rng(tree_seed);
  s.idx.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    s.idx[i] = static_cast<std::size_t>(rng.next_below(n));

  s.importance.assign(p, 0.0);
  if (clf) {
    s.cls_tot.assign(n_cls, 0);
    s.cls_left.assign(n_cls, 0);
  }

  out.nodes.clear();
  out.nodes.emplace_back();
  std::vector<BuildItem> stack;
  stack.push_back({0, 0, static_cast<std::uint32_t>(n)});

  while (!stack.empty()) {
    const BuildItem item = stack.back();
    stack.pop_back();
    const std::span<std::size_t> rows(s.idx.data() + item.begin,
                                      item.end - item.begin);
    const std::size_t m = rows.size();

    // node stats and purity check
    double tot = 0, tot2 = 0, node_impurity = 0;
    bool pure;
    double leaf_value;
    if (clf) {
      std::fill(s.cls_tot.begin(), s.cls_tot.end(), std::size_t{0});
      for (std::size_t r : rows) ++s.cls_tot[ctx.class_of_row[r]];
      std::size_t present = 0, modal = 0;
      for (std::size_t k = 0; k < n_cls; ++k) {
        if (s.cls_tot[k] > 0) ++present;
        if (s.cls_tot[k] > s.cls_tot[modal]) modal = k;
      }
      pure = present <= 1;
      leaf_value = ctx.class_labels[modal];
      node_impurity = gini_times_n(s.cls_tot, m);
    } else {
      double y_lo = d.y()[rows[0]], y_hi = y_lo;
      for (std::size_t r : rows) {
        const double y = d.y()[r];
        tot += y;
        tot2 += y * y;
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
      }
      pure = y_lo == y_hi;
      leaf_value = tot / static_cast<double>(m);
      node_impurity = tot2 - tot * tot / static_cast<double>(m);
    }

    TreeNode& node = out.nodes[static_cast<std::size_t>(item.node)];
    if (pure || m < 2 * ctx.min_leaf || m < 2) {
      node.value = leaf_value;
      continue;
    }

    // candidate features: all of them, or a per-node sample scanned in
    // ascending index order so gain ties resolve to the lowest index
    std::span<const std::size_t> candidates;
    if (ctx.mtry >= p) {
      s.features.resize(p);
      std::iota(s.features.begin(), s.features.end(), std::size_t{0});
      candidates = {s.features.data(), p};
    } else {
      s.features.resize(p);
      std::iota(s.features.begin(), s.features.end(), std::size_t{0});
      for (std::size_t i = 0; i < ctx.mtry; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(p - i));
        std::swap(s.features[i], s.features[j]);
      }
      std::sort(s.features.begin(), s.features.begin() +
                                        static_cast<std::ptrdiff_t>(ctx.mtry));
      candidates = {s.features.data(), ctx.mtry};
    }

    SplitChoice best;
    best.gain = kMinGain;
    for (std::size_t col : candidates) {
      if (d.schema()[col].categorical) {
        scan_categorical(d, rows, col, ctx.class_of_row, node_impurity, tot, tot2,
                         ctx.min_leaf, s, best);
        continue;
      }
      s.pairs.resize(m);
      if (clf) {
        for (std::size_t r = 0; r < m; ++r)
          s.pairs[r] = {d.at(rows[r], col), 0.0, ctx.class_of_row[rows[r]]};
        scan_numeric_classification({s.pairs.data(), m}, node_impurity,
                                    static_cast<std::int32_t>(col), ctx.min_leaf,
                                    s, best);
        // the scan consumed cls_left; cls_tot still describes the node
      } else {
        for (std::size_t r = 0; r < m; ++r)
          s.pairs[r] = {d.at(rows[r], col), d.y()[rows[r]], 0};
        scan_numeric_regression({s.pairs.data(), m}, node_impurity,
                                static_cast<std::int32_t>(col), ctx.min_leaf,
                                best);
      }
    }

    if (best.feature < 0) {
      node.value = leaf_value;
      continue;
    }

    s.importance[static_cast<std::size_t>(best.feature)] +=
        std::max(best.gain, 0.0) / static_cast<double>(n);

    const std::size_t col = static_cast<std::size_t>(best.feature);
    auto goes_left = [&](std::size_t r) {
      const double x = d.at(r, col);
      if (best.category_mask != 0)
        return ((best.category_mask >> static_cast<int>(x)) & 1u) != 0;
      return x < best.threshold;
    };
    auto mid_it = std::partition(rows.begin(), rows.end(), goes_left);
    const std::uint32_t mid =
        item.begin + static_cast<std::uint32_t>(mid_it - rows.begin());

    const std::int32_t left_id = static_cast<std::int32_t>(out.nodes.size());
    out.nodes.emplace_back();
    out.nodes.emplace_back();
    TreeNode& parent = out.nodes[static_cast<std::size_t>(item.node)];
    parent.feature = best.feature;
    parent.threshold = best.threshold;
    parent.category_mask = best.category_mask;
    parent.left = left_id;
    parent.right = left_id + 1;
    stack.push_back({left_id + 1, mid, item.end});
    stack.push_back({left_id, item.begin, mid});
  }
}

} // namespace

ForestModel fit_forest(const Dataset& d, ForestTask task, std::uint64_t seed,
                       const ForestOptions& opt) {
  const std::size_t n = d.rows();
  const std::size_t p = d.cols();
  if (n == 0 || p == 0) throw ValidationError("empty dataset");
  if (opt.n_trees == 0) throw ValidationError("need at least one tree");
  for (const auto& c : d.schema())
    if (c.categorical && (c.n_categories < 2 || c.n_categories > 31))
      throw ValidationError("categorical column '" + c.name +
                            "' must have 2..31 categories");

  FitContext ctx;
  ctx.d = &d;
  ctx.task = task;
  ctx.min_leaf = std::max<std::size_t>(opt.min_leaf, 1);

  ForestModel m;
  m.task = task;
  m.n_trees = opt.n_trees;
  m.seed = seed;
  m.columns = d.schema();

  if (task == ForestTask::classification) {
    ctx.class_labels = d.y();
    std::sort(ctx.class_labels.begin(), ctx.class_labels.end());
    ctx.class_labels.erase(
        std::unique(ctx.class_labels.begin(), ctx.class_labels.end()),
        ctx.class_labels.end());
    if (ctx.class_labels.size() < 2)
      throw ValidationError("classification target has a single class");
    ctx.class_of_row.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      auto it = std::lower_bound(ctx.class_labels.begin(), ctx.class_labels.end(),
                                 d.y()[r]);
      ctx.class_of_row[r] = static_cast<int>(it - ctx.class_labels.begin());
    }
    m.class_labels = ctx.class_labels;
  }

  auto [lo, hi] = std::minmax_element(d.y().begin(), d.y().end());
  m.y_min = *lo;
  m.y_max = *hi;

  if (opt.max_features > 0) {
    ctx.mtry = std::min(opt.max_features, p);
    m.rule = ctx.mtry >= p ? MaxFeatures::all_rule : MaxFeatures::sqrt_rule;
  } else if (task == ForestTask::classification) {
    ctx.mtry = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::sqrt(static_cast<double>(p))));
    m.rule = MaxFeatures::sqrt_rule;
  } else {
    ctx.mtry = p;
    m.rule = MaxFeatures::all_rule;
  }
  m.max_features = ctx.mtry;

  m.trees.resize(opt.n_trees);
  std::vector<std::vector<double>> raw_importance(opt.n_trees);

  std::size_t n_threads = opt.threads ? opt.threads
                                      : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, opt.n_trees);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    TreeScratch scratch;
    try {
      for (;;) {
        const std::size_t t = next.fetch_add(1);
        if (t >= opt.n_trees) return;
        grow_tree(ctx, derive_seed(seed, t), m.trees[t], scratch);
        raw_importance[t] = scratch.importance;
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mu);
      if (!failure) failure = std::current_exception();
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  // normalized mean impurity decrease; uniform when nothing ever split
  m.importance.assign(p, 0.0);
  for (std::size_t t = 0; t < opt.n_trees; ++t)
    for (std::size_t j = 0; j < p; ++j) m.importance[j] += raw_importance[t][j];
  double total = std::accumulate(m.importance.begin(), m.importance.end(), 0.0);
  if (total > 0) {
    for (double& v : m.importance) v /= total;
  } else {
    std::fill(m.importance.begin(), m.importance.end(), 1.0 / static_cast<double>(p));
  }
  return m;
}

double predict_forest_row(const ForestModel& m, std::span<const double> row) {
  if (m.trees.empty()) throw ValidationError("model has no trees");
  if (m.task == ForestTask::regression) {
    double sum = 0;
    for (const Tree& t : m.trees) sum += t.predict(row);
    return sum / static_cast<double>(m.trees.size());
  }
  std::vector<std::size_t> votes(m.class_labels.size(), 0);
  for (const Tree& t : m.trees) {
    const double label = t.predict(row);
    auto it = std::lower_bound(m.class_labels.begin(), m.class_labels.end(), label);
    ++votes[static_cast<std::size_t>(it - m.class_labels.begin())];
  }
  std::size_t winner = 0;
  for (std::size_t k = 1; k < votes.size(); ++k)
    if (votes[k] > votes[winner]) winner = k;
  return m.class_labels[winner];
}

std::vector<double> predict_forest(const ForestModel& m, const Dataset& d,
                                   std::size_t threads) {
  if (d.cols() != m.columns.size())
    throw ValidationError("schema mismatch: model expects " +
                          std::to_string(m.columns.size()) + " columns, got " +
                          std::to_string(d.cols()));
  for (std::size_t c = 0; c < d.cols(); ++c)
    if (d.schema()[c].name != m.columns[c].name)
      throw ValidationError("schema mismatch at column " + std::to_string(c) +
                            ": model has '" + m.columns[c].name + "', data has '" +
                            d.schema()[c].name + "'");
  const std::size_t n = d.rows();
  std::vector<double> out(n);
  std::size_t n_threads =
      threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, std::max<std::size_t>(n / 256, 1));

  if (n_threads <= 1) {
    for (std::size_t r = 0; r < n; ++r) out[r] = predict_forest_row(m, d.row(r));
    return out;
  }
  std::atomic<std::size_t> next{0};
  constexpr std::size_t kChunk = 256;
  auto worker = [&] {
    for (;;) {
      const std::size_t begin = next.fetch_add(kChunk);
      if (begin >= n) return;
      const std::size_t end = std::min(begin + kChunk, n);
      for (std::size_t r = begin; r < end; ++r)
        out[r] = predict_forest_row(m, d.row(r));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return out;
}

} // namespace bowtie
