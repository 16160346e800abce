#include "ideation/learner.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ideation/descriptive.hpp"

namespace ideation::learner {

namespace {

constexpr std::uint64_t kTreeStream = 0x74726565;
constexpr std::uint64_t kFoldStream = 0x666f6c64;
constexpr std::uint64_t kBootStream = 0x626f6f74;
constexpr std::uint64_t kShuffleStream = 0x73687566;

std::size_t class_count_of(std::span<const double> y) {
  double top = 0.0;
  for (double v : y) {
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e6) {
      throw ValidationError("y", "classification labels must be nonnegative integers");
    }
    top = std::max(top, v);
  }
  return static_cast<std::size_t>(top) + 1;
}

void check_inputs(const Matrix& X, std::span<const double> y) {
  if (y.empty() || X.rows() == 0) throw ValidationError("X", "empty training data");
  if (X.rows() != y.size()) {
    throw ValidationError("y", "length " + std::to_string(y.size()) + " does not match " + std::to_string(X.rows()) +
                                   " rows");
  }
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (double v : X.row(r)) {
      if (!std::isfinite(v)) throw ValidationError("X", "non-finite value in row " + std::to_string(r));
    }
    if (!std::isfinite(y[r])) throw ValidationError("y", "non-finite value in row " + std::to_string(r));
  }
}

std::size_t argmax_low(std::span<const double> counts) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return best;
}

}  // namespace

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, std::span<const double> y, Task task, Rng& rng, const TreeOptions& options,
              std::size_t n_classes)
      : X_(X), y_(y), task_(task), rng_(rng), options_(options), n_classes_(n_classes) {
    const auto p = X.cols();
    max_features_ = options.max_features.value_or(
        task == Task::Classification ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p)))) : p);
    max_features_ = std::clamp<std::size_t>(max_features_, 1, std::max<std::size_t>(p, 1));
    features_.resize(p);
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    rows_ = std::move(rows);
    tree_.task_ = task_;
    tree_.n_features_ = X_.cols();
    tree_.n_classes_ = task_ == Task::Classification ? n_classes_ : 0;
    new_node();
    std::vector<Pending> stack{{0, 0, rows_.size()}};
    while (!stack.empty()) {
      const auto job = stack.back();
      stack.pop_back();
      grow(job, stack);
    }
    return std::move(tree_);
  }

 private:
  struct Pending {
    std::uint32_t node;
    std::size_t begin;
    std::size_t end;
  };

  struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double proxy = -1.0;  // sum over children of (class counts^2 or sum^2) / size; larger is purer
    bool found = false;
  };

  std::uint32_t new_node() {
    tree_.nodes_.emplace_back();
    if (task_ == Task::Classification) tree_.counts_.resize(tree_.counts_.size() + n_classes_, 0.0);
    return static_cast<std::uint32_t>(tree_.nodes_.size() - 1);
  }

  void grow(const Pending& job, std::vector<Pending>& stack) {
    const std::size_t n = job.end - job.begin;
    auto& node = tree_.nodes_[job.node];
    node.samples = static_cast<std::uint32_t>(n);

    bool pure = true;
    if (task_ == Task::Classification) {
      auto* counts = tree_.counts_.data() + job.node * n_classes_;
      for (std::size_t i = job.begin; i < job.end; ++i) counts[static_cast<std::size_t>(y_[rows_[i]])] += 1.0;
      const auto majority = argmax_low({counts, n_classes_});
      node.value = static_cast<double>(majority);
      pure = counts[majority] == static_cast<double>(n);
    } else {
      double sum = 0.0;
      const double first = y_[rows_[job.begin]];
      for (std::size_t i = job.begin; i < job.end; ++i) {
        sum += y_[rows_[i]];
        pure = pure && y_[rows_[i]] == first;
      }
      node.value = sum / static_cast<double>(n);
    }
    if (pure || n < options_.min_samples_split) return;

    const Split split = find_split(job);
    if (!split.found) return;

    // Partition rows in place: left block keeps x <= threshold.
    auto mid = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(job.begin),
                                     rows_.begin() + static_cast<std::ptrdiff_t>(job.end),
                                     [&](std::size_t r) { return X_(r, split.feature) <= split.threshold; });
    const auto split_at = static_cast<std::size_t>(mid - rows_.begin());

    const auto left = new_node();
    const auto right = new_node();
    auto& parent = tree_.nodes_[job.node];
    parent.feature = static_cast<std::int32_t>(split.feature);
    parent.threshold = split.threshold;
    parent.left = left;
    parent.right = right;
    stack.push_back({right, split_at, job.end});
    stack.push_back({left, job.begin, split_at});
  }

  // Features are visited in a random order. The first max_features are always
  // scored; if none of them admits a split (constant in this node), the
  // search continues through the remaining features until one does.
  Split find_split(const Pending& job) {
    const auto p = features_.size();
    for (std::size_t i = 0; i < p; ++i) std::swap(features_[i], features_[i + rng_.below(p - i)]);

    Split best;
    for (std::size_t visited = 0; visited < p; ++visited) {
      if (visited >= max_features_ && best.found) break;
      score_feature(features_[visited], job, best);
    }
    return best;
  }

  void score_feature(std::size_t f, const Pending& job, Split& best) {
    const std::size_t n = job.end - job.begin;
    order_.assign(rows_.begin() + static_cast<std::ptrdiff_t>(job.begin),
                  rows_.begin() + static_cast<std::ptrdiff_t>(job.end));
    std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return X_(a, f) < X_(b, f); });
    if (X_(order_.front(), f) == X_(order_.back(), f)) return;

    if (task_ == Task::Classification) {
      left_counts_.assign(n_classes_, 0.0);
      right_counts_.assign(n_classes_, 0.0);
      for (auto r : order_) right_counts_[static_cast<std::size_t>(y_[r])] += 1.0;
      double left_sq = 0.0;
      double right_sq = 0.0;
      for (double c : right_counts_) right_sq += c * c;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto c = static_cast<std::size_t>(y_[order_[i]]);
        left_sq += 2.0 * left_counts_[c] + 1.0;
        right_sq -= 2.0 * right_counts_[c] - 1.0;
        left_counts_[c] += 1.0;
        right_counts_[c] -= 1.0;
        consider(f, i, n, left_sq / static_cast<double>(i + 1) + right_sq / static_cast<double>(n - i - 1), best);
      }
    } else {
      double total = 0.0;
      for (auto r : order_) total += y_[r];
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += y_[order_[i]];
        const double right_sum = total - left_sum;
        const double nl = static_cast<double>(i + 1);
        const double nr = static_cast<double>(n - i - 1);
        consider(f, i, n, left_sum * left_sum / nl + right_sum * right_sum / nr, best);
      }
    }
  }

  void consider(std::size_t f, std::size_t i, std::size_t /*n*/, double proxy, Split& best) {
    const double a = X_(order_[i], f);
    const double b = X_(order_[i + 1], f);
    if (!(a < b)) return;
    if (best.found && !(proxy > best.proxy)) return;
    double mid = a + (b - a) / 2.0;
    if (!(mid < b)) mid = a;
    best = {f, mid, proxy, true};
  }

  const Matrix& X_;
  std::span<const double> y_;
  Task task_;
  Rng& rng_;
  TreeOptions options_;
  std::size_t n_classes_;
  std::size_t max_features_ = 1;
  std::vector<std::size_t> features_;
  std::vector<std::size_t> rows_;
  std::vector<std::size_t> order_;
  std::vector<double> left_counts_;
  std::vector<double> right_counts_;
  DecisionTree tree_;
};

double DecisionTree::predict(std::span<const double> x) const {
  if (x.size() != n_features_) {
    throw ValidationError("X", "expected " + std::to_string(n_features_) + " features, got " + std::to_string(x.size()));
  }
  std::uint32_t i = 0;
  while (nodes_[i].feature >= 0) {
    const auto& nd = nodes_[i];
    i = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
  return nodes_[i].value;
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.feature < 0; }));
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> d(nodes_.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (nodes_[i].feature >= 0) d[nodes_[i].left] = d[nodes_[i].right] = d[i] + 1;
  }
  return deepest;
}

bool DecisionTree::operator==(const DecisionTree& o) const {
  if (task_ != o.task_ || n_features_ != o.n_features_ || nodes_.size() != o.nodes_.size() || counts_ != o.counts_) {
    return false;
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto &a = nodes_[i], &b = o.nodes_[i];
    if (a.feature != b.feature || a.threshold != b.threshold || a.left != b.left || a.right != b.right ||
        a.value != b.value || a.samples != b.samples) {
      return false;
    }
  }
  return true;
}

DecisionTree train_tree(const Matrix& X, std::span<const double> y, Task task, Rng& rng, const TreeOptions& options,
                        std::span<const std::size_t> rows) {
  check_inputs(X, y);
  const std::size_t n_classes = task == Task::Classification ? class_count_of(y) : 0;
  std::vector<std::size_t> use;
  if (rows.empty()) {
    use.resize(X.rows());
    std::iota(use.begin(), use.end(), std::size_t{0});
  } else {
    use.assign(rows.begin(), rows.end());
  }
  TreeBuilder builder(X, y, task, rng, options, n_classes);
  return builder.build(std::move(use));
}

// ---------------------------------------------------------------------------

Forest train_forest(const Matrix& X, std::span<const double> y, Task task, std::uint64_t seed,
                    const ForestOptions& options) {
  check_inputs(X, y);
  if (options.n_trees == 0) throw ValidationError("n_trees", "a forest needs at least one tree");
  Forest forest;
  forest.task_ = task;
  forest.seed_ = seed;
  forest.n_features_ = X.cols();
  forest.n_classes_ = task == Task::Classification ? class_count_of(y) : 0;
  forest.trees_.reserve(options.n_trees);
  const std::size_t n = X.rows();
  std::vector<std::size_t> sample(n);
  for (std::size_t t = 0; t < options.n_trees; ++t) {
    Rng rng(derive_seed(seed, {kTreeStream, t}));
    for (auto& s : sample) s = rng.below(n);
    forest.trees_.push_back(train_tree(X, y, task, rng, options.tree, sample));
  }
  return forest;
}

double Forest::predict(std::span<const double> x) const {
  if (task_ == Task::Regression) {
    double sum = 0.0;
    for (const auto& t : trees_) sum += t.predict(x);
    return sum / static_cast<double>(trees_.size());
  }
  std::vector<double> votes(n_classes_, 0.0);
  for (const auto& t : trees_) votes[static_cast<std::size_t>(t.predict(x))] += 1.0;
  return static_cast<double>(argmax_low(votes));
}

std::vector<double> Forest::predict(const Matrix& X) const {
  if (X.cols() != n_features_) {
    throw ValidationError("X", "expected " + std::to_string(n_features_) + " columns, got " + std::to_string(X.cols()));
  }
  std::vector<double> out(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) out[r] = predict(X.row(r));
  return out;
}

// ---------------------------------------------------------------------------

double accuracy(std::span<const double> y, std::span<const double> predicted) {
  if (y.empty() || y.size() != predicted.size()) throw ValidationError("y", "length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += y[i] == predicted[i];
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

std::optional<double> r_squared(std::span<const double> y, std::span<const double> predicted) {
  if (y.empty() || y.size() != predicted.size()) throw ValidationError("y", "length mismatch");
  const double m = mean(y);
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_tot += (y[i] - m) * (y[i] - m);
    ss_res += (y[i] - predicted[i]) * (y[i] - predicted[i]);
  }
  if (ss_tot == 0.0) return std::nullopt;
  return 1.0 - ss_res / ss_tot;
}

Score score(Task task, std::span<const double> y, std::span<const double> predicted) {
  if (task == Task::Classification) return {accuracy(y, predicted), false};
  if (auto r2 = r_squared(y, predicted)) return {*r2, false};
  return {0.0, true};
}

std::string_view metric_name(Task task) { return task == Task::Classification ? "accuracy" : "r2"; }

std::vector<std::size_t> assign_folds(std::span<const double> y, Task task, std::size_t k, Rng& rng) {
  const std::size_t n = y.size();
  if (k < 2) throw ValidationError("k", "need at least 2 folds");
  if (n < k) throw ValidationError("k", std::to_string(k) + " folds but only " + std::to_string(n) + " rows");
  std::vector<std::size_t> fold(n);
  if (task == Task::Regression) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(idx.begin(), idx.end());
    for (std::size_t p = 0; p < n; ++p) fold[idx[p]] = p % k;
    return fold;
  }
  std::map<double, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[y[i]].push_back(i);
  for (const auto& [label, members] : by_class) {
    if (members.size() < k) {
      throw ValidationError("y", "class " + std::to_string(static_cast<long>(label)) + " has " +
                                     std::to_string(members.size()) + " member(s), fewer than k=" + std::to_string(k));
    }
  }
  std::size_t offset = 0;
  for (auto& [label, members] : by_class) {
    rng.shuffle(members.begin(), members.end());
    for (std::size_t p = 0; p < members.size(); ++p) fold[members[p]] = (offset + p) % k;
    offset = (offset + members.size()) % k;
  }
  return fold;
}

double CvResult::mean() const { return ideation::mean(scores); }

CvResult cross_validate(const Matrix& X, std::span<const double> y, Task task, std::size_t k, std::uint64_t seed,
                        const ForestOptions& forest, std::span<const std::size_t> groups) {
  check_inputs(X, y);
  Rng rng(derive_seed(seed, {kFoldStream}));
  std::vector<std::size_t> fold;
  if (groups.empty()) {
    fold = assign_folds(y, task, k, rng);
  } else {
    if (groups.size() != y.size()) throw ValidationError("groups", "length mismatch");
    // One representative label per source row; duplicates inherit its fold.
    std::map<std::size_t, std::size_t> slot;
    std::vector<double> labels;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (slot.emplace(groups[i], labels.size()).second) labels.push_back(y[i]);
    }
    const auto group_fold = assign_folds(labels, task, k, rng);
    fold.resize(y.size());
    for (std::size_t i = 0; i < groups.size(); ++i) fold[i] = group_fold[slot.at(groups[i])];
  }

  CvResult out;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  for (std::size_t f = 0; f < k; ++f) {
    train_rows.clear();
    test_rows.clear();
    for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == f ? test_rows : train_rows).push_back(i);
    const Matrix X_train = X.select_rows(train_rows);
    const Matrix X_test = X.select_rows(test_rows);
    std::vector<double> y_train;
    std::vector<double> y_test;
    for (auto r : train_rows) y_train.push_back(y[r]);
    for (auto r : test_rows) y_test.push_back(y[r]);
    const auto model = train_forest(X_train, y_train, task, derive_seed(seed, {kTreeStream, f}), forest);
    const auto s = score(task, y_test, model.predict(X_test));
    out.scores.push_back(s.value);
    out.degenerate_folds += s.degenerate;
  }
  return out;
}

namespace {

// Classification replicates must keep k distinct source rows per class for
// the grouped, stratified folds; short replicates are redrawn.
bool replicate_usable(std::span<const std::size_t> sample, std::span<const double> y, Task task, std::size_t k,
                      std::size_t n_classes_in_data) {
  if (task == Task::Regression) {
    std::vector<std::size_t> distinct(sample.begin(), sample.end());
    std::sort(distinct.begin(), distinct.end());
    return static_cast<std::size_t>(std::unique(distinct.begin(), distinct.end()) - distinct.begin()) >= k;
  }
  std::map<double, std::vector<std::size_t>> sources;
  for (auto s : sample) sources[y[s]].push_back(s);
  if (sources.size() != n_classes_in_data) return false;
  for (auto& [label, rows] : sources) {
    std::sort(rows.begin(), rows.end());
    if (static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin()) < k) return false;
  }
  return true;
}

}  // namespace

EvalReport bootstrap_and_baseline(const Matrix& X, std::span<const double> y, Task task, std::uint64_t seed,
                                  const EvalOptions& options) {
  EvalReport report;
  report.task = task;
  report.k = options.k;
  report.bootstrap = options.bootstrap;

  const auto cv = cross_validate(X, y, task, options.k, seed, options.forest);
  report.cv_scores = cv.scores;
  report.degenerate_folds += cv.degenerate_folds;

  const std::size_t n = y.size();
  std::size_t present_classes = 0;
  if (task == Task::Classification) {
    std::vector<double> labels(y.begin(), y.end());
    std::sort(labels.begin(), labels.end());
    present_classes = static_cast<std::size_t>(std::unique(labels.begin(), labels.end()) - labels.begin());
  }

  std::vector<std::size_t> sample(n);
  for (std::size_t b = 0; b < options.bootstrap; ++b) {
    Rng rng(derive_seed(seed, {kBootStream, b}));
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      for (auto& s : sample) s = rng.below(n);
      ok = replicate_usable(sample, y, task, options.k, present_classes);
    }
    if (!ok) throw StateError("could not draw a bootstrap replicate with enough rows per class");
    const Matrix Xb = X.select_rows(sample);
    std::vector<double> yb(n);
    for (std::size_t i = 0; i < n; ++i) yb[i] = y[sample[i]];
    const auto r = cross_validate(Xb, yb, task, options.k, derive_seed(seed, {kBootStream, b, 1}), options.forest,
                                  sample);
    report.bootstrap_scores.push_back(r.mean());
    report.degenerate_folds += r.degenerate_folds;
  }

  std::vector<std::size_t> perm(n);
  for (std::size_t b = 0; b < options.bootstrap; ++b) {
    Rng rng(derive_seed(seed, {kShuffleStream, b}));
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm.begin(), perm.end());
    const Matrix Xs = X.select_rows(perm);
    const auto r = cross_validate(Xs, y, task, options.k, derive_seed(seed, {kShuffleStream, b, 1}), options.forest);
    report.shuffled_scores.push_back(r.mean());
    report.degenerate_folds += r.degenerate_folds;
  }

  if (options.bootstrap > 0) {
    report.mean_difference = mean(report.bootstrap_scores) - mean(report.shuffled_scores);
    report.shuffled_p95 = quantile(report.shuffled_scores, 0.95);
    const auto above = std::count_if(report.bootstrap_scores.begin(), report.bootstrap_scores.end(),
                                     [&](double s) { return s > report.shuffled_p95; });
    report.separation_fraction = static_cast<double>(above) / static_cast<double>(options.bootstrap);
  }
  return report;
}

nlohmann::json to_json(const EvalReport& r) {
  return nlohmann::json{{"metric", r.metric()},
                        {"task", to_string(r.task)},
                        {"k", r.k},
                        {"bootstrap", r.bootstrap},
                        {"cv_scores", r.cv_scores},
                        {"bootstrap_scores", r.bootstrap_scores},
                        {"shuffled_scores", r.shuffled_scores},
                        {"mean_difference", r.mean_difference},
                        {"shuffled_p95", r.shuffled_p95},
                        {"separation_fraction", r.separation_fraction},
                        {"degenerate_folds", r.degenerate_folds}};
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.task = j.at("task").get<std::string>() == "classification" ? Task::Classification : Task::Regression;
  r.k = j.at("k").get<std::size_t>();
  r.bootstrap = j.at("bootstrap").get<std::size_t>();
  r.cv_scores = j.at("cv_scores").get<std::vector<double>>();
  r.bootstrap_scores = j.at("bootstrap_scores").get<std::vector<double>>();
  r.shuffled_scores = j.at("shuffled_scores").get<std::vector<double>>();
  r.mean_difference = j.at("mean_difference").get<double>();
  r.shuffled_p95 = j.at("shuffled_p95").get<double>();
  r.separation_fraction = j.at("separation_fraction").get<double>();
  r.degenerate_folds = j.value("degenerate_folds", std::size_t{0});
  return r;
}

}  // namespace ideation::learner
