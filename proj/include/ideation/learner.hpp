#pragma once

// Random forests for crowd-collected datasets, with (stratified) k-fold
// cross-validation, bootstrap score distributions and shuffled-input baselines.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ideation/model.hpp"
#include "ideation/rng.hpp"

namespace ideation::learner {

struct TreeOptions {
  std::size_t min_samples_split = 2;
  /// Features examined per split; defaults to ceil(sqrt(p)) for
  /// classification and p for regression.
  std::optional<std::size_t> max_features;
};

/// CART tree grown greedily on MSE (regression) or Gini impurity
/// (classification) until every leaf is pure or holds fewer than
/// min_samples_split rows.
class DecisionTree {
 public:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // rows with x[feature] <= threshold go left
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    double value = 0.0;         // leaf mean, or leaf majority class
    std::uint32_t samples = 0;
  };

  double predict(std::span<const double> x) const;

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  /// Class counts at node `i` (classification only).
  std::span<const double> class_counts(std::size_t i) const {
    return {counts_.data() + i * n_classes_, n_classes_};
  }
  std::size_t leaf_count() const;
  std::size_t depth() const;
  Task task() const noexcept { return task_; }
  std::size_t feature_count() const noexcept { return n_features_; }

  bool operator==(const DecisionTree&) const;

 private:
  friend class TreeBuilder;
  Task task_ = Task::Regression;
  std::size_t n_features_ = 0;
  std::size_t n_classes_ = 0;
  std::vector<Node> nodes_;
  std::vector<double> counts_;
};

/// Trains on the given rows of X (duplicates allowed, as in a bootstrap
/// sample). Throws ValidationError on empty or non-finite input.
DecisionTree train_tree(const Matrix& X, std::span<const double> y, Task task, Rng& rng,
                        const TreeOptions& options = {}, std::span<const std::size_t> rows = {});

struct ForestOptions {
  std::size_t n_trees = 200;
  TreeOptions tree;
};

class Forest {
 public:
  /// Regression: mean of tree outputs. Classification: majority vote over
  /// trees, ties to the lowest class label.
  double predict(std::span<const double> x) const;
  std::vector<double> predict(const Matrix& X) const;

  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  Task task() const noexcept { return task_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t feature_count() const noexcept { return n_features_; }

 private:
  friend Forest train_forest(const Matrix&, std::span<const double>, Task, std::uint64_t, const ForestOptions&);
  std::vector<DecisionTree> trees_;
  Task task_ = Task::Regression;
  std::uint64_t seed_ = 0;
  std::size_t n_features_ = 0;
  std::size_t n_classes_ = 0;
};

/// Each tree sees a bootstrap resample drawn from a stream derived from
/// (seed, tree index), so a fixed seed reproduces the forest exactly.
Forest train_forest(const Matrix& X, std::span<const double> y, Task task, std::uint64_t seed,
                    const ForestOptions& options = {});

/// Fraction of matching labels.
double accuracy(std::span<const double> y, std::span<const double> predicted);

/// Coefficient of determination; nullopt when y has zero variance.
std::optional<double> r_squared(std::span<const double> y, std::span<const double> predicted);

struct Score {
  double value = 0.0;
  bool degenerate = false;  // zero-variance regression target, scored 0
};

/// Accuracy for classification, R^2 for regression.
Score score(Task task, std::span<const double> y, std::span<const double> predicted);

std::string_view metric_name(Task task);

/// Fold id per item. Classification folds are stratified: each class is
/// shuffled and dealt round-robin, continuing where the previous class
/// stopped. Throws ValidationError naming a class with fewer than k members.
std::vector<std::size_t> assign_folds(std::span<const double> y, Task task, std::size_t k, Rng& rng);

struct CvResult {
  std::vector<double> scores;
  std::size_t degenerate_folds = 0;
  double mean() const;
};

/// k-fold cross-validation of a forest. `groups`, when given, maps each row
/// to a source row; rows sharing a source always land in the same fold.
CvResult cross_validate(const Matrix& X, std::span<const double> y, Task task, std::size_t k, std::uint64_t seed,
                        const ForestOptions& forest = {}, std::span<const std::size_t> groups = {});

struct EvalOptions {
  std::size_t k = 5;
  std::size_t bootstrap = 100;
  ForestOptions forest;
};

struct EvalReport {
  Task task = Task::Regression;
  std::size_t k = 0;
  std::size_t bootstrap = 0;
  std::vector<double> cv_scores;
  std::vector<double> bootstrap_scores;  // mean CV score per bootstrap replicate
  std::vector<double> shuffled_scores;   // mean CV score per row-permutation of X
  double mean_difference = 0.0;          // mean(bootstrap) - mean(shuffled)
  double shuffled_p95 = 0.0;
  double separation_fraction = 0.0;      // share of bootstrap scores above shuffled_p95
  std::size_t degenerate_folds = 0;

  std::string_view metric() const { return metric_name(task); }
};

/// Bootstrap replicate score distribution and shuffled-X baseline, each with B
/// entries. Replicates are cross-validated with folds grouped by source row.
EvalReport bootstrap_and_baseline(const Matrix& X, std::span<const double> y, Task task, std::uint64_t seed,
                                  const EvalOptions& options = {});

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

}  // namespace ideation::learner
