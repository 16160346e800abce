#pragma once

// Analysis bundle over a pipeline state: per-dataset model evaluation and
// redundancy checks, question statistics, categorization roll-ups and the
// trial-arm battery.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ideation/learner.hpp"
#include "ideation/orchestrator.hpp"
#include "ideation/stats.hpp"

namespace ideation::report {

struct ReportOptions {
  std::size_t k = 5;
  std::size_t bootstrap = 100;
  std::size_t n_trees = 200;
  std::size_t bias_bootstrap = 1000;
  std::uint64_t seed = 0;
  bool train = true;  // false skips the learner section
};

struct DatasetEvaluation {
  ProblemId problem = 0;
  Task task = Task::Regression;
  std::size_t rows = 0;
  std::optional<learner::EvalReport> eval;
  std::optional<stats::CorrelationReport> correlation;
  std::string error;  // set when the dataset cannot be evaluated
};

/// Cross-validation, bootstrap and shuffled baseline plus the correlation
/// report. Errors (too few rows per class, say) are captured, not thrown.
DatasetEvaluation evaluate_dataset(const Dataset& dataset, const ReportOptions& options);

nlohmann::json to_json(const DatasetEvaluation& e);

/// Every categorization in the state, from stand-alone tasks and from the
/// surveys attached to comparisons.
std::vector<CategorizationRecord> collect_ratings(const pipeline::PipelineState& state);

/// All problems and ratings of a state as one arm.
stats::ArmData arm_from_state(const pipeline::PipelineState& state, std::string label);

/// One arm per configured trial arm, in configuration order.
std::vector<stats::ArmData> arms_by_tag(const pipeline::PipelineState& state);

struct RctBattery {
  std::vector<stats::ArmMeans> means;          // one per arm
  std::vector<stats::RctComparison> comparisons;  // first arm against each other arm
};

/// Throws ValidationError with fewer than two arms or an empty arm.
RctBattery rct_battery(const std::vector<stats::ArmData>& arms, std::span<const std::string> vocabulary);

nlohmann::json to_json(const RctBattery& b);
/// Per-arm means, one line per arm.
std::string arm_means_csv(const RctBattery& b);
/// Test table, one line per (treatment, difference).
std::string battery_csv(const RctBattery& b);

nlohmann::json build_report(const pipeline::PipelineState& state, const ReportOptions& options);

/// Ledger in dollars, keyed by reward type.
nlohmann::json ledger_json(const pipeline::PipelineState& state);

/// Stationary scores, importance order and learnability scores. Throws
/// StateError before the ranking phase has closed.
nlohmann::json rankings_json(const pipeline::PipelineState& state);

/// Rankings computed from the current tallies, also mid-ranking. Throws
/// IncompleteTallyError when an edge has no comparisons yet.
nlohmann::json provisional_rankings_json(const pipeline::PipelineState& state);

}  // namespace ideation::report
