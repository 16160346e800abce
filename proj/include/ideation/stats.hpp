#pragma once

// Correlation, interval and hypothesis-test kernels plus the summaries built
// on them: redundancy checks, positivity bias, categorization roll-ups and the
// two-arm comparison battery.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ideation/learner.hpp"
#include "ideation/model.hpp"

namespace ideation::stats {

struct TestResult {
  std::string name;                 // mann_whitney | chi_square | fisher_exact
  std::optional<double> statistic;  // absent for Fisher
  double p_value = 1.0;
  nlohmann::json detail = nlohmann::json::object();
  bool computable = true;

  bool significant(double alpha = 0.05) const { return computable && p_value < alpha; }
};

/// Product-moment correlation. Throws ValidationError on unequal lengths,
/// fewer than 2 points, or a constant argument.
double pearson(std::span<const double> x, std::span<const double> y);

struct CorrelationReport {
  ProblemId problem = 0;
  std::vector<double> r;           // per predictor; 0 for constant columns
  std::vector<bool> constant;
  double max_corr = 0.0;           // max_i r_i
  double max_r2 = 0.0;             // max_i r_i^2
  double train_score = 0.0;
  double cv_score = 0.0;
  bool redundant = false;          // max_r2 >= 0.95
  bool outperforms_single = false; // both model scores exceed max_r2
  bool target_constant = false;
};

CorrelationReport redundancy_report(const Dataset& dataset, const learner::EvalReport& eval,
                                    const learner::Forest& forest);

struct BiasEstimate {
  std::size_t n = 0;
  std::size_t bootstrap = 0;
  double mean = 0.0;
  double mean_lower = 0.0;
  double mean_upper = 0.0;
  double median = 0.0;
  double median_lower = 0.0;
  double median_upper = 0.0;
};

/// Percentile bootstrap (2.5%, 97.5%) for the mean and median. Resample b
/// draws n indices with Rng(derive_seed(seed, {kBiasStream, b})).below(n).
inline constexpr std::uint64_t kBiasStream = 0x62696173;
BiasEstimate positivity_bias(std::span<const double> correlations, std::size_t bootstrap, std::uint64_t seed);

/// Exact enumeration is used when n_a + n_b <= this.
inline constexpr std::size_t kExactMannWhitneyLimit = 12;

/// U = #{a_i > b_j} + 0.5 #{a_i = b_j}, two-sided p.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

using CountTable = std::vector<std::vector<long long>>;

/// Pearson chi-square test of independence. Throws ValidationError naming a
/// zero row or column margin.
TestResult chi_square_independence(const CountTable& table);

/// Two-sided Fisher exact test on [[a, b], [c, d]].
TestResult fisher_exact_2x2(const std::array<std::array<long long, 2>, 2>& table);

struct Interval {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Wilson score interval.
Interval proportion_ci(std::size_t successes, std::size_t n, double level = 0.95);

using Histogram = std::array<std::size_t, 5>;  // Likert 1..5

struct ProblemSummary {
  ProblemId problem = 0;
  std::size_t ratings = 0;
  std::string majority_category;  // empty when unrated
  std::map<std::string, std::size_t> category_counts;
  Histogram importance{};
  Histogram inputs_useful{};
  Histogram diversity{};
  std::vector<double> objective_by_question;
  std::vector<double> answerable_by_question;
  double objective = 0.0;
  double answerable = 0.0;
};

struct CategoryRollup {
  std::string category;
  std::size_t problems = 0;
  Histogram inputs_useful{};
  double objective = 0.0;  // share of question ratings marked objective
};

struct CategorizationSummary {
  std::vector<ProblemSummary> problems;
  std::vector<CategoryRollup> categories;  // vocabulary order
};

/// Majority ties resolve by vocabulary order. Throws ValidationError for a
/// rating of an unknown problem.
CategorizationSummary categorization_summary(std::span<const CategorizationRecord> ratings,
                                             std::span<const Problem> problems,
                                             std::span<const std::string> vocabulary);

struct ProblemCharacteristics {
  std::size_t questions = 0;
  std::size_t boolean_questions = 0;
  Interval boolean_share;
  std::size_t boolean_targets = 0;
  std::size_t numeric_targets = 0;
  double boolean_inputs_mean_bool_target = 0.0;
  double boolean_inputs_median_bool_target = 0.0;
  double boolean_inputs_mean_num_target = 0.0;
  double boolean_inputs_median_num_target = 0.0;
  /// MWU of Boolean-input counts, Boolean-target problems first.
  std::optional<TestResult> association;
};

ProblemCharacteristics problem_characteristics(std::span<const Problem> problems);

struct ArmData {
  std::string label;
  std::vector<Problem> problems;
  std::vector<CategorizationRecord> ratings;
};

struct ArmMeans {
  std::string label;
  double importance = 0.0;
  double inputs_useful = 0.0;
  double answerable = 0.0;
  double objective = 0.0;
  double numeric = 0.0;
};

struct RctRow {
  std::string difference;  // categories | importance | inputs_useful | answerable | objective | numeric
  TestResult test;
};

struct RctComparison {
  ArmMeans baseline;
  ArmMeans treatment;
  std::vector<RctRow> rows;  // always six
};

ArmMeans arm_means(const ArmData& arm);

/// Chi-square for categories and the two Likert ratings (2 x levels, unused
/// levels dropped), Fisher for answerable, objective and numeric. A test whose
/// table degenerates is returned with computable = false.
RctComparison rct_compare(const ArmData& baseline, const ArmData& treatment,
                          std::span<const std::string> vocabulary);

nlohmann::json to_json(const TestResult& t);
nlohmann::json to_json(const CorrelationReport& r);
nlohmann::json to_json(const BiasEstimate& b);
nlohmann::json to_json(const Interval& i);
nlohmann::json to_json(const CategorizationSummary& s);
nlohmann::json to_json(const ProblemCharacteristics& c);
nlohmann::json to_json(const ArmMeans& m);
nlohmann::json to_json(const RctComparison& r);

}  // namespace ideation::stats
