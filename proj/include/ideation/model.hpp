#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ideation/error.hpp"

namespace ideation {

using ProblemId = std::uint32_t;
using WorkerId = std::string;

enum class AnswerType { Numeric, Boolean };

struct Question {
  std::string text;
  AnswerType answer_type = AnswerType::Boolean;
  std::optional<std::string> unit_hint;

  bool operator==(const Question&) const = default;
};

/// One target question plus the ordered input questions. The proposer answers
/// all of them when submitting.
struct Problem {
  ProblemId id = 0;
  Question target;
  std::vector<Question> inputs;
  WorkerId proposer;
  std::optional<std::string> arm;

  std::size_t question_count() const { return 1 + inputs.size(); }
  /// Question at position `k` in answer order: 0 is the target, 1..p the inputs.
  const Question& question(std::size_t k) const { return k == 0 ? target : inputs.at(k - 1); }

  bool operator==(const Problem&) const = default;
};

using AnswerValue = std::variant<double, bool>;

inline AnswerType answer_type_of(const AnswerValue& a) {
  return std::holds_alternative<bool>(a) ? AnswerType::Boolean : AnswerType::Numeric;
}

/// Survey answers a worker gives about one problem. Flag vectors are in answer
/// order (target first) and have length 1 + p_inputs.
struct CategorizationRecord {
  ProblemId problem = 0;
  std::string category;
  int importance = 3;
  int inputs_useful = 3;
  std::vector<bool> objective_flags;
  std::vector<bool> answerable_flags;
  std::optional<int> diversity;  // Boolean targets only

  bool operator==(const CategorizationRecord&) const = default;
};

struct Proposal {
  Problem problem;
  std::vector<AnswerValue> self_answers;  // answer order, target first

  bool operator==(const Proposal&) const = default;
};

struct ComparisonJudgment {
  ProblemId first = 0;
  ProblemId second = 0;
  ProblemId winner = 0;
  std::vector<CategorizationRecord> categorizations;

  bool operator==(const ComparisonJudgment&) const = default;
};

struct LearnabilityRating {
  ProblemId problem = 0;
  int value = 3;

  bool operator==(const LearnabilityRating&) const = default;
};

struct DataAnswers {
  ProblemId problem = 0;
  std::vector<AnswerValue> answers;  // answer order, target first

  bool operator==(const DataAnswers&) const = default;
};

using Payload =
    std::variant<Proposal, ComparisonJudgment, CategorizationRecord, LearnabilityRating, DataAnswers>;

struct Response {
  WorkerId worker;
  std::uint64_t timestamp = 0;
  Payload payload;

  bool operator==(const Response&) const = default;
};

enum class Task { Regression, Classification };

/// Dense row-major matrix of reals.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::vector<double> column(std::size_t c) const;

  /// Appends a row; the first row fixes the column count of an empty matrix.
  void push_row(std::span<const double> values);

  /// New matrix made of the given rows, in order (duplicates allowed).
  Matrix select_rows(std::span<const std::size_t> rows) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Dataset {
  ProblemId problem_id = 0;
  Matrix X;
  std::vector<double> y;
  Task task = Task::Regression;
  std::vector<WorkerId> row_workers;

  std::size_t size() const noexcept { return y.size(); }
};

struct AssembledDataset {
  Dataset dataset;
  std::vector<std::string> skipped;  // one reason per response that was dropped
};

inline constexpr std::size_t kDefaultInputCount = 4;

const std::vector<std::string>& default_category_vocabulary();

/// Boolean answers encode as 1/0; numeric answers pass through.
double encode_answer(const Question& q, const AnswerValue& a);
AnswerValue decode_answer(const Question& q, double value);

std::vector<FieldError> validate_question(const Question& q, const std::string& field);
std::vector<FieldError> validate_problem(const Problem& problem, std::size_t p_inputs);
std::vector<FieldError> validate_answers(const Problem& problem, std::span<const AnswerValue> answers,
                                         const std::string& field);
std::vector<FieldError> validate_categorization(const CategorizationRecord& record, const Problem& problem,
                                                std::span<const std::string> vocabulary,
                                                const std::string& field);

/// Builds X and y from data responses in arrival order. Responses for another
/// problem, malformed answers, and repeat workers are skipped and reported;
/// at most `max_rows` rows are kept. Throws StateError when no row survives.
AssembledDataset assemble_dataset(const Problem& problem, std::span<const Response> responses,
                                  std::size_t max_rows = std::numeric_limits<std::size_t>::max());

/// CSV with header `x1,...,xp,y`; values printed with round-trip precision.
std::string dataset_to_csv(const Dataset& dataset);
Dataset dataset_from_csv(std::string_view csv, ProblemId problem_id, Task task);

std::string_view to_string(AnswerType t);
std::string_view to_string(Task t);
std::string_view payload_kind(const Payload& p);

// JSON mappings (snake_case field names).
void to_json(nlohmann::json& j, const Question& q);
void from_json(const nlohmann::json& j, Question& q);
void to_json(nlohmann::json& j, const Problem& p);
void from_json(const nlohmann::json& j, Problem& p);
void to_json(nlohmann::json& j, const CategorizationRecord& r);
void from_json(const nlohmann::json& j, CategorizationRecord& r);
void to_json(nlohmann::json& j, const Payload& p);
void from_json(const nlohmann::json& j, Payload& p);
void to_json(nlohmann::json& j, const Response& r);
void from_json(const nlohmann::json& j, Response& r);
nlohmann::json answer_to_json(const AnswerValue& a);
AnswerValue answer_from_json(const nlohmann::json& j);

}  // namespace ideation
