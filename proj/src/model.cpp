#include "ideation/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace ideation {

using nlohmann::json;

std::vector<double> Matrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

void Matrix::push_row(std::span<const double> values) {
  if (rows_ == 0 && data_.empty()) cols_ = values.size();
  if (values.size() != cols_) throw Error("row width " + std::to_string(values.size()) +
                                          " does not match matrix width " + std::to_string(cols_));
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

Matrix Matrix::select_rows(std::span<const std::size_t> rows) const {
  Matrix out(rows.size(), cols_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

const std::vector<std::string>& default_category_vocabulary() {
  static const std::vector<std::string> vocab = {
      "demographic/personal", "politics/current events", "health/wellness", "factual", "other/unsure"};
  return vocab;
}

std::string_view to_string(AnswerType t) { return t == AnswerType::Numeric ? "numeric" : "boolean"; }
std::string_view to_string(Task t) { return t == Task::Regression ? "regression" : "classification"; }

std::string_view payload_kind(const Payload& p) {
  static constexpr std::string_view kinds[] = {"proposal", "comparison", "categorization", "learnability",
                                               "data"};
  return kinds[p.index()];
}

double encode_answer(const Question& q, const AnswerValue& a) {
  if (answer_type_of(a) != q.answer_type) {
    throw ValidationError("answer", "expected " + std::string(to_string(q.answer_type)) +
                                        " answer for question '" + q.text + "'");
  }
  if (const bool* b = std::get_if<bool>(&a)) return *b ? 1.0 : 0.0;
  return std::get<double>(a);
}

AnswerValue decode_answer(const Question& q, double value) {
  if (q.answer_type == AnswerType::Numeric) return value;
  if (value != 0.0 && value != 1.0) {
    throw ValidationError("answer", "boolean encoding must be 0 or 1");
  }
  return value == 1.0;
}

std::vector<FieldError> validate_question(const Question& q, const std::string& field) {
  std::vector<FieldError> errs;
  if (q.text.empty()) {
    errs.push_back({field + ".text", "must be nonempty"});
  } else if (q.text.back() != '?') {
    errs.push_back({field + ".text", "must end with '?'"});
  }
  if (q.unit_hint && q.answer_type != AnswerType::Numeric) {
    errs.push_back({field + ".unit_hint", "only numeric questions carry units"});
  }
  return errs;
}

std::vector<FieldError> validate_problem(const Problem& problem, std::size_t p_inputs) {
  auto errs = validate_question(problem.target, "target");
  if (problem.inputs.size() != p_inputs) {
    errs.push_back({"inputs", "expected " + std::to_string(p_inputs) + " input questions, got " +
                                  std::to_string(problem.inputs.size())});
  }
  for (std::size_t i = 0; i < problem.inputs.size(); ++i) {
    auto e = validate_question(problem.inputs[i], "inputs[" + std::to_string(i) + "]");
    errs.insert(errs.end(), e.begin(), e.end());
  }
  return errs;
}

std::vector<FieldError> validate_answers(const Problem& problem, std::span<const AnswerValue> answers,
                                         const std::string& field) {
  std::vector<FieldError> errs;
  if (answers.size() != problem.question_count()) {
    errs.push_back({field, "expected " + std::to_string(problem.question_count()) + " answers, got " +
                               std::to_string(answers.size())});
    return errs;
  }
  for (std::size_t k = 0; k < answers.size(); ++k) {
    const auto& q = problem.question(k);
    const std::string f = field + "[" + std::to_string(k) + "]";
    if (answer_type_of(answers[k]) != q.answer_type) {
      errs.push_back({f, "expected " + std::string(to_string(q.answer_type))});
    } else if (const double* v = std::get_if<double>(&answers[k]); v && !std::isfinite(*v)) {
      errs.push_back({f, "numeric answer must be finite"});
    }
  }
  return errs;
}

namespace {

void check_likert(int v, const std::string& field, std::vector<FieldError>& errs) {
  if (v < 1 || v > 5) errs.push_back({field, "Likert value must be in 1..5"});
}

}  // namespace

std::vector<FieldError> validate_categorization(const CategorizationRecord& record, const Problem& problem,
                                                std::span<const std::string> vocabulary,
                                                const std::string& field) {
  std::vector<FieldError> errs;
  if (record.problem != problem.id) errs.push_back({field + ".problem_id", "does not match the task"});
  if (std::find(vocabulary.begin(), vocabulary.end(), record.category) == vocabulary.end()) {
    errs.push_back({field + ".category", "'" + record.category + "' is not in the vocabulary"});
  }
  check_likert(record.importance, field + ".importance", errs);
  check_likert(record.inputs_useful, field + ".inputs_useful", errs);
  const auto n = problem.question_count();
  if (record.objective_flags.size() != n) {
    errs.push_back({field + ".objective_flags", "expected " + std::to_string(n) + " flags"});
  }
  if (record.answerable_flags.size() != n) {
    errs.push_back({field + ".answerable_flags", "expected " + std::to_string(n) + " flags"});
  }
  if (record.diversity) {
    if (problem.target.answer_type != AnswerType::Boolean) {
      errs.push_back({field + ".diversity", "only rated for Boolean targets"});
    } else {
      check_likert(*record.diversity, field + ".diversity", errs);
    }
  }
  return errs;
}

AssembledDataset assemble_dataset(const Problem& problem, std::span<const Response> responses,
                                  std::size_t max_rows) {
  AssembledDataset out;
  auto& ds = out.dataset;
  ds.problem_id = problem.id;
  ds.task = problem.target.answer_type == AnswerType::Boolean ? Task::Classification : Task::Regression;
  ds.X = Matrix(0, problem.inputs.size());

  std::set<WorkerId> seen;
  std::vector<double> row(problem.inputs.size());
  for (std::size_t r = 0; r < responses.size(); ++r) {
    const auto& resp = responses[r];
    const std::string tag = "response " + std::to_string(r) + " (worker " + resp.worker + ")";
    const auto* data = std::get_if<DataAnswers>(&resp.payload);
    if (data == nullptr || data->problem != problem.id) {
      out.skipped.push_back(tag + ": not a data response for problem " + std::to_string(problem.id));
      continue;
    }
    if (seen.count(resp.worker) != 0) {
      out.skipped.push_back(tag + ": repeat response from the same worker");
      continue;
    }
    if (auto errs = validate_answers(problem, data->answers, "answers"); !errs.empty()) {
      out.skipped.push_back(tag + ": " + errs.front().field + " " + errs.front().reason);
      continue;
    }
    if (ds.size() >= max_rows) {
      out.skipped.push_back(tag + ": dataset already holds " + std::to_string(max_rows) + " rows");
      continue;
    }
    seen.insert(resp.worker);
    for (std::size_t j = 0; j < problem.inputs.size(); ++j) {
      row[j] = encode_answer(problem.inputs[j], data->answers[j + 1]);
    }
    ds.X.push_row(row);
    ds.y.push_back(encode_answer(problem.target, data->answers[0]));
    ds.row_workers.push_back(resp.worker);
  }
  if (ds.size() == 0) {
    throw StateError("no valid data responses for problem " + std::to_string(problem.id));
  }
  return out;
}

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

double parse_number(std::string_view s, std::size_t line) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ValidationError("csv", "line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string dataset_to_csv(const Dataset& dataset) {
  std::string out;
  const auto p = dataset.X.cols();
  for (std::size_t j = 0; j < p; ++j) out += "x" + std::to_string(j + 1) + ",";
  out += "y\n";
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    for (std::size_t j = 0; j < p; ++j) {
      append_number(out, dataset.X(r, j));
      out += ',';
    }
    append_number(out, dataset.y[r]);
    out += '\n';
  }
  return out;
}

Dataset dataset_from_csv(std::string_view csv, ProblemId problem_id, Task task) {
  Dataset ds;
  ds.problem_id = problem_id;
  ds.task = task;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::vector<double> row;
  for (auto line : split(csv, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (line_no == 1) {
      if (cells.empty() || cells.back() != "y") throw ValidationError("csv", "header must end with 'y'");
      width = cells.size();
      for (std::size_t j = 0; j + 1 < width; ++j) {
        if (cells[j] != "x" + std::to_string(j + 1)) throw ValidationError("csv", "bad header column");
      }
      ds.X = Matrix(0, width - 1);
      continue;
    }
    if (cells.size() != width) {
      throw ValidationError("csv", "line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                                       " cells");
    }
    row.clear();
    for (std::size_t j = 0; j + 1 < width; ++j) row.push_back(parse_number(cells[j], line_no));
    ds.X.push_row(row);
    ds.y.push_back(parse_number(cells.back(), line_no));
  }
  if (width == 0) throw ValidationError("csv", "missing header");
  return ds;
}

// ---------------------------------------------------------------------------
// JSON

json answer_to_json(const AnswerValue& a) {
  if (const bool* b = std::get_if<bool>(&a)) return *b;
  return std::get<double>(a);
}

AnswerValue answer_from_json(const json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number()) return j.get<double>();
  throw ValidationError("answer", "must be a number or a boolean");
}

namespace {

json answers_to_json(const std::vector<AnswerValue>& answers) {
  json arr = json::array();
  for (const auto& a : answers) arr.push_back(answer_to_json(a));
  return arr;
}

std::vector<AnswerValue> answers_from_json(const json& j) {
  std::vector<AnswerValue> out;
  for (const auto& v : j) out.push_back(answer_from_json(v));
  return out;
}

AnswerType answer_type_from(const std::string& s) {
  if (s == "numeric") return AnswerType::Numeric;
  if (s == "boolean") return AnswerType::Boolean;
  throw ValidationError("answer_type", "must be 'numeric' or 'boolean'");
}

}  // namespace

void to_json(json& j, const Question& q) {
  j = json{{"text", q.text}, {"answer_type", to_string(q.answer_type)}};
  if (q.unit_hint) j["unit_hint"] = *q.unit_hint;
}

void from_json(const json& j, Question& q) {
  q.text = j.at("text").get<std::string>();
  q.answer_type = answer_type_from(j.at("answer_type").get<std::string>());
  q.unit_hint.reset();
  if (auto it = j.find("unit_hint"); it != j.end() && !it->is_null()) q.unit_hint = it->get<std::string>();
}

void to_json(json& j, const Problem& p) {
  j = json{{"id", p.id}, {"target", p.target}, {"inputs", p.inputs}, {"proposer", p.proposer}};
  if (p.arm) j["arm"] = *p.arm;
}

void from_json(const json& j, Problem& p) {
  p.id = j.value("id", ProblemId{0});
  p.target = j.at("target").get<Question>();
  p.inputs = j.at("inputs").get<std::vector<Question>>();
  p.proposer = j.value("proposer", std::string{});
  p.arm.reset();
  if (auto it = j.find("arm"); it != j.end() && !it->is_null()) p.arm = it->get<std::string>();
}

void to_json(json& j, const CategorizationRecord& r) {
  j = json{{"problem_id", r.problem},
           {"category", r.category},
           {"importance", r.importance},
           {"inputs_useful", r.inputs_useful},
           {"objective_flags", r.objective_flags},
           {"answerable_flags", r.answerable_flags}};
  if (r.diversity) j["diversity"] = *r.diversity;
}

void from_json(const json& j, CategorizationRecord& r) {
  r.problem = j.at("problem_id").get<ProblemId>();
  r.category = j.at("category").get<std::string>();
  r.importance = j.at("importance").get<int>();
  r.inputs_useful = j.at("inputs_useful").get<int>();
  r.objective_flags = j.at("objective_flags").get<std::vector<bool>>();
  r.answerable_flags = j.at("answerable_flags").get<std::vector<bool>>();
  r.diversity.reset();
  if (auto it = j.find("diversity"); it != j.end() && !it->is_null()) r.diversity = it->get<int>();
}

void to_json(json& j, const Payload& p) {
  std::visit(
      [&j](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Proposal>) {
          j = json{{"problem", v.problem}, {"self_answers", answers_to_json(v.self_answers)}};
        } else if constexpr (std::is_same_v<T, ComparisonJudgment>) {
          j = json{{"pair", {v.first, v.second}}, {"winner", v.winner}, {"categorizations", v.categorizations}};
        } else if constexpr (std::is_same_v<T, CategorizationRecord>) {
          j = json{{"record", v}};
        } else if constexpr (std::is_same_v<T, LearnabilityRating>) {
          j = json{{"problem_id", v.problem}, {"value", v.value}};
        } else {
          j = json{{"problem_id", v.problem}, {"answers", answers_to_json(v.answers)}};
        }
      },
      p);
  j["kind"] = payload_kind(p);
}

void from_json(const json& j, Payload& p) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "proposal") {
    Proposal v;
    v.problem = j.at("problem").get<Problem>();
    v.self_answers = answers_from_json(j.at("self_answers"));
    p = std::move(v);
  } else if (kind == "comparison") {
    ComparisonJudgment v;
    const auto& pair = j.at("pair");
    if (!pair.is_array() || pair.size() != 2) throw ValidationError("pair", "must list exactly two ids");
    v.first = pair[0].get<ProblemId>();
    v.second = pair[1].get<ProblemId>();
    v.winner = j.at("winner").get<ProblemId>();
    if (auto it = j.find("categorizations"); it != j.end()) {
      v.categorizations = it->get<std::vector<CategorizationRecord>>();
    }
    p = std::move(v);
  } else if (kind == "categorization") {
    p = j.at("record").get<CategorizationRecord>();
  } else if (kind == "learnability") {
    p = LearnabilityRating{j.at("problem_id").get<ProblemId>(), j.at("value").get<int>()};
  } else if (kind == "data") {
    p = DataAnswers{j.at("problem_id").get<ProblemId>(), answers_from_json(j.at("answers"))};
  } else {
    throw ValidationError("kind", "unknown payload kind '" + kind + "'");
  }
}

void to_json(json& j, const Response& r) {
  j = json{{"worker", r.worker}, {"timestamp", r.timestamp}, {"payload", r.payload}};
}

void from_json(const json& j, Response& r) {
  r.worker = j.at("worker").get<std::string>();
  r.timestamp = j.value("timestamp", std::uint64_t{0});
  r.payload = j.at("payload").get<Payload>();
}

}  // namespace ideation
