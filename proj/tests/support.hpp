#pragma once

#include <string>
#include <vector>

#include "ideation/model.hpp"

namespace ideation::testing {

inline Question boolean_q(std::string text = "Do you own a bicycle?") { return {std::move(text), AnswerType::Boolean, {}}; }
inline Question numeric_q(std::string text = "How many hours do you sleep?") {
  return {std::move(text), AnswerType::Numeric, {}};
}

/// A problem with a target of the given type and `p` Boolean inputs.
inline Problem make_problem(ProblemId id, AnswerType target, std::size_t p = kDefaultInputCount,
                            WorkerId proposer = "proposer") {
  Problem pr;
  pr.id = id;
  pr.target = target == AnswerType::Boolean ? boolean_q("Are you happy?") : numeric_q("What is your income?");
  for (std::size_t i = 0; i < p; ++i) pr.inputs.push_back(boolean_q("Input " + std::to_string(i + 1) + "?"));
  pr.proposer = std::move(proposer);
  return pr;
}

inline Response data_response(const WorkerId& w, ProblemId id, std::vector<AnswerValue> answers) {
  return {w, 0, DataAnswers{id, std::move(answers)}};
}

inline CategorizationRecord rating(ProblemId id, std::string category, int importance, int useful,
                                   std::vector<bool> objective, std::vector<bool> answerable) {
  CategorizationRecord r;
  r.problem = id;
  r.category = std::move(category);
  r.importance = importance;
  r.inputs_useful = useful;
  r.objective_flags = std::move(objective);
  r.answerable_flags = std::move(answerable);
  return r;
}

}  // namespace ideation::testing
