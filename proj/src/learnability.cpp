#include "ideation/learnability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ideation::learnability {

void LearnabilityTally::add(const WorkerId& worker, ProblemId problem, int value) {
  if (value < 1 || value > 5) throw ValidationError("value", "Likert value must be in 1..5");
  if (!seen_.insert({worker, problem}).second) {
    throw ValidationError("worker", worker + " already rated problem " + std::to_string(problem));
  }
  responses_[problem].push_back(value);
}

std::size_t LearnabilityTally::response_count(ProblemId problem) const {
  auto it = responses_.find(problem);
  return it == responses_.end() ? 0 : it->second.size();
}

const std::vector<int>& LearnabilityTally::responses(ProblemId problem) const {
  static const std::vector<int> empty;
  auto it = responses_.find(problem);
  return it == responses_.end() ? empty : it->second;
}

std::vector<ProblemId> LearnabilityTally::problems() const {
  std::vector<ProblemId> out;
  for (const auto& [id, _] : responses_) out.push_back(id);
  return out;
}

double learnability_score(const LearnabilityTally& tally, ProblemId problem) {
  const auto& r = tally.responses(problem);
  if (r.empty()) throw StateError("problem " + std::to_string(problem) + " has no learnability responses");
  // Integer sum keeps equal means bit-identical, so ties compare exactly.
  const long sum = std::accumulate(r.begin(), r.end(), 0L);
  return std::abs(3.0 - static_cast<double>(sum) / static_cast<double>(r.size()));
}

std::map<ProblemId, double> learnability_scores(const LearnabilityTally& tally, std::size_t min_responses) {
  std::map<ProblemId, double> out;
  for (auto id : tally.problems()) {
    const auto n = tally.response_count(id);
    if (n >= std::max<std::size_t>(min_responses, 1)) out[id] = learnability_score(tally, id);
  }
  return out;
}

std::vector<ProblemId> rank_learnable(const LearnabilityTally& tally, std::size_t min_responses) {
  const auto scores = learnability_scores(tally, min_responses);
  std::vector<ProblemId> ids;
  for (const auto& [id, _] : scores) ids.push_back(id);
  std::stable_sort(ids.begin(), ids.end(), [&](ProblemId a, ProblemId b) { return scores.at(a) < scores.at(b); });
  return ids;
}

std::vector<ProblemId> top_k_learnable(const LearnabilityTally& tally, std::size_t k, std::size_t min_responses) {
  auto ids = rank_learnable(tally, min_responses);
  if (k > ids.size()) {
    throw ValidationError("K", "requested " + std::to_string(k) + " problems but only " + std::to_string(ids.size()) +
                                   " candidates are scored");
  }
  ids.resize(k);
  return ids;
}

nlohmann::json scores_to_json(const std::map<ProblemId, double>& scores) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, s] : scores) j[std::to_string(id)] = s;
  return j;
}

}  // namespace ideation::learnability
