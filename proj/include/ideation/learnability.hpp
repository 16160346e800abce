#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ideation/model.hpp"

namespace ideation::learnability {

/// Likert answers (1..5) to "what share of people will answer true?", at most
/// one per (worker, problem).
class LearnabilityTally {
 public:
  void add(const WorkerId& worker, ProblemId problem, int value);

  /// Makes a problem a ranking candidate even before it has responses.
  void add_candidate(ProblemId problem) { responses_[problem]; }

  bool has_rated(const WorkerId& worker, ProblemId problem) const {
    return seen_.count({worker, problem}) != 0;
  }
  std::size_t response_count(ProblemId problem) const;
  const std::vector<int>& responses(ProblemId problem) const;
  std::vector<ProblemId> problems() const;

  bool operator==(const LearnabilityTally&) const = default;

 private:
  std::map<ProblemId, std::vector<int>> responses_;
  std::set<std::pair<WorkerId, ProblemId>> seen_;
};

/// |3 - mean response|, in [0, 2]; lower means a more even true/false split.
/// Throws StateError when the problem has no responses.
double learnability_score(const LearnabilityTally& tally, ProblemId problem);

/// Scores for every candidate with at least `min_responses` responses.
std::map<ProblemId, double> learnability_scores(const LearnabilityTally& tally, std::size_t min_responses = 1);

/// All scored candidates by ascending score, ties by ascending id.
std::vector<ProblemId> rank_learnable(const LearnabilityTally& tally, std::size_t min_responses = 1);

/// First K of rank_learnable. Throws ValidationError when K exceeds the
/// number of scored candidates.
std::vector<ProblemId> top_k_learnable(const LearnabilityTally& tally, std::size_t k, std::size_t min_responses = 1);

nlohmann::json scores_to_json(const std::map<ProblemId, double>& scores);

}  // namespace ideation::learnability
