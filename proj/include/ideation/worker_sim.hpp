#pragma once

// Synthetic crowd. A problem's latent model (template, input marginals, link,
// Likert profile) is a function of (seed, proposer id); its importance quality
// is a function of (seed, problem id). Every answer is a pure function of its
// inputs, so a simulated run is reproducible from the event log alone.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ideation/model.hpp"
#include "ideation/orchestrator.hpp"

namespace ideation::sim {

enum class Link { Linear, Threshold, Xor, IndependentNoise, UnitsAmbiguity };

std::string_view to_string(Link l);
Link link_from_string(std::string_view s);

struct ProposalTemplate {
  std::string name;
  Link link = Link::Linear;
  AnswerType target = AnswerType::Numeric;
  std::vector<AnswerType> inputs;
  double noise = 0.5;   // in [0, 1]
  double weight = 1.0;  // relative selection frequency
};

enum class QualityMode { LogUniform, LogSpaced };

struct PopulationConfig {
  std::vector<ProposalTemplate> templates;
  QualityMode quality_mode = QualityMode::LogUniform;
  double quality_spread = 10.0;    // w ranges over [1, spread]
  std::size_t quality_count = 50;  // problems sharing the log-spaced grid
  double positive_share = 0.8;     // chance a link coefficient is positive
  double likert_sd = 0.9;
  std::map<std::string, double> arm_numeric_share;  // trial arm -> share of numeric-target templates
  std::vector<std::string> categories = default_category_vocabulary();
  std::uint64_t seed = 0;
};

/// The default mix: xor, threshold, linear (both target types), independent
/// noise (both) and a units-ambiguity template, all with `p_inputs` inputs.
PopulationConfig default_population(std::size_t p_inputs = kDefaultInputCount, std::uint64_t seed = 0);

std::vector<FieldError> validate(const PopulationConfig& c);
void to_json(nlohmann::json& j, const PopulationConfig& c);
void from_json(const nlohmann::json& j, PopulationConfig& c);

struct InputModel {
  AnswerType type = AnswerType::Boolean;
  double p = 0.5;       // Boolean: P(true)
  double mean = 0.0;    // Numeric
  double sd = 1.0;
};

struct ProblemModel {
  std::size_t template_index = 0;
  Link link = Link::Linear;
  AnswerType target = AnswerType::Numeric;
  std::vector<InputModel> inputs;
  std::vector<double> beta;
  double threshold = 0.0;
  double noise = 0.0;
  double base_rate = 0.5;  // independent-noise Boolean targets
  double positive_rate = 0.5;  // P(y = true), estimated for Boolean targets
  std::array<double, 5> likert{};  // profile over 1..5
  std::size_t category = 0;
  int usefulness = 3;
};

using LikertProfile = std::array<double, 5>;

class Population {
 public:
  explicit Population(PopulationConfig config);

  const PopulationConfig& config() const noexcept { return config_; }

  /// Latent model of problems proposed by `proposer` (optionally under a trial arm).
  ProblemModel model_for(const WorkerId& proposer, const std::optional<std::string>& arm = {}) const;
  /// Importance quality of a problem id (ids start at 1).
  double quality(ProblemId id) const;

  Proposal propose(const WorkerId& worker, std::size_t p_inputs, const std::optional<std::string>& arm = {}) const;
  /// Winner of a comparison; see btl_winner.
  ProblemId compare(ProblemId i, ProblemId j, double draw) const;
  int likert(const Problem& problem, double draw) const;
  DataAnswers answer(const Problem& problem, const WorkerId& worker) const;
  CategorizationRecord categorize(const Problem& problem, const WorkerId& worker, std::uint64_t salt) const;

  /// Response for an assignment; all draws derive from (seed, assignment id).
  Response respond(const pipeline::PipelineState& state, const pipeline::TaskAssignment& a) const;

 private:
  PopulationConfig config_;
  std::vector<double> spaced_;  // log-spaced qualities in a seeded order
};

/// Returns j when draw < w_j / (w_i + w_j), else i. draw lies in [0, 1).
ProblemId btl_winner(ProblemId i, double wi, ProblemId j, double wj, double draw);

/// Inverse-CDF draw from a profile over 1..5.
int likert_draw(const LikertProfile& profile, double draw);

struct DriverOptions {
  std::size_t window = 30;            // recent workers that are offered tasks in rotation
  std::size_t max_steps = 10'000'000;
  std::optional<pipeline::Phase> stop_at;  // stop once this phase is reached
};

struct DriveResult {
  std::size_t steps = 0;
  bool finished = false;  // reached Done (or stop_at)
  bool stalled = false;   // no worker could be given a task
};

/// Advances the run by at most one task: answers the lowest open assignment
/// if any, else offers a task to recent workers, else registers a new worker.
/// The choice depends only on the orchestrator state. Returns false when the
/// run cannot progress.
bool step(pipeline::Orchestrator& orchestrator, const Population& population, std::size_t window = 30);

DriveResult drive(pipeline::Orchestrator& orchestrator, const Population& population, const DriverOptions& options = {});

std::string sim_worker_name(std::size_t index);

}  // namespace ideation::sim
