#pragma once

// Phase state machine for a crowd ideation run. Every mutation is an Event;
// the state is a pure fold of the event sequence, so a log replays to the
// identical state.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ideation/comparison_ranking.hpp"
#include "ideation/learnability.hpp"
#include "ideation/model.hpp"

namespace ideation::pipeline {

enum class Phase { Proposal, Ranking, Collection, Done };
enum class TaskKind { Propose, CompareAndCategorize, RateLearnability, AnswerProblem, Categorize };

std::string_view to_string(Phase p);
std::string_view to_string(TaskKind k);
Phase phase_from_string(std::string_view s);
TaskKind task_kind_from_string(std::string_view s);

/// Ledger key for a task kind: propose | compare | learnability | data | categorize.
std::string_view reward_key(TaskKind k);

struct RctArm {
  std::string label;
  std::optional<std::string> example;

  bool operator==(const RctArm&) const = default;
};

struct PipelineConfig {
  std::size_t N = 50;
  std::size_t p_inputs = kDefaultInputCount;
  double c = 1.5;
  std::size_t L = 15;
  std::size_t K_importance = 10;
  std::size_t K_learnability = 5;
  std::size_t n_target = 200;
  std::size_t max_phase2_tasks_per_worker = 25;
  std::size_t learnability_per_problem = 15;  // dispatch target per Boolean problem
  std::size_t learnability_floor = 10;        // needed before ranking may close
  double attrition_floor = 0.9;               // share of L each edge needs before ranking may close
  std::size_t categorizations_per_problem = 5;  // trial mode only
  std::uint64_t expiry_ticks = 1800;
  std::map<std::string, long long> rewards_cents{
      {"propose", 300}, {"compare", 25}, {"learnability", 5}, {"data", 12}, {"categorize", 13}};
  std::vector<RctArm> rct_arms;  // nonempty switches on trial mode
  std::vector<std::string> categories = default_category_vocabulary();
  std::uint64_t seed = 0;
  bool auto_advance = true;

  bool rct() const noexcept { return !rct_arms.empty(); }
  bool operator==(const PipelineConfig&) const = default;
};

std::vector<FieldError> validate(const PipelineConfig& config);
void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

struct TaskAssignment {
  std::uint64_t id = 0;
  WorkerId worker;
  TaskKind kind = TaskKind::Propose;
  std::vector<ProblemId> problems;  // pair for comparisons, one id otherwise
  std::uint64_t issued_at = 0;
  std::uint64_t expires_at = 0;
  std::optional<std::string> arm;
  std::optional<std::string> example;

  bool operator==(const TaskAssignment&) const = default;
};

void to_json(nlohmann::json& j, const TaskAssignment& a);
void from_json(const nlohmann::json& j, TaskAssignment& a);

/// Per-worker reservations. Sets and counters include open assignments, so a
/// quota check never races with an unfinished task.
struct WorkerRecord {
  std::optional<std::string> arm;
  bool proposed = false;
  std::size_t ranking_tasks = 0;
  std::set<std::size_t> judged_edges;
  std::set<ProblemId> rated;
  std::set<ProblemId> answered;
  std::set<ProblemId> categorized;
  std::optional<std::uint64_t> open;

  bool operator==(const WorkerRecord&) const = default;
};

struct RecordedResponse {
  std::uint64_t assignment = 0;
  Response response;

  bool operator==(const RecordedResponse&) const = default;
};

struct LedgerLine {
  std::size_t count = 0;
  long long cents = 0;

  bool operator==(const LedgerLine&) const = default;
};

struct Selection {
  std::vector<ProblemId> importance;
  std::vector<ProblemId> learnability;
  std::vector<ProblemId> selected;
  std::vector<double> scores;  // stationary vector, node i is problem i + 1
  std::map<ProblemId, double> learnability_scores;

  bool operator==(const Selection&) const = default;
};

struct PipelineState {
  PipelineConfig config;
  Phase phase = Phase::Proposal;
  std::vector<Problem> problems;  // problems[i].id == i + 1
  std::vector<RecordedResponse> responses;
  std::map<WorkerId, WorkerRecord> workers;
  std::map<std::string, WorkerId> sessions;
  std::map<std::uint64_t, TaskAssignment> open;
  std::uint64_t next_assignment = 1;
  std::uint64_t arms_assigned = 0;
  std::size_t open_proposals = 0;
  std::optional<ranking::ComparisonGraph> graph;
  std::optional<ranking::ComparisonTally> tally;
  std::vector<std::size_t> edge_load;         // trials + open, per edge
  std::map<ProblemId, std::size_t> learn_load;  // completed + open
  std::map<ProblemId, std::size_t> data_load;
  std::map<ProblemId, std::size_t> data_done;
  std::map<ProblemId, std::size_t> cat_load;
  std::map<ProblemId, std::size_t> cat_done;
  learnability::LearnabilityTally learnability;
  std::optional<Selection> selection;
  std::map<std::string, LedgerLine> ledger;
  std::size_t expired = 0;
  std::uint64_t last_seq = 0;

  const Problem& problem(ProblemId id) const;
  bool has_problem(ProblemId id) const noexcept { return id >= 1 && id <= problems.size(); }
  std::vector<ProblemId> boolean_problems() const;
};

nlohmann::json to_json(const PipelineState& s);
PipelineState state_from_json(const nlohmann::json& j);

/// FNV-1a (64-bit) of the canonical JSON form of the state.
std::uint64_t state_hash(const PipelineState& s);
std::string hash_hex(std::uint64_t h);

struct Event {
  std::uint64_t seq = 0;
  std::string kind;
  nlohmann::json data;

  bool operator==(const Event&) const = default;
};

nlohmann::json to_json(const Event& e);
Event event_from_json(const nlohmann::json& j);

/// Applies one event. Throws Error when the event is inconsistent with the state.
void apply(PipelineState& state, const Event& event);

/// Whether the phase's closing criterion holds; `progress` describes what is
/// missing.
bool can_advance(const PipelineState& state, std::string* progress = nullptr);

nlohmann::json progress(const PipelineState& state);

std::map<std::string, LedgerLine> ledger_totals(const PipelineState& state);

/// Datasets for the selected problems in selection order (at most n_target rows).
std::vector<AssembledDataset> assemble_datasets(const PipelineState& state);

/// Linearizable front end: each public mutation runs under one mutex, emits
/// its events to the sink (persistence) and then applies them.
class Orchestrator {
 public:
  using Sink = std::function<void(const Event&)>;

  explicit Orchestrator(PipelineConfig config, Sink sink = {});

  /// Rebuilds from a complete log (first event pipeline_initialized). Throws
  /// ReplayError naming the first bad sequence number.
  static Orchestrator replay(const std::vector<Event>& events, Sink sink = {});
  /// Resumes from a snapshot state plus the events after it.
  static Orchestrator resume(PipelineState snapshot, const std::vector<Event>& tail, Sink sink = {});

  Orchestrator(Orchestrator&& other) noexcept;

  void register_worker(const WorkerId& worker);
  void open_session(const std::string& token, const WorkerId& worker);

  /// Current open assignment for the worker, else a new one, else nullopt.
  /// Assignments past expiry are reclaimed first. `now` is in ticks.
  std::optional<TaskAssignment> next_task(const WorkerId& worker, std::uint64_t now);

  /// Throws StaleAssignmentError, ValidationError (field-level) or StateError.
  void record_response(std::uint64_t assignment, const Response& response);

  void advance_phase();
  /// Emits an automatic phase advance that is due but missing, as after a
  /// crash between a response and the advance it triggered.
  void settle();
  std::string assign_arm(const WorkerId& worker);

  /// Unlocked view, for single-threaded callers.
  const PipelineState& state() const noexcept { return state_; }

  template <typename F>
  auto read(F&& f) const {
    std::lock_guard lock(mutex_);
    return f(state_);
  }

  std::vector<Event> events() const;
  std::uint64_t hash() const;

 private:
  Orchestrator() = default;
  void commit(std::string kind, nlohmann::json data);
  void expire_due(std::uint64_t now);
  void maybe_auto_advance();
  void advance_locked();
  std::string assign_arm_locked(const WorkerId& worker);
  std::optional<TaskAssignment> dispatch(const WorkerId& worker, std::uint64_t now);
  void check_payload(const TaskAssignment& a, const Response& r) const;

  mutable std::mutex mutex_;
  PipelineState state_;
  std::vector<Event> log_;
  Sink sink_;
};

}  // namespace ideation::pipeline
