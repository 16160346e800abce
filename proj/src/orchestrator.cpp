#include "ideation/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "ideation/rng.hpp"

namespace ideation::pipeline {

using nlohmann::json;

namespace {

constexpr std::uint64_t kGraphStream = 0x67726170;
constexpr std::uint64_t kArmStream = 0x61726d;

const char* const kPhaseNames[] = {"proposal", "ranking", "collection", "done"};
const char* const kKindNames[] = {"propose", "compare_and_categorize", "rate_learnability", "answer_problem",
                                  "categorize"};
const char* const kRewardKeys[] = {"propose", "compare", "learnability", "data", "categorize"};

std::size_t ceil_share(double share, std::size_t of) {
  return static_cast<std::size_t>(std::ceil(share * static_cast<double>(of) - 1e-9));
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

std::string_view to_string(Phase p) { return kPhaseNames[static_cast<int>(p)]; }
std::string_view to_string(TaskKind k) { return kKindNames[static_cast<int>(k)]; }
std::string_view reward_key(TaskKind k) { return kRewardKeys[static_cast<int>(k)]; }

Phase phase_from_string(std::string_view s) {
  for (int i = 0; i < 4; ++i) {
    if (s == kPhaseNames[i]) return static_cast<Phase>(i);
  }
  throw ValidationError("phase", "unknown phase '" + std::string(s) + "'");
}

TaskKind task_kind_from_string(std::string_view s) {
  for (int i = 0; i < 5; ++i) {
    if (s == kKindNames[i]) return static_cast<TaskKind>(i);
  }
  throw ValidationError("kind", "unknown task kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Config

std::vector<FieldError> validate(const PipelineConfig& c) {
  std::vector<FieldError> errs;
  auto positive = [&](std::size_t v, const char* name) {
    if (v == 0) errs.push_back({name, "must be positive"});
  };
  if (c.N < 2) errs.push_back({"N", "need at least 2 problems"});
  positive(c.p_inputs, "p_inputs");
  positive(c.L, "L");
  positive(c.K_importance, "K_importance");
  positive(c.K_learnability, "K_learnability");
  positive(c.n_target, "n_target");
  positive(c.max_phase2_tasks_per_worker, "max_phase2_tasks_per_worker");
  positive(c.learnability_per_problem, "learnability_per_problem");
  positive(c.learnability_floor, "learnability_floor");
  positive(c.categorizations_per_problem, "categorizations_per_problem");
  positive(c.expiry_ticks, "expiry_ticks");
  if (!(c.c > 1.0)) errs.push_back({"c", "oversampling constant must exceed 1"});
  if (c.K_importance + c.K_learnability > c.N) errs.push_back({"K_importance", "K_importance + K_learnability exceeds N"});
  if (c.learnability_floor > c.learnability_per_problem) {
    errs.push_back({"learnability_floor", "exceeds learnability_per_problem"});
  }
  if (!(c.attrition_floor > 0.0 && c.attrition_floor <= 1.0)) errs.push_back({"attrition_floor", "must lie in (0, 1]"});
  for (const auto* key : kRewardKeys) {
    auto it = c.rewards_cents.find(key);
    if (it == c.rewards_cents.end()) {
      errs.push_back({std::string("rewards.") + key, "missing"});
    } else if (it->second < 0) {
      errs.push_back({std::string("rewards.") + key, "must be nonnegative"});
    }
  }
  if (c.categories.empty()) errs.push_back({"categories", "vocabulary is empty"});
  std::set<std::string> labels;
  for (std::size_t i = 0; i < c.rct_arms.size(); ++i) {
    if (c.rct_arms[i].label.empty() || !labels.insert(c.rct_arms[i].label).second) {
      errs.push_back({"rct_arms[" + std::to_string(i) + "].label", "must be nonempty and unique"});
    }
  }
  return errs;
}

void to_json(json& j, const PipelineConfig& c) {
  json rewards = json::object();
  for (const auto& [k, cents] : c.rewards_cents) rewards[k] = static_cast<double>(cents) / 100.0;
  json arms = json::array();
  for (const auto& a : c.rct_arms) arms.push_back({{"label", a.label}, {"example", optional_json(a.example)}});
  j = json{{"N", c.N},
           {"p_inputs", c.p_inputs},
           {"c", c.c},
           {"L", c.L},
           {"K_importance", c.K_importance},
           {"K_learnability", c.K_learnability},
           {"n_target", c.n_target},
           {"max_phase2_tasks_per_worker", c.max_phase2_tasks_per_worker},
           {"learnability_per_problem", c.learnability_per_problem},
           {"learnability_floor", c.learnability_floor},
           {"attrition_floor", c.attrition_floor},
           {"categorizations_per_problem", c.categorizations_per_problem},
           {"expiry_ticks", c.expiry_ticks},
           {"rewards", rewards},
           {"rct_arms", arms},
           {"categories", c.categories},
           {"seed", c.seed},
           {"auto_advance", c.auto_advance}};
}

void from_json(const json& j, PipelineConfig& c) {
  if (!j.is_object()) throw ValidationError("config", "must be a JSON object");
  PipelineConfig d;
  auto num = [&](const char* key, std::size_t fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number_unsigned()) throw ValidationError(key, "must be a nonnegative integer");
    return it->get<std::size_t>();
  };
  c.N = num("N", d.N);
  c.p_inputs = num("p_inputs", d.p_inputs);
  c.c = j.value("c", d.c);
  c.L = num("L", d.L);
  c.K_importance = num("K_importance", d.K_importance);
  c.K_learnability = num("K_learnability", d.K_learnability);
  c.n_target = num("n_target", d.n_target);
  c.max_phase2_tasks_per_worker = num("max_phase2_tasks_per_worker", d.max_phase2_tasks_per_worker);
  c.learnability_per_problem = num("learnability_per_problem", d.learnability_per_problem);
  c.learnability_floor = num("learnability_floor", d.learnability_floor);
  c.attrition_floor = j.value("attrition_floor", d.attrition_floor);
  c.categorizations_per_problem = num("categorizations_per_problem", d.categorizations_per_problem);
  c.expiry_ticks = j.value("expiry_ticks", d.expiry_ticks);
  c.rewards_cents = d.rewards_cents;
  if (auto it = j.find("rewards"); it != j.end()) {
    for (const auto& [k, v] : it->items()) {
      if (!v.is_number()) throw ValidationError("rewards." + k, "must be a number");
      c.rewards_cents[k] = std::llround(v.get<double>() * 100.0);
    }
  }
  c.rct_arms.clear();
  if (auto it = j.find("rct_arms"); it != j.end()) {
    for (const auto& a : *it) c.rct_arms.push_back({a.at("label").get<std::string>(), optional_from<std::string>(a, "example")});
  }
  c.categories = j.value("categories", d.categories);
  c.seed = j.value("seed", d.seed);
  c.auto_advance = j.value("auto_advance", d.auto_advance);
}

void to_json(json& j, const TaskAssignment& a) {
  j = json{{"id", a.id},
           {"worker", a.worker},
           {"kind", to_string(a.kind)},
           {"problem_ids", a.problems},
           {"issued_at", a.issued_at},
           {"expires_at", a.expires_at},
           {"arm", optional_json(a.arm)},
           {"example", optional_json(a.example)}};
}

void from_json(const json& j, TaskAssignment& a) {
  a.id = j.at("id").get<std::uint64_t>();
  a.worker = j.at("worker").get<std::string>();
  a.kind = task_kind_from_string(j.at("kind").get<std::string>());
  a.problems = j.at("problem_ids").get<std::vector<ProblemId>>();
  a.issued_at = j.at("issued_at").get<std::uint64_t>();
  a.expires_at = j.at("expires_at").get<std::uint64_t>();
  a.arm = optional_from<std::string>(j, "arm");
  a.example = optional_from<std::string>(j, "example");
}

// ---------------------------------------------------------------------------
// State

const Problem& PipelineState::problem(ProblemId id) const {
  if (!has_problem(id)) throw NotFoundError("unknown problem " + std::to_string(id));
  return problems[id - 1];
}

std::vector<ProblemId> PipelineState::boolean_problems() const {
  std::vector<ProblemId> out;
  for (const auto& p : problems) {
    if (p.target.answer_type == AnswerType::Boolean) out.push_back(p.id);
  }
  return out;
}

namespace {

json worker_json(const WorkerRecord& w) {
  return {{"arm", optional_json(w.arm)},
          {"proposed", w.proposed},
          {"ranking_tasks", w.ranking_tasks},
          {"judged_edges", w.judged_edges},
          {"rated", w.rated},
          {"answered", w.answered},
          {"categorized", w.categorized},
          {"open", optional_json(w.open)}};
}

WorkerRecord worker_from_json(const json& j) {
  WorkerRecord w;
  w.arm = optional_from<std::string>(j, "arm");
  w.proposed = j.at("proposed").get<bool>();
  w.ranking_tasks = j.at("ranking_tasks").get<std::size_t>();
  w.judged_edges = j.at("judged_edges").get<std::set<std::size_t>>();
  w.rated = j.at("rated").get<std::set<ProblemId>>();
  w.answered = j.at("answered").get<std::set<ProblemId>>();
  w.categorized = j.at("categorized").get<std::set<ProblemId>>();
  w.open = optional_from<std::uint64_t>(j, "open");
  return w;
}

json selection_json(const Selection& s) {
  json ls = json::object();
  for (const auto& [id, v] : s.learnability_scores) ls[std::to_string(id)] = v;
  return {{"importance", s.importance},
          {"learnability", s.learnability},
          {"selected", s.selected},
          {"scores", s.scores},
          {"learnability_scores", ls}};
}

Selection selection_from_json(const json& j) {
  Selection s;
  s.importance = j.at("importance").get<std::vector<ProblemId>>();
  s.learnability = j.at("learnability").get<std::vector<ProblemId>>();
  s.selected = j.at("selected").get<std::vector<ProblemId>>();
  s.scores = j.at("scores").get<std::vector<double>>();
  for (const auto& [k, v] : j.at("learnability_scores").items()) {
    s.learnability_scores[static_cast<ProblemId>(std::stoul(k))] = v.get<double>();
  }
  return s;
}

}  // namespace

json to_json(const PipelineState& s) {
  json workers = json::object();
  for (const auto& [id, w] : s.workers) workers[id] = worker_json(w);
  json responses = json::array();
  for (const auto& r : s.responses) responses.push_back({{"assignment", r.assignment}, {"response", r.response}});
  json open = json::array();
  for (const auto& [id, a] : s.open) open.push_back(a);
  json ledger = json::object();
  for (const auto& [k, l] : s.ledger) ledger[k] = {{"count", l.count}, {"cents", l.cents}};
  return {{"config", s.config},
          {"phase", to_string(s.phase)},
          {"problems", s.problems},
          {"responses", responses},
          {"workers", workers},
          {"sessions", s.sessions},
          {"open", open},
          {"next_assignment", s.next_assignment},
          {"arms_assigned", s.arms_assigned},
          {"open_proposals", s.open_proposals},
          {"graph", s.graph ? ranking::graph_to_json(*s.graph) : json(nullptr)},
          {"tally", s.tally ? ranking::tally_to_json(*s.tally) : json(nullptr)},
          {"edge_load", s.edge_load},
          {"learn_load", s.learn_load},
          {"data_load", s.data_load},
          {"data_done", s.data_done},
          {"cat_load", s.cat_load},
          {"cat_done", s.cat_done},
          {"selection", s.selection ? selection_json(*s.selection) : json(nullptr)},
          {"ledger", ledger},
          {"expired", s.expired},
          {"last_seq", s.last_seq}};
}

PipelineState state_from_json(const json& j) {
  PipelineState s;
  s.config = j.at("config").get<PipelineConfig>();
  s.phase = phase_from_string(j.at("phase").get<std::string>());
  s.problems = j.at("problems").get<std::vector<Problem>>();
  for (const auto& r : j.at("responses")) {
    s.responses.push_back({r.at("assignment").get<std::uint64_t>(), r.at("response").get<Response>()});
  }
  for (const auto& [id, w] : j.at("workers").items()) s.workers[id] = worker_from_json(w);
  s.sessions = j.at("sessions").get<std::map<std::string, WorkerId>>();
  for (const auto& a : j.at("open")) {
    auto t = a.get<TaskAssignment>();
    s.open[t.id] = t;
  }
  s.next_assignment = j.at("next_assignment").get<std::uint64_t>();
  s.arms_assigned = j.at("arms_assigned").get<std::uint64_t>();
  s.open_proposals = j.at("open_proposals").get<std::size_t>();
  if (!j.at("graph").is_null()) s.graph = ranking::graph_from_json(j.at("graph"));
  if (!j.at("tally").is_null()) s.tally = ranking::tally_from_json(j.at("tally"));
  s.edge_load = j.at("edge_load").get<std::vector<std::size_t>>();
  s.learn_load = j.at("learn_load").get<std::map<ProblemId, std::size_t>>();
  s.data_load = j.at("data_load").get<std::map<ProblemId, std::size_t>>();
  s.data_done = j.at("data_done").get<std::map<ProblemId, std::size_t>>();
  s.cat_load = j.at("cat_load").get<std::map<ProblemId, std::size_t>>();
  s.cat_done = j.at("cat_done").get<std::map<ProblemId, std::size_t>>();
  if (!j.at("selection").is_null()) s.selection = selection_from_json(j.at("selection"));
  for (const auto& [k, l] : j.at("ledger").items()) {
    s.ledger[k] = {l.at("count").get<std::size_t>(), l.at("cents").get<long long>()};
  }
  s.expired = j.at("expired").get<std::size_t>();
  s.last_seq = j.at("last_seq").get<std::uint64_t>();
  // The learnability tally is derived from the recorded ratings.
  if (s.phase != Phase::Proposal && !s.config.rct()) {
    for (auto id : s.boolean_problems()) s.learnability.add_candidate(id);
  }
  for (const auto& r : s.responses) {
    if (const auto* l = std::get_if<LearnabilityRating>(&r.response.payload)) {
      s.learnability.add(r.response.worker, l->problem, l->value);
    }
  }
  return s;
}

std::uint64_t state_hash(const PipelineState& s) {
  const std::string text = to_json(s).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json to_json(const Event& e) { return {{"seq", e.seq}, {"kind", e.kind}, {"data", e.data}}; }

Event event_from_json(const json& j) {
  return {j.at("seq").get<std::uint64_t>(), j.at("kind").get<std::string>(), j.value("data", json::object())};
}

// ---------------------------------------------------------------------------
// Event application

namespace {

WorkerRecord& worker_of(PipelineState& s, const WorkerId& id) {
  auto it = s.workers.find(id);
  if (it == s.workers.end()) throw StateError("unknown worker '" + id + "'");
  return it->second;
}

std::size_t edge_of(const PipelineState& s, const TaskAssignment& a) {
  if (!s.graph || a.problems.size() != 2) throw StateError("comparison task without a graph edge");
  auto e = s.graph->edge_index(a.problems[0] - 1, a.problems[1] - 1);
  if (!e) throw StateError("pair is not an edge of the comparison graph");
  return *e;
}

void reserve(PipelineState& s, const TaskAssignment& a, int delta) {
  auto& w = worker_of(s, a.worker);
  auto step = [delta](std::size_t& v) {
    if (delta < 0 && v == 0) throw StateError("reservation counter underflow");
    v = delta > 0 ? v + 1 : v - 1;
  };
  auto mark = [delta](auto& set, auto key) {
    if (delta > 0) {
      set.insert(key);
    } else {
      set.erase(key);
    }
  };
  switch (a.kind) {
    case TaskKind::Propose:
      step(s.open_proposals);
      break;
    case TaskKind::CompareAndCategorize: {
      const auto e = edge_of(s, a);
      step(s.edge_load.at(e));
      mark(w.judged_edges, e);
      step(w.ranking_tasks);
      break;
    }
    case TaskKind::RateLearnability:
      step(s.learn_load[a.problems.at(0)]);
      mark(w.rated, a.problems.at(0));
      step(w.ranking_tasks);
      break;
    case TaskKind::Categorize:
      step(s.cat_load[a.problems.at(0)]);
      mark(w.categorized, a.problems.at(0));
      step(w.ranking_tasks);
      break;
    case TaskKind::AnswerProblem:
      step(s.data_load[a.problems.at(0)]);
      mark(w.answered, a.problems.at(0));
      break;
  }
}

void release_open(PipelineState& s, std::uint64_t id) {
  auto it = s.open.find(id);
  if (it == s.open.end()) throw StateError("assignment " + std::to_string(id) + " is not open");
  const TaskAssignment a = it->second;
  reserve(s, a, -1);
  worker_of(s, a.worker).open.reset();
  s.open.erase(it);
  ++s.expired;
}

void apply_issue(PipelineState& s, const TaskAssignment& a) {
  auto& w = worker_of(s, a.worker);
  if (w.open) throw StateError("worker '" + a.worker + "' already holds assignment " + std::to_string(*w.open));
  if (a.id != s.next_assignment) throw StateError("unexpected assignment id " + std::to_string(a.id));
  for (auto p : a.problems) {
    if (!s.has_problem(p)) throw StateError("assignment references unknown problem " + std::to_string(p));
  }
  reserve(s, a, +1);
  w.open = a.id;
  s.open[a.id] = a;
  s.next_assignment = a.id + 1;
}

void apply_response(PipelineState& s, std::uint64_t id, Response response) {
  auto it = s.open.find(id);
  if (it == s.open.end()) throw StateError("assignment " + std::to_string(id) + " is not open");
  const TaskAssignment a = it->second;
  if (a.worker != response.worker) throw StateError("response worker does not own the assignment");
  auto& w = worker_of(s, a.worker);
  switch (a.kind) {
    case TaskKind::Propose: {
      auto& prop = std::get<Proposal>(response.payload);
      prop.problem.id = static_cast<ProblemId>(s.problems.size() + 1);
      prop.problem.proposer = a.worker;
      prop.problem.arm = w.arm;
      s.problems.push_back(prop.problem);
      --s.open_proposals;
      w.proposed = true;
      break;
    }
    case TaskKind::CompareAndCategorize: {
      const auto& cmp = std::get<ComparisonJudgment>(response.payload);
      s.tally->record(a.problems[0] - 1, a.problems[1] - 1, cmp.winner - 1);
      break;
    }
    case TaskKind::RateLearnability: {
      const auto& l = std::get<LearnabilityRating>(response.payload);
      s.learnability.add(a.worker, a.problems[0], l.value);
      break;
    }
    case TaskKind::Categorize:
      ++s.cat_done[a.problems[0]];
      break;
    case TaskKind::AnswerProblem:
      ++s.data_done[a.problems[0]];
      break;
  }
  s.open.erase(id);
  w.open.reset();
  const std::string key(reward_key(a.kind));
  auto& line = s.ledger[key];
  ++line.count;
  line.cents += s.config.rewards_cents.at(key);
  s.responses.push_back({id, std::move(response)});
}

Phase next_phase(const PipelineState& s) {
  switch (s.phase) {
    case Phase::Proposal:
      return Phase::Ranking;
    case Phase::Ranking:
      return s.config.rct() ? Phase::Done : Phase::Collection;
    default:
      return Phase::Done;
  }
}

void apply_phase(PipelineState& s, const json& d) {
  const auto from = phase_from_string(d.at("from").get<std::string>());
  const auto to = phase_from_string(d.at("to").get<std::string>());
  if (from != s.phase || s.phase == Phase::Done || to != next_phase(s)) {
    throw StateError("illegal phase transition " + std::string(to_string(from)) + " -> " + std::string(to_string(to)));
  }
  std::string missing;
  if (!can_advance(s, &missing)) throw StateError("phase criterion unmet: " + missing);
  while (!s.open.empty()) release_open(s, s.open.begin()->first);
  s.phase = to;
  if (to == Phase::Ranking) {
    if (s.config.rct()) {
      for (const auto& p : s.problems) s.cat_load[p.id] = 0;
    } else {
      s.graph = ranking::graph_from_json(d.at("graph"));
      if (s.graph->node_count() != s.problems.size()) throw StateError("graph size differs from problem count");
      s.tally.emplace(*s.graph);
      s.edge_load.assign(s.graph->edges().size(), 0);
      for (auto id : s.boolean_problems()) {
        s.learnability.add_candidate(id);
        s.learn_load[id] = 0;
      }
    }
  } else if (to == Phase::Collection) {
    s.selection = selection_from_json(d.at("selection"));
    for (auto id : s.selection->selected) {
      if (!s.has_problem(id)) throw StateError("selection references unknown problem " + std::to_string(id));
      s.data_load[id] = 0;
      s.data_done[id] = 0;
    }
  }
}

}  // namespace

void apply(PipelineState& s, const Event& e) {
  if (e.seq != s.last_seq + 1) {
    throw StateError("expected sequence " + std::to_string(s.last_seq + 1) + ", found " + std::to_string(e.seq));
  }
  const auto& d = e.data;
  if (e.kind == "pipeline_initialized") {
    if (s.last_seq != 0) throw StateError("pipeline_initialized after the first record");
    PipelineState fresh;
    fresh.config = d.at("config").get<PipelineConfig>();
    if (auto errs = validate(fresh.config); !errs.empty()) throw ValidationError(errs);
    s = std::move(fresh);
  } else if (s.last_seq == 0) {
    throw StateError("log must begin with pipeline_initialized");
  } else if (e.kind == "worker_registered") {
    const auto id = d.at("worker").get<std::string>();
    if (!s.workers.emplace(id, WorkerRecord{}).second) throw StateError("worker '" + id + "' registered twice");
  } else if (e.kind == "session_opened") {
    const auto worker = d.at("worker").get<std::string>();
    worker_of(s, worker);
    if (!s.sessions.emplace(d.at("token").get<std::string>(), worker).second) throw StateError("duplicate token");
  } else if (e.kind == "arm_assigned") {
    auto& w = worker_of(s, d.at("worker").get<std::string>());
    const auto arm = d.at("arm").get<std::string>();
    if (w.arm) throw StateError("worker already has an arm");
    w.arm = arm;
    ++s.arms_assigned;
  } else if (e.kind == "task_issued") {
    apply_issue(s, d.at("assignment").get<TaskAssignment>());
  } else if (e.kind == "assignment_expired") {
    release_open(s, d.at("assignment").get<std::uint64_t>());
  } else if (e.kind == "response_recorded") {
    apply_response(s, d.at("assignment").get<std::uint64_t>(), d.at("response").get<Response>());
  } else if (e.kind == "phase_advanced") {
    apply_phase(s, d);
  } else {
    throw StateError("unknown event kind '" + e.kind + "'");
  }
  s.last_seq = e.seq;
}

// ---------------------------------------------------------------------------
// Queries

namespace {

struct Criterion {
  bool floor = true;  // closing criterion
  bool full = true;   // every dispatch target reached
  std::string missing;
};

Criterion criterion(const PipelineState& s) {
  Criterion c;
  const auto& cfg = s.config;
  auto note = [&c](const std::string& m) {
    if (!c.missing.empty()) c.missing += "; ";
    c.missing += m;
  };
  switch (s.phase) {
    case Phase::Proposal:
      c.floor = c.full = s.problems.size() >= cfg.N;
      if (!c.floor) note(std::to_string(s.problems.size()) + "/" + std::to_string(cfg.N) + " proposals");
      break;
    case Phase::Ranking:
      if (cfg.rct()) {
        std::size_t short_problems = 0;
        for (const auto& p : s.problems) {
          auto it = s.cat_done.find(p.id);
          short_problems += (it == s.cat_done.end() ? 0 : it->second) < cfg.categorizations_per_problem;
        }
        c.floor = c.full = short_problems == 0;
        if (!c.floor) note(std::to_string(short_problems) + " problems lack categorizations");
      } else {
        const auto need = ceil_share(cfg.attrition_floor, cfg.L);
        std::size_t below_floor = 0, below_full = 0;
        for (const auto& e : s.graph->edges()) {
          const auto t = s.tally->trials(e.a, e.b);
          below_floor += t < need;
          below_full += t < cfg.L;
        }
        std::size_t learn_floor = 0, learn_full = 0;
        for (auto id : s.boolean_problems()) {
          const auto n = s.learnability.response_count(id);
          learn_floor += n < cfg.learnability_floor;
          learn_full += n < cfg.learnability_per_problem;
        }
        c.floor = below_floor == 0 && learn_floor == 0;
        c.full = below_full == 0 && learn_full == 0;
        if (below_floor) note(std::to_string(below_floor) + " edges below " + std::to_string(need) + " comparisons");
        if (learn_floor) {
          note(std::to_string(learn_floor) + " Boolean problems below " + std::to_string(cfg.learnability_floor) +
               " learnability ratings");
        }
      }
      break;
    case Phase::Collection: {
      std::size_t short_problems = 0;
      for (auto id : s.selection->selected) short_problems += s.data_done.at(id) < cfg.n_target;
      c.floor = c.full = short_problems == 0;
      if (!c.floor) note(std::to_string(short_problems) + " selected problems below " + std::to_string(cfg.n_target) + " rows");
      break;
    }
    case Phase::Done:
      c.floor = c.full = false;
      note("pipeline is done");
      break;
  }
  return c;
}

}  // namespace

bool can_advance(const PipelineState& state, std::string* progress_text) {
  auto c = criterion(state);
  if (progress_text) *progress_text = c.missing;
  return c.floor;
}

json progress(const PipelineState& s) {
  json j{{"phase", to_string(s.phase)},
         {"problems", s.problems.size()},
         {"N", s.config.N},
         {"workers", s.workers.size()},
         {"open_assignments", s.open.size()},
         {"responses", s.responses.size()},
         {"expired", s.expired},
         {"last_seq", s.last_seq}};
  if (s.graph) {
    std::size_t complete = 0;
    for (const auto& e : s.graph->edges()) complete += s.tally->trials(e.a, e.b) >= s.config.L;
    j["comparisons"] = {{"edges", s.graph->edges().size()},
                        {"edges_complete", complete},
                        {"max_degree", s.graph->max_degree()},
                        {"trials", s.tally->total_trials()}};
    std::size_t ratings = 0;
    for (auto id : s.boolean_problems()) ratings += s.learnability.response_count(id);
    j["learnability"] = {{"problems", s.boolean_problems().size()}, {"ratings", ratings}};
  }
  if (s.config.rct()) {
    std::size_t done = 0;
    for (const auto& [_, n] : s.cat_done) done += n;
    j["categorizations"] = done;
  }
  if (s.selection) {
    json data = json::object();
    for (auto id : s.selection->selected) data[std::to_string(id)] = s.data_done.at(id);
    j["selected"] = s.selection->selected;
    j["data"] = data;
  }
  std::string missing;
  j["can_advance"] = s.phase != Phase::Done && can_advance(s, &missing);
  j["missing"] = missing;
  return j;
}

std::map<std::string, LedgerLine> ledger_totals(const PipelineState& state) {
  std::map<std::string, LedgerLine> out;
  for (const auto* key : kRewardKeys) out[key] = {};
  for (const auto& [k, l] : state.ledger) out[k] = l;
  return out;
}

std::vector<AssembledDataset> assemble_datasets(const PipelineState& state) {
  if (!state.selection) throw StateError("no problems have been selected yet");
  std::map<ProblemId, std::vector<Response>> by_problem;
  for (const auto& r : state.responses) {
    if (const auto* d = std::get_if<DataAnswers>(&r.response.payload)) by_problem[d->problem].push_back(r.response);
  }
  std::vector<AssembledDataset> out;
  for (auto id : state.selection->selected) {
    out.push_back(assemble_dataset(state.problem(id), by_problem[id], state.config.n_target));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Orchestrator

Orchestrator::Orchestrator(PipelineConfig config, Sink sink) : sink_(std::move(sink)) {
  if (auto errs = validate(config); !errs.empty()) throw ValidationError(errs);
  commit("pipeline_initialized", {{"config", config}});
}

Orchestrator::Orchestrator(Orchestrator&& other) noexcept {
  std::lock_guard lock(other.mutex_);
  state_ = std::move(other.state_);
  log_ = std::move(other.log_);
  sink_ = std::move(other.sink_);
}

Orchestrator Orchestrator::replay(const std::vector<Event>& events, Sink sink) {
  if (events.empty()) throw ReplayError(0, "event log is empty");
  return resume(PipelineState{}, events, std::move(sink));
}

Orchestrator Orchestrator::resume(PipelineState snapshot, const std::vector<Event>& tail, Sink sink) {
  Orchestrator o;
  o.state_ = std::move(snapshot);
  for (const auto& e : tail) {
    try {
      apply(o.state_, e);
    } catch (const std::exception& ex) {
      throw ReplayError(e.seq, ex.what());
    }
    o.log_.push_back(e);
  }
  o.sink_ = std::move(sink);
  return o;
}

void Orchestrator::commit(std::string kind, json data) {
  Event e{state_.last_seq + 1, std::move(kind), std::move(data)};
  if (sink_) sink_(e);
  apply(state_, e);
  log_.push_back(std::move(e));
}

void Orchestrator::register_worker(const WorkerId& worker) {
  std::lock_guard lock(mutex_);
  if (worker.empty()) throw ValidationError("worker", "must be nonempty");
  if (state_.workers.count(worker)) throw ValidationError("worker", "'" + worker + "' is already registered");
  commit("worker_registered", {{"worker", worker}});
}

void Orchestrator::open_session(const std::string& token, const WorkerId& worker) {
  std::lock_guard lock(mutex_);
  if (!state_.workers.count(worker)) throw NotFoundError("unknown worker '" + worker + "'");
  if (token.empty() || state_.sessions.count(token)) throw ValidationError("token", "must be nonempty and unused");
  commit("session_opened", {{"token", token}, {"worker", worker}});
}

std::string Orchestrator::assign_arm(const WorkerId& worker) {
  std::lock_guard lock(mutex_);
  return assign_arm_locked(worker);
}

std::string Orchestrator::assign_arm_locked(const WorkerId& worker) {
  if (!state_.config.rct()) throw StateError("no trial arms are configured");
  auto it = state_.workers.find(worker);
  if (it == state_.workers.end()) throw NotFoundError("unknown worker '" + worker + "'");
  if (it->second.arm) return *it->second.arm;
  if (it->second.proposed) throw StateError("worker '" + worker + "' proposed before arms were assigned");
  Rng rng(derive_seed(state_.config.seed, {kArmStream, state_.arms_assigned}));
  const auto& arm = state_.config.rct_arms[rng.below(state_.config.rct_arms.size())].label;
  commit("arm_assigned", {{"worker", worker}, {"arm", arm}, {"index", state_.arms_assigned}});
  return arm;
}

void Orchestrator::expire_due(std::uint64_t now) {
  std::vector<std::uint64_t> due;
  for (const auto& [id, a] : state_.open) {
    if (a.expires_at <= now) due.push_back(id);
  }
  for (auto id : due) commit("assignment_expired", {{"assignment", id}, {"tick", now}});
}

std::optional<TaskAssignment> Orchestrator::next_task(const WorkerId& worker, std::uint64_t now) {
  std::lock_guard lock(mutex_);
  if (!state_.workers.count(worker)) throw NotFoundError("unknown worker '" + worker + "'");
  expire_due(now);
  const auto& w = state_.workers.at(worker);
  if (w.open) return state_.open.at(*w.open);
  return dispatch(worker, now);
}

namespace {

template <typename Map>
std::size_t load_of(const Map& m, ProblemId id) {
  auto it = m.find(id);
  return it == m.end() ? 0 : it->second;
}

// Least-loaded candidate below `cap` that passes `eligible`; ties go to the
// lowest id.
template <typename Range, typename Load, typename Eligible>
std::optional<ProblemId> least_loaded(const Range& ids, Load load, std::size_t cap, Eligible eligible) {
  std::optional<ProblemId> best;
  std::size_t best_load = std::numeric_limits<std::size_t>::max();
  for (auto id : ids) {
    const auto l = load(id);
    if (l >= cap || !eligible(id)) continue;
    if (l < best_load) {
      best = id;
      best_load = l;
    }
  }
  return best;
}

}  // namespace

std::optional<TaskAssignment> Orchestrator::dispatch(const WorkerId& worker, std::uint64_t now) {
  const auto& cfg = state_.config;
  const WorkerRecord w = state_.workers.at(worker);
  TaskAssignment a;
  a.worker = worker;
  a.id = state_.next_assignment;
  a.issued_at = now;
  a.expires_at = now + cfg.expiry_ticks;

  switch (state_.phase) {
    case Phase::Proposal: {
      if (w.proposed || state_.problems.size() + state_.open_proposals >= cfg.N) return std::nullopt;
      a.kind = TaskKind::Propose;
      if (cfg.rct()) {
        a.arm = assign_arm_locked(worker);
        a.id = state_.next_assignment;
        for (const auto& arm : cfg.rct_arms) {
          if (arm.label == *a.arm) a.example = arm.example;
        }
      }
      break;
    }
    case Phase::Ranking: {
      if (w.ranking_tasks >= cfg.max_phase2_tasks_per_worker) return std::nullopt;
      if (cfg.rct()) {
        std::vector<ProblemId> ids;
        for (const auto& p : state_.problems) ids.push_back(p.id);
        auto pick = least_loaded(
            ids, [&](ProblemId id) { return load_of(state_.cat_load, id); }, cfg.categorizations_per_problem,
            [&](ProblemId id) { return !w.categorized.count(id); });
        if (!pick) return std::nullopt;
        a.kind = TaskKind::Categorize;
        a.problems = {*pick};
        break;
      }
      std::optional<std::size_t> edge;
      std::size_t edge_best = std::numeric_limits<std::size_t>::max();
      std::size_t edge_total = 0;
      for (std::size_t e = 0; e < state_.edge_load.size(); ++e) {
        const auto l = state_.edge_load[e];
        edge_total += l;
        if (l >= cfg.L || w.judged_edges.count(e)) continue;
        if (l < edge_best) {
          edge = e;
          edge_best = l;
        }
      }
      const auto booleans = state_.boolean_problems();
      auto learn = least_loaded(
          booleans, [&](ProblemId id) { return load_of(state_.learn_load, id); }, cfg.learnability_per_problem,
          [&](ProblemId id) { return !w.rated.count(id); });
      if (!edge && !learn) return std::nullopt;
      bool compare = edge.has_value();
      if (edge && learn) {
        std::size_t learn_total = 0;
        for (auto id : booleans) learn_total += load_of(state_.learn_load, id);
        // Compare completion fractions by cross-multiplication to stay exact.
        const auto edge_cap = state_.edge_load.size() * cfg.L;
        const auto learn_cap = booleans.size() * cfg.learnability_per_problem;
        compare = edge_total * learn_cap <= learn_total * edge_cap;
      }
      if (compare) {
        const auto& e = state_.graph->edges()[*edge];
        a.kind = TaskKind::CompareAndCategorize;
        a.problems = {static_cast<ProblemId>(e.a + 1), static_cast<ProblemId>(e.b + 1)};
      } else {
        a.kind = TaskKind::RateLearnability;
        a.problems = {*learn};
      }
      break;
    }
    case Phase::Collection: {
      auto pick = least_loaded(
          state_.selection->selected, [&](ProblemId id) { return load_of(state_.data_load, id); }, cfg.n_target,
          [&](ProblemId id) { return !w.answered.count(id); });
      if (!pick) return std::nullopt;
      a.kind = TaskKind::AnswerProblem;
      a.problems = {*pick};
      break;
    }
    case Phase::Done:
      return std::nullopt;
  }
  commit("task_issued", {{"assignment", a}});
  return a;
}

void Orchestrator::check_payload(const TaskAssignment& a, const Response& r) const {
  const auto& cfg = state_.config;
  std::vector<FieldError> errs;
  auto merge = [&errs](std::vector<FieldError> more) { errs.insert(errs.end(), more.begin(), more.end()); };
  auto prefixed = [](std::vector<FieldError> in, const std::string& prefix) {
    for (auto& e : in) e.field = prefix + e.field;
    return in;
  };
  auto wrong_kind = [&](const char* expected) {
    throw ValidationError("payload.kind", "expected '" + std::string(expected) + "' for a " +
                                              std::string(to_string(a.kind)) + " task, got '" +
                                              std::string(payload_kind(r.payload)) + "'");
  };

  switch (a.kind) {
    case TaskKind::Propose: {
      const auto* p = std::get_if<Proposal>(&r.payload);
      if (!p) wrong_kind("proposal");
      merge(prefixed(validate_problem(p->problem, cfg.p_inputs), "payload.problem."));
      if (p->problem.inputs.size() == cfg.p_inputs) merge(validate_answers(p->problem, p->self_answers, "payload.self_answers"));
      break;
    }
    case TaskKind::CompareAndCategorize: {
      const auto* c = std::get_if<ComparisonJudgment>(&r.payload);
      if (!c) wrong_kind("comparison");
      const auto x = a.problems[0], y = a.problems[1];
      if (!((c->first == x && c->second == y) || (c->first == y && c->second == x))) {
        errs.push_back({"payload.pair", "does not match the assigned pair"});
      }
      if (c->winner != x && c->winner != y) errs.push_back({"payload.winner", "must be one of the pair"});
      if (c->categorizations.size() != 2) {
        errs.push_back({"payload.categorizations", "expected one record per problem of the pair"});
      } else {
        std::set<ProblemId> covered;
        for (std::size_t i = 0; i < 2; ++i) {
          const auto& rec = c->categorizations[i];
          const std::string field = "payload.categorizations[" + std::to_string(i) + "]";
          if (rec.problem != x && rec.problem != y) {
            errs.push_back({field + ".problem_id", "not part of the assigned pair"});
            continue;
          }
          covered.insert(rec.problem);
          merge(validate_categorization(rec, state_.problem(rec.problem), cfg.categories, field));
        }
        if (covered.size() != 2 && errs.empty()) {
          errs.push_back({"payload.categorizations", "both problems must be categorized"});
        }
      }
      break;
    }
    case TaskKind::RateLearnability: {
      const auto* l = std::get_if<LearnabilityRating>(&r.payload);
      if (!l) wrong_kind("learnability");
      if (l->problem != a.problems[0]) errs.push_back({"payload.problem_id", "does not match the task"});
      if (l->value < 1 || l->value > 5) errs.push_back({"payload.value", "Likert value must be in 1..5"});
      break;
    }
    case TaskKind::Categorize: {
      const auto* c = std::get_if<CategorizationRecord>(&r.payload);
      if (!c) wrong_kind("categorization");
      merge(validate_categorization(*c, state_.problem(a.problems[0]), cfg.categories, "payload.record"));
      break;
    }
    case TaskKind::AnswerProblem: {
      const auto* d = std::get_if<DataAnswers>(&r.payload);
      if (!d) wrong_kind("data");
      if (d->problem != a.problems[0]) {
        errs.push_back({"payload.problem_id", "does not match the task"});
      } else {
        merge(validate_answers(state_.problem(d->problem), d->answers, "payload.answers"));
      }
      break;
    }
  }
  if (!errs.empty()) throw ValidationError(std::move(errs));
}

void Orchestrator::record_response(std::uint64_t assignment, const Response& response) {
  std::lock_guard lock(mutex_);
  auto it = state_.open.find(assignment);
  if (it == state_.open.end()) throw StaleAssignmentError("assignment " + std::to_string(assignment) + " is not open");
  const TaskAssignment a = it->second;
  if (a.worker != response.worker) {
    throw StaleAssignmentError("assignment " + std::to_string(assignment) + " belongs to another worker");
  }
  check_payload(a, response);
  Response stamped = response;
  stamped.timestamp = state_.last_seq + 1;
  commit("response_recorded", {{"assignment", assignment}, {"response", stamped}});
  maybe_auto_advance();
}

void Orchestrator::maybe_auto_advance() {
  if (!state_.config.auto_advance || state_.phase == Phase::Done) return;
  if (criterion(state_).full) advance_locked();
}

void Orchestrator::settle() {
  std::lock_guard lock(mutex_);
  maybe_auto_advance();
}

void Orchestrator::advance_phase() {
  std::lock_guard lock(mutex_);
  advance_locked();
}

void Orchestrator::advance_locked() {
  std::string missing;
  if (state_.phase == Phase::Done) throw StateError("pipeline is already done");
  if (!can_advance(state_, &missing)) throw StateError("cannot leave " + std::string(to_string(state_.phase)) + ": " + missing);
  const auto& cfg = state_.config;
  const Phase to = next_phase(state_);
  json data{{"from", to_string(state_.phase)}, {"to", to_string(to)}};
  if (to == Phase::Ranking && !cfg.rct()) {
    const auto g = ranking::build_comparison_graph(state_.problems.size(), cfg.c, derive_seed(cfg.seed, {kGraphStream}));
    data["graph"] = ranking::graph_to_json(g);
  } else if (to == Phase::Collection) {
    Selection sel;
    const auto scores = ranking::rank_centrality(*state_.tally);
    sel.scores = scores.u;
    for (std::size_t i = 0; i < cfg.K_importance && i < scores.order.size(); ++i) {
      sel.importance.push_back(static_cast<ProblemId>(scores.order[i] + 1));
    }
    sel.learnability_scores = learnability::learnability_scores(state_.learnability, cfg.learnability_floor);
    for (auto id : learnability::rank_learnable(state_.learnability, cfg.learnability_floor)) {
      if (sel.learnability.size() == cfg.K_learnability) break;
      if (std::find(sel.importance.begin(), sel.importance.end(), id) == sel.importance.end()) {
        sel.learnability.push_back(id);
      }
    }
    sel.selected = sel.importance;
    sel.selected.insert(sel.selected.end(), sel.learnability.begin(), sel.learnability.end());
    data["selection"] = selection_json(sel);
  }
  commit("phase_advanced", std::move(data));
  maybe_auto_advance();
}

std::vector<Event> Orchestrator::events() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::uint64_t Orchestrator::hash() const {
  std::lock_guard lock(mutex_);
  return state_hash(state_);
}

}  // namespace ideation::pipeline
