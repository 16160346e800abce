#include "ideation/report.hpp"

#include <cstdio>
#include <sstream>

#include "ideation/comparison_ranking.hpp"
#include "ideation/error.hpp"
#include "ideation/learnability.hpp"
#include "ideation/rng.hpp"

namespace ideation::report {

using nlohmann::json;

namespace {

constexpr std::uint64_t kEvalStream = 0x6576616c;
constexpr std::uint64_t kReportBiasStream = 0x72626961;

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

json selection_json(const pipeline::Selection& s) {
  return {{"importance", s.importance}, {"learnability", s.learnability}, {"selected", s.selected}};
}

}  // namespace

DatasetEvaluation evaluate_dataset(const Dataset& dataset, const ReportOptions& options) {
  DatasetEvaluation out;
  out.problem = dataset.problem_id;
  out.task = dataset.task;
  out.rows = dataset.size();
  learner::EvalOptions eval;
  eval.k = options.k;
  eval.bootstrap = options.bootstrap;
  eval.forest.n_trees = options.n_trees;
  const auto seed = derive_seed(options.seed, {kEvalStream, dataset.problem_id});
  try {
    out.eval = learner::bootstrap_and_baseline(dataset.X, dataset.y, dataset.task, seed, eval);
    const auto forest = learner::train_forest(dataset.X, dataset.y, dataset.task, seed, eval.forest);
    out.correlation = stats::redundancy_report(dataset, *out.eval, forest);
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

json to_json(const DatasetEvaluation& e) {
  json j{{"problem_id", e.problem}, {"task", to_string(e.task)}, {"rows", e.rows}};
  j["eval"] = e.eval ? learner::to_json(*e.eval) : json(nullptr);
  j["correlation"] = e.correlation ? stats::to_json(*e.correlation) : json(nullptr);
  j["error"] = e.error.empty() ? json(nullptr) : json(e.error);
  return j;
}

std::vector<CategorizationRecord> collect_ratings(const pipeline::PipelineState& state) {
  std::vector<CategorizationRecord> out;
  for (const auto& r : state.responses) {
    if (const auto* c = std::get_if<CategorizationRecord>(&r.response.payload)) {
      out.push_back(*c);
    } else if (const auto* j = std::get_if<ComparisonJudgment>(&r.response.payload)) {
      out.insert(out.end(), j->categorizations.begin(), j->categorizations.end());
    }
  }
  return out;
}

stats::ArmData arm_from_state(const pipeline::PipelineState& state, std::string label) {
  return {std::move(label), state.problems, collect_ratings(state)};
}

std::vector<stats::ArmData> arms_by_tag(const pipeline::PipelineState& state) {
  std::vector<stats::ArmData> arms;
  std::map<std::string, std::size_t> index;
  for (const auto& a : state.config.rct_arms) {
    index[a.label] = arms.size();
    arms.push_back({a.label, {}, {}});
  }
  for (const auto& p : state.problems) {
    if (!p.arm) continue;
    if (auto it = index.find(*p.arm); it != index.end()) arms[it->second].problems.push_back(p);
  }
  for (auto& r : collect_ratings(state)) {
    if (!state.has_problem(r.problem)) continue;
    const auto& arm = state.problem(r.problem).arm;
    if (!arm) continue;
    if (auto it = index.find(*arm); it != index.end()) arms[it->second].ratings.push_back(std::move(r));
  }
  return arms;
}

RctBattery rct_battery(const std::vector<stats::ArmData>& arms, std::span<const std::string> vocabulary) {
  if (arms.size() < 2) throw ValidationError("arms", "need at least two arms, got " + std::to_string(arms.size()));
  std::vector<FieldError> errs;
  for (const auto& a : arms) {
    if (a.problems.empty() || a.ratings.empty()) errs.push_back({"arms." + a.label, "arm has no rated problems"});
  }
  if (!errs.empty()) throw ValidationError(errs);
  RctBattery b;
  for (const auto& a : arms) b.means.push_back(stats::arm_means(a));
  for (std::size_t i = 1; i < arms.size(); ++i) b.comparisons.push_back(stats::rct_compare(arms[0], arms[i], vocabulary));
  return b;
}

json to_json(const RctBattery& b) {
  json means = json::array();
  for (const auto& m : b.means) means.push_back(stats::to_json(m));
  json comps = json::array();
  for (const auto& c : b.comparisons) comps.push_back(stats::to_json(c));
  return {{"arms", means}, {"comparisons", comps}};
}

std::string arm_means_csv(const RctBattery& b) {
  std::ostringstream os;
  os << "arm,importance,inputs_useful,answerable,objective,numeric\n";
  for (const auto& m : b.means) {
    os << m.label << ',' << fixed(m.importance) << ',' << fixed(m.inputs_useful) << ',' << fixed(m.answerable) << ','
       << fixed(m.objective) << ',' << fixed(m.numeric) << '\n';
  }
  return os.str();
}

std::string battery_csv(const RctBattery& b) {
  std::ostringstream os;
  os << "baseline,treatment,difference,test,statistic,p_value,significant\n";
  for (const auto& c : b.comparisons) {
    for (const auto& row : c.rows) {
      os << c.baseline.label << ',' << c.treatment.label << ',' << row.difference << ',' << row.test.name << ','
         << (row.test.statistic ? fixed(*row.test.statistic) : std::string()) << ','
         << (row.test.computable ? fixed(row.test.p_value) : std::string("not_computable")) << ','
         << (row.test.significant() ? "*" : "") << '\n';
    }
  }
  return os.str();
}

json ledger_json(const pipeline::PipelineState& state) {
  json j = json::object();
  long long total = 0;
  for (const auto& [key, line] : pipeline::ledger_totals(state)) {
    j[key] = {{"count", line.count}, {"amount", static_cast<double>(line.cents) / 100.0}};
    total += line.cents;
  }
  j["total"] = static_cast<double>(total) / 100.0;
  return j;
}

json rankings_json(const pipeline::PipelineState& state) {
  if (!state.selection) {
    throw StateError("rankings are available once the ranking phase has closed (phase is " +
                     std::string(pipeline::to_string(state.phase)) + ")");
  }
  const auto& s = *state.selection;
  json j = selection_json(s);
  j["scores"] = s.scores;
  j["learnability_scores"] = learnability::scores_to_json(s.learnability_scores);
  j["provisional"] = false;
  return j;
}

json provisional_rankings_json(const pipeline::PipelineState& state) {
  if (state.selection) return rankings_json(state);
  if (!state.tally) throw StateError("no comparison graph yet (phase is " + std::string(pipeline::to_string(state.phase)) + ")");
  const auto scores = ranking::rank_centrality(*state.tally);
  std::vector<ProblemId> order;
  for (auto node : scores.order) order.push_back(static_cast<ProblemId>(node + 1));
  json j{{"order", order},
         {"scores", scores.u},
         {"learnability_scores",
          learnability::scores_to_json(learnability::learnability_scores(state.learnability, 1))},
         {"provisional", true}};
  return j;
}

json build_report(const pipeline::PipelineState& state, const ReportOptions& options) {
  json j;
  j["version"] = 1;
  j["phase"] = pipeline::to_string(state.phase);
  j["seed"] = options.seed;
  j["options"] = {{"k", options.k},
                  {"bootstrap", options.bootstrap},
                  {"n_trees", options.n_trees},
                  {"bias_bootstrap", options.bias_bootstrap},
                  {"train", options.train}};
  j["ledger"] = ledger_json(state);
  j["selection"] = state.selection ? selection_json(*state.selection) : json(nullptr);
  j["problem_characteristics"] =
      state.problems.empty() ? json(nullptr) : stats::to_json(stats::problem_characteristics(state.problems));

  const auto ratings = collect_ratings(state);
  j["categorization"] =
      stats::to_json(stats::categorization_summary(ratings, state.problems, state.config.categories));

  json datasets = json::array();
  std::vector<double> correlations;
  if (state.selection && options.train) {
    for (const auto& assembled : pipeline::assemble_datasets(state)) {
      auto e = evaluate_dataset(assembled.dataset, options);
      if (e.correlation) {
        for (std::size_t i = 0; i < e.correlation->r.size(); ++i) {
          if (!e.correlation->constant[i]) correlations.push_back(e.correlation->r[i]);
        }
      }
      auto dj = to_json(e);
      dj["skipped"] = assembled.skipped.size();
      datasets.push_back(std::move(dj));
    }
  }
  j["datasets"] = datasets;
  j["positivity_bias"] =
      correlations.size() >= 2
          ? stats::to_json(stats::positivity_bias(correlations, options.bias_bootstrap,
                                                  derive_seed(options.seed, {kReportBiasStream})))
          : json(nullptr);

  j["rct"] = nullptr;
  if (state.config.rct_arms.size() >= 2) {
    try {
      j["rct"] = to_json(rct_battery(arms_by_tag(state), state.config.categories));
    } catch (const ValidationError& e) {
      j["rct"] = {{"error", e.what()}};
    }
  }
  return j;
}

}  // namespace ideation::report
