#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "ideation/error.hpp"
#include "ideation/learnability.hpp"
#include "ideation/learner.hpp"
#include "ideation/stats.hpp"
#include "ideation/worker_sim.hpp"

using namespace ideation;
using namespace ideation::sim;

namespace {

PopulationConfig one_template(Link link, AnswerType target, std::vector<AnswerType> inputs, double noise,
                              std::uint64_t seed = 1) {
  PopulationConfig c = default_population(4, seed);
  c.templates = {{"only", link, target, std::move(inputs), noise, 1.0}};
  return c;
}

Dataset rows_for(const Population& pop, const Problem& p, std::size_t n) {
  std::vector<Response> rs;
  for (std::size_t i = 0; i < n; ++i) {
    const auto w = "r" + std::to_string(i);
    rs.push_back({w, 0, pop.answer(p, w)});
  }
  return assemble_dataset(p, rs).dataset;
}

Problem proposed(const Population& pop, const std::string& who, ProblemId id = 1) {
  auto p = pop.propose(who, 4).problem;
  p.id = id;
  return p;
}

}  // namespace

TEST(Btl, Frequencies) {
  Rng rng(1);
  int j_wins = 0, heavy = 0;
  for (int k = 0; k < 10000; ++k) {
    j_wins += btl_winner(1, 2.0, 2, 2.0, rng.uniform()) == 2;
    heavy += btl_winner(1, 1.0, 2, 9.0, rng.uniform()) == 2;
  }
  EXPECT_NEAR(j_wins / 1e4, 0.5, 0.03);
  EXPECT_NEAR(heavy / 1e4, 0.9, 0.02);
  EXPECT_THROW(btl_winner(1, 0.0, 2, 1.0, 0.5), ValidationError);
}

TEST(Btl, PopulationCompareDeterministic) {
  Population pop(default_population(4, 3));
  Rng a(5), b(5);
  for (int k = 0; k < 200; ++k) EXPECT_EQ(pop.compare(3, 8, a.uniform()), pop.compare(3, 8, b.uniform()));
  EXPECT_THROW(pop.compare(4, 4, 0.5), ValidationError);
}

TEST(Likert, Profiles) {
  const LikertProfile three{0, 0, 1, 0, 0}, five{0, 0, 0, 0, 1}, flat{0.2, 0.2, 0.2, 0.2, 0.2};
  Rng rng(2);
  double sum = 0.0;
  learnability::LearnabilityTally t;
  for (int k = 0; k < 10000; ++k) {
    EXPECT_EQ(likert_draw(three, rng.uniform()), 3);
    sum += likert_draw(flat, rng.uniform());
    if (k < 20) t.add("w" + std::to_string(k), 1, likert_draw(five, rng.uniform()));
  }
  EXPECT_NEAR(sum / 1e4, 3.0, 0.05);
  EXPECT_EQ(learnability::learnability_score(t, 1), 2.0);
}

TEST(Likert, ModelProfilesAreDistributions) {
  Population pop(default_population(4, 4));
  for (int i = 0; i < 50; ++i) {
    const auto m = pop.model_for("p" + std::to_string(i));
    const double s = std::accumulate(m.likert.begin(), m.likert.end(), 0.0);
    EXPECT_NEAR(s, 1.0, 1e-12);
    for (double v : m.likert) EXPECT_GE(v, 0.0);
  }
}

TEST(Qualities, PositiveAndLogSpaced) {
  auto cfg = default_population(4, 9);
  cfg.quality_mode = QualityMode::LogSpaced;
  cfg.quality_count = 20;
  Population pop(cfg);
  std::vector<double> w;
  for (ProblemId id = 1; id <= 20; ++id) w.push_back(pop.quality(id));
  std::sort(w.begin(), w.end());
  EXPECT_NEAR(w.front(), 1.0, 1e-12);
  EXPECT_NEAR(w.back(), 10.0, 1e-9);
  for (std::size_t i = 1; i < w.size(); ++i) EXPECT_NEAR(std::log(w[i] / w[i - 1]), std::log(10.0) / 19.0, 1e-9);

  Population uniform(default_population(4, 9));
  for (ProblemId id = 1; id <= 100; ++id) {
    EXPECT_GE(uniform.quality(id), 1.0);
    EXPECT_LE(uniform.quality(id), 10.0);
  }
}

TEST(Propose, TemplateEchoAndDeterminism) {
  Population pop(one_template(Link::Xor, AnswerType::Boolean, {AnswerType::Boolean, AnswerType::Boolean}, 0.0));
  auto a = pop.propose("alice", 4);
  auto b = pop.propose("alice", 4);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.problem.target.answer_type, AnswerType::Boolean);
  EXPECT_TRUE(validate_problem(a.problem, 4).empty());
  EXPECT_TRUE(validate_answers(a.problem, a.self_answers, "self").empty());
  EXPECT_NE(pop.propose("bob", 4).problem.target.text, a.problem.target.text);

  Population mix(default_population(4, 2));
  for (int i = 0; i < 40; ++i) {
    auto p = mix.propose("w" + std::to_string(i), 4);
    EXPECT_TRUE(validate_problem(p.problem, 4).empty());
  }
}

TEST(Propose, FiftyWorkersFiftyProblems) {
  Population pop(default_population(4, 12));
  pipeline::Orchestrator o(pipeline::PipelineConfig{});
  auto res = drive(o, pop, {30, 1'000'000, pipeline::Phase::Ranking});
  ASSERT_TRUE(res.finished);
  std::set<ProblemId> ids;
  std::set<WorkerId> proposers;
  for (const auto& p : o.state().problems) {
    ids.insert(p.id);
    proposers.insert(p.proposer);
  }
  EXPECT_EQ(ids.size(), 50u);
  EXPECT_EQ(proposers.size(), 50u);
}

TEST(Answer, XorNoiselessExact) {
  Population pop(one_template(Link::Xor, AnswerType::Boolean, {AnswerType::Boolean, AnswerType::Boolean}, 0.0));
  auto p = proposed(pop, "x");
  auto d = rows_for(pop, p, 300);
  for (std::size_t r = 0; r < d.size(); ++r) EXPECT_EQ(d.y[r], double((d.X(r, 0) != 0.0) != (d.X(r, 1) != 0.0)));
  EXPECT_EQ(pop.answer(p, "r7"), pop.answer(p, "r7"));
}

TEST(Answer, IndependentNoiseMatchesShuffledBaseline) {
  Population pop(one_template(Link::IndependentNoise, AnswerType::Boolean, std::vector<AnswerType>(4, AnswerType::Boolean), 0.0));
  auto d = rows_for(pop, proposed(pop, "n"), 200);
  learner::EvalOptions o;
  o.bootstrap = 20;
  o.forest.n_trees = 60;
  auto rep = learner::bootstrap_and_baseline(d.X, d.y, d.task, 3, o);
  const double boot = std::accumulate(rep.bootstrap_scores.begin(), rep.bootstrap_scores.end(), 0.0) / 20.0;
  const double shuf = std::accumulate(rep.shuffled_scores.begin(), rep.shuffled_scores.end(), 0.0) / 20.0;
  EXPECT_LT(std::abs(boot - shuf), 0.05);
  EXPECT_LE(rep.separation_fraction, 0.3);
}

TEST(Answer, LinearLinkLearnable) {
  Population pop(one_template(Link::Linear, AnswerType::Numeric,
                              {AnswerType::Numeric, AnswerType::Boolean, AnswerType::Boolean, AnswerType::Boolean}, 0.5));
  auto p = proposed(pop, "lin");
  const auto m = pop.model_for("lin");
  EXPECT_EQ(std::abs(m.beta[0]), 2.0);
  auto d = rows_for(pop, p, 200);
  EXPECT_EQ(d.task, Task::Regression);
  learner::ForestOptions f;
  f.n_trees = 100;
  auto cv = learner::cross_validate(d.X, d.y, d.task, 5, 4, f);
  EXPECT_GE(cv.mean(), 0.5);
}

TEST(Answer, UnitsAmbiguityMixesScales) {
  Population pop(one_template(Link::UnitsAmbiguity, AnswerType::Numeric, {AnswerType::Numeric}, 0.3));
  auto p = proposed(pop, "u");
  EXPECT_FALSE(p.target.unit_hint.has_value());
  auto d = rows_for(pop, p, 200);
  std::size_t big = 0;
  for (double y : d.y) big += std::abs(y) > 200.0;
  EXPECT_GT(big, 60u);
  EXPECT_LT(big, 140u);
}

TEST(Answer, PositiveLinksGivePositiveCorrelation) {
  auto cfg = one_template(Link::Linear, AnswerType::Numeric,
                          {AnswerType::Boolean, AnswerType::Boolean, AnswerType::Boolean, AnswerType::Boolean}, 0.5);
  cfg.positive_share = 0.9;
  Population pop(cfg);
  std::vector<double> r;
  for (int i = 0; i < 20; ++i) {
    auto d = rows_for(pop, proposed(pop, "q" + std::to_string(i), ProblemId(i + 1)), 200);
    for (std::size_t j = 0; j < d.X.cols(); ++j) r.push_back(stats::pearson(d.X.column(j), d.y));
  }
  EXPECT_GT(stats::positivity_bias(r, 200, 1).mean_lower, 0.0);
}

TEST(Config, ValidationAndJson) {
  auto c = default_population(4, 8);
  EXPECT_TRUE(validate(c).empty());
  EXPECT_EQ(c.templates.size(), 7u);
  nlohmann::json j = c;
  auto back = j.get<PopulationConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  c.templates[0].noise = 1.5;
  EXPECT_FALSE(validate(c).empty());
  c.templates.clear();
  EXPECT_FALSE(validate(c).empty());
  EXPECT_THROW(Population{c}, ValidationError);
}

TEST(Drive, DeterministicEventLog) {
  pipeline::PipelineConfig cfg;
  cfg.N = 8;
  cfg.L = 3;
  cfg.K_importance = 2;
  cfg.K_learnability = 1;
  cfg.n_target = 10;
  cfg.learnability_per_problem = 3;
  cfg.learnability_floor = 2;
  cfg.seed = 4;
  Population pop(default_population(4, 4));
  pipeline::Orchestrator a(cfg), b(cfg);
  auto ra = drive(a, pop);
  auto rb = drive(b, pop);
  EXPECT_TRUE(ra.finished);
  EXPECT_FALSE(ra.stalled);
  EXPECT_EQ(ra.steps, rb.steps);
  EXPECT_EQ(a.events(), b.events());
  EXPECT_EQ(a.state().phase, pipeline::Phase::Done);
  for (auto id : a.state().selection->selected) EXPECT_EQ(a.state().data_done.at(id), 10u);

  Population other(default_population(4, 5));
  pipeline::Orchestrator c(cfg);
  drive(c, other);
  EXPECT_NE(c.hash(), a.hash());
}

TEST(Drive, StopAtAndStepBudget) {
  Population pop(default_population(4, 4));
  pipeline::Orchestrator o(pipeline::PipelineConfig{});
  auto res = drive(o, pop, {30, 10, {}});
  EXPECT_FALSE(res.finished);
  EXPECT_EQ(res.steps, 10u);
  EXPECT_EQ(sim_worker_name(3), sim_worker_name(3));
  EXPECT_NE(sim_worker_name(3), sim_worker_name(4));
}
