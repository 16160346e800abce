#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ideation/error.hpp"
#include "ideation/rng.hpp"
#include "ideation/stats.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ideation;
using namespace ideation::stats;
using namespace ideation::testing;

namespace {

std::vector<double> sample(Rng& rng, std::size_t n, int levels) {
  std::vector<double> v(n);
  for (auto& x : v) x = double(rng.below(static_cast<std::uint64_t>(levels)));
  return v;
}

double pct(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * double(v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - double(i)) * (v[i + 1] - v[i]);
}

}  // namespace

TEST(Pearson, Examples) {
  std::vector<double> x{1, 2, 3, 4.5}, neg{-1, -2, -3, -4.5};
  EXPECT_NEAR(pearson(x, x), 1.0, 1e-12);
  EXPECT_NEAR(pearson(x, neg), -1.0, 1e-12);
  std::vector<double> b{1, 0, 1, 0}, nb{0, 1, 0, 1};
  EXPECT_NEAR(pearson(b, b), 1.0, 1e-12);
  EXPECT_NEAR(pearson(b, nb), -1.0, 1e-12);
}

TEST(Pearson, PhiFromCounts) {
  // a=3 (1,1), b=1 (1,0), c=1 (0,1), d=3 (0,0)
  std::vector<double> x{1, 1, 1, 1, 0, 0, 0, 0}, y{1, 1, 1, 0, 1, 0, 0, 0};
  EXPECT_NEAR(pearson(x, y), 0.5, 1e-12);
}

TEST(Pearson, Errors) {
  std::vector<double> c{2, 2, 2}, x{1, 2, 3}, shortv{1};
  EXPECT_THROW(pearson(c, x), ValidationError);
  EXPECT_THROW(pearson(x, c), ValidationError);
  EXPECT_THROW(pearson(shortv, shortv), ValidationError);
  EXPECT_THROW(pearson(x, std::vector<double>{1, 2}), ValidationError);
}

TEST(PearsonProperty, SymmetryAffineSign) {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(12), y(12);
    for (std::size_t i = 0; i < 12; ++i) {
      x[i] = rng.normal();
      y[i] = x[i] * 0.3 + rng.normal();
    }
    const double r = pearson(x, y);
    EXPECT_GE(r, -1.0);
    EXPECT_LE(r, 1.0);
    EXPECT_NEAR(pearson(y, x), r, 1e-12);
    auto ax = x;
    for (auto& v : ax) v = 4.0 * v - 7.0;
    EXPECT_NEAR(pearson(ax, y), r, 1e-12);
    for (auto& v : ax) v = -v;
    EXPECT_NEAR(pearson(ax, y), -r, 1e-12);
  }
}

TEST(MannWhitney, Examples) {
  auto t = mann_whitney_u(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6});
  EXPECT_EQ(*t.statistic, 0.0);
  EXPECT_NEAR(t.p_value, 0.1, 1e-12);
  EXPECT_EQ(t.name, "mann_whitney");
  EXPECT_EQ(t.detail["method"], "exact");

  std::vector<double> a{3, 1, 4, 1, 5};
  EXPECT_EQ(*mann_whitney_u(a, std::vector<double>{1, 1, 3, 4, 5}).statistic, 12.5);
  EXPECT_EQ(*mann_whitney_u(std::vector<double>{1, 1}, std::vector<double>{1, 1}).statistic, 2.0);
  EXPECT_THROW(mann_whitney_u(std::vector<double>{}, a), ValidationError);
}

TEST(MannWhitney, ExactMatchesEnumeration) {
  Rng rng(2);
  for (int t = 0; t < 150; ++t) {
    const std::size_t na = 1 + rng.below(6), nb = 1 + rng.below(12 - na);
    auto a = sample(rng, na, 1 + static_cast<int>(rng.below(8)));
    auto b = sample(rng, nb, 1 + static_cast<int>(rng.below(8)));
    auto res = mann_whitney_u(a, b);
    EXPECT_EQ(*res.statistic, u_of(a, b));
    EXPECT_NEAR(res.p_value, mwu_oracle(a, b), 1e-12) << "na=" << na << " nb=" << nb;
  }
}

TEST(MannWhitney, NormalApproximationLargeSamples) {
  Rng rng(3);
  std::vector<double> a(34), b(16);
  for (auto& v : a) v = rng.normal() + 0.5;
  for (auto& v : b) v = rng.normal();
  auto t = mann_whitney_u(a, b);
  EXPECT_EQ(t.detail["method"], "normal");
  // No ties: var = na nb (n + 1) / 12
  const double var = 34.0 * 16.0 * 51.0 / 12.0;
  const double z = (std::abs(*t.statistic - 272.0) - 0.5) / std::sqrt(var);
  EXPECT_NEAR(t.p_value, std::erfc(z / std::sqrt(2.0)), 1e-12);
}

TEST(MannWhitneyProperty, Complementary) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    auto a = sample(rng, 1 + rng.below(30), 6);
    auto b = sample(rng, 1 + rng.below(30), 6);
    const double u = *mann_whitney_u(a, b).statistic + *mann_whitney_u(b, a).statistic;
    EXPECT_EQ(u, double(a.size() * b.size()));
    EXPECT_GE(mann_whitney_u(a, b).p_value, 0.0);
    EXPECT_LE(mann_whitney_u(a, b).p_value, 1.0);
    EXPECT_EQ(*mann_whitney_u(a, a).statistic, double(a.size() * a.size()) / 2.0);
  }
}

TEST(ChiSquare, Examples) {
  auto flat = chi_square_independence({{10, 10}, {10, 10}});
  EXPECT_EQ(*flat.statistic, 0.0);
  EXPECT_NEAR(flat.p_value, 1.0, 1e-12);
  auto split = chi_square_independence({{20, 0}, {0, 20}});
  EXPECT_NEAR(*split.statistic, 40.0, 1e-12);
  EXPECT_EQ(split.detail["df"], 1);
  EXPECT_LT(split.p_value, 1e-9);
  EXPECT_NEAR(split.p_value, std::erfc(std::sqrt(20.0)), 1e-15);
}

TEST(ChiSquare, ZeroMarginNamed) {
  try {
    chi_square_independence({{1, 0, 2}, {3, 0, 4}});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("column 1"), std::string::npos);
  }
  EXPECT_THROW(chi_square_independence({{0, 0}, {1, 2}}), ValidationError);
}

TEST(ChiSquare, MatchesOracleAndClosedFormTails) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t r = 2, c = 2 + rng.below(2);
    CountTable table(r, std::vector<long long>(c));
    for (auto& row : table) {
      for (auto& v : row) v = 1 + static_cast<long long>(rng.below(30));
    }
    auto res = chi_square_independence(table);
    const double x = chi_oracle(table);
    EXPECT_NEAR(*res.statistic, x, 1e-9);
    const double tail = c == 2 ? std::erfc(std::sqrt(x / 2.0)) : std::exp(-x / 2.0);
    EXPECT_NEAR(res.p_value, tail, 1e-10);
  }
}

TEST(ChiSquareProperty, PermutationInvariant) {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    CountTable table(3, std::vector<long long>(4));
    for (auto& row : table) {
      for (auto& v : row) v = 1 + static_cast<long long>(rng.below(20));
    }
    const double x = *chi_square_independence(table).statistic;
    auto rows = table;
    std::rotate(rows.begin(), rows.begin() + 1, rows.end());
    EXPECT_NEAR(*chi_square_independence(rows).statistic, x, 1e-9);
    for (auto& row : rows) std::reverse(row.begin(), row.end());
    EXPECT_NEAR(*chi_square_independence(rows).statistic, x, 1e-9);
  }
}

TEST(Fisher, Examples) {
  EXPECT_NEAR(fisher_exact_2x2({{{3, 1}, {1, 3}}}).p_value, 34.0 / 70.0, 1e-12);
  for (long long n : {1, 3, 6, 10}) {
    EXPECT_NEAR(fisher_exact_2x2({{{0, n}, {n, 0}}}).p_value, 2.0 / choose(2 * n, n), 1e-12);
  }
  EXPECT_EQ(fisher_exact_2x2({{{0, 0}, {4, 7}}}).p_value, 1.0);
  EXPECT_FALSE(fisher_exact_2x2({{{3, 1}, {1, 3}}}).statistic.has_value());
  EXPECT_THROW(fisher_exact_2x2({{{-1, 1}, {1, 3}}}), ValidationError);
}

TEST(FisherProperty, EnumerationAndSymmetry) {
  Rng rng(7);
  for (int t = 0; t < 300; ++t) {
    long long v[4];
    long long left = 10;
    for (auto& x : v) {
      x = static_cast<long long>(rng.below(static_cast<std::uint64_t>(left + 1)));
      left -= x;
    }
    if (v[0] + v[1] + v[2] + v[3] == 0) continue;
    const double p = fisher_exact_2x2({{{v[0], v[1]}, {v[2], v[3]}}}).p_value;
    EXPECT_NEAR(p, fisher_oracle(v[0], v[1], v[2], v[3]), 1e-9);
    EXPECT_NEAR(fisher_exact_2x2({{{v[0], v[2]}, {v[1], v[3]}}}).p_value, p, 1e-12);
    EXPECT_NEAR(fisher_exact_2x2({{{v[3], v[2]}, {v[1], v[0]}}}).p_value, p, 1e-12);
  }
}

TEST(ProportionCi, BooleanShare) {
  auto ci = proportion_ci(177, 250);
  EXPECT_NEAR(ci.point, 0.708, 1e-12);
  EXPECT_NEAR(ci.lower, 0.6474, 0.015);
  EXPECT_NEAR(ci.upper, 0.7636, 0.015);
  // Wilson by hand with z = 1.959964
  const double z = 1.959963984540054, n = 250.0, p = 0.708;
  const double centre = (p + z * z / (2 * n)) / (1 + z * z / n);
  const double half = z / (1 + z * z / n) * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n));
  EXPECT_NEAR(ci.lower, centre - half, 1e-12);
  EXPECT_NEAR(ci.upper, centre + half, 1e-12);
}

TEST(ProportionCi, Boundaries) {
  EXPECT_EQ(proportion_ci(0, 9).lower, 0.0);
  EXPECT_EQ(proportion_ci(9, 9).upper, 1.0);
  EXPECT_THROW(proportion_ci(3, 2), ValidationError);
  EXPECT_THROW(proportion_ci(0, 0), ValidationError);
}

TEST(ProportionCiProperty, ContainsPoint) {
  for (std::size_t n = 1; n <= 60; ++n) {
    for (std::size_t s = 0; s <= n; ++s) {
      for (double level : {0.8, 0.95, 0.99}) {
        auto ci = proportion_ci(s, n, level);
        EXPECT_LE(0.0, ci.lower);
        EXPECT_LE(ci.lower, ci.point);
        EXPECT_LE(ci.point, ci.upper);
        EXPECT_LE(ci.upper, 1.0);
      }
    }
  }
}

TEST(PositivityBias, ConstantAndSymmetric) {
  std::vector<double> c(8, 0.3);
  auto b = positivity_bias(c, 200, 1);
  EXPECT_NEAR(b.mean, 0.3, 1e-12);
  EXPECT_NEAR(b.median, 0.3, 1e-12);
  EXPECT_NEAR(b.mean_lower, b.mean_upper, 1e-12);
  std::vector<double> sym{-0.4, 0.4, -0.1, 0.1, -0.25, 0.25, -0.05, 0.05};
  auto s = positivity_bias(sym, 1000, 2);
  EXPECT_LT(s.mean_lower, 0.0);
  EXPECT_GT(s.mean_upper, 0.0);
  EXPECT_THROW(positivity_bias(std::vector<double>{0.1}, 10, 1), ValidationError);
}

TEST(PositivityBias, MatchesBruteForce) {
  const std::vector<double> r{0.31, -0.12, 0.05, 0.44, 0.18, -0.02, 0.27, 0.09, 0.6, -0.2};
  const std::size_t B = 1000;
  const std::uint64_t seed = 99;
  std::vector<double> means, medians;
  for (std::size_t b = 0; b < B; ++b) {
    Rng rng(derive_seed(seed, {kBiasStream, b}));
    std::vector<double> s;
    for (std::size_t i = 0; i < r.size(); ++i) s.push_back(r[rng.below(r.size())]);
    means.push_back(std::accumulate(s.begin(), s.end(), 0.0) / double(s.size()));
    std::sort(s.begin(), s.end());
    medians.push_back((s[4] + s[5]) / 2.0);
  }
  auto est = positivity_bias(r, B, seed);
  EXPECT_NEAR(est.mean, 0.16, 1e-12);
  EXPECT_NEAR(est.median, 0.135, 1e-12);
  EXPECT_NEAR(est.mean_lower, pct(means, 0.025), 1e-12);
  EXPECT_NEAR(est.mean_upper, pct(means, 0.975), 1e-12);
  EXPECT_NEAR(est.median_lower, pct(medians, 0.025), 1e-12);
  EXPECT_NEAR(est.median_upper, pct(medians, 0.975), 1e-12);
}

TEST(Redundancy, DuplicatedTargetFlagged) {
  Rng rng(8);
  Dataset ds;
  ds.problem_id = 3;
  ds.task = Task::Classification;
  ds.X = Matrix(0, 4);
  for (int i = 0; i < 200; ++i) {
    const double y = double(rng.bernoulli(0.4));
    ds.X.push_row(std::vector<double>{y, double(rng.bernoulli(0.5)), 1.0, double(rng.bernoulli(0.5))});
    ds.y.push_back(y);
  }
  learner::EvalOptions o;
  o.bootstrap = 2;
  o.forest.n_trees = 10;
  auto eval = learner::bootstrap_and_baseline(ds.X, ds.y, ds.task, 1, o);
  auto forest = learner::train_forest(ds.X, ds.y, ds.task, 1, o.forest);
  auto rep = redundancy_report(ds, eval, forest);
  EXPECT_NEAR(rep.max_corr, 1.0, 1e-12);
  EXPECT_TRUE(rep.redundant);
  EXPECT_TRUE(rep.constant[2]);
  EXPECT_EQ(rep.r[2], 0.0);
  EXPECT_EQ(rep.train_score, 1.0);
  EXPECT_EQ(rep.problem, 3u);
}

TEST(Redundancy, NoisePredictorsSmall) {
  Rng rng(9);
  std::size_t large = 0;
  for (int t = 0; t < 50; ++t) {
    Dataset ds;
    ds.task = Task::Regression;
    ds.X = Matrix(0, 4);
    for (int i = 0; i < 200; ++i) {
      std::vector<double> row(4);
      for (auto& v : row) v = double(rng.bernoulli(0.5));
      ds.X.push_row(row);
      ds.y.push_back(rng.normal());
    }
    learner::EvalReport eval;
    auto forest = learner::train_forest(ds.X, ds.y, ds.task, 1, learner::ForestOptions{3, {}});
    auto rep = redundancy_report(ds, eval, forest);
    EXPECT_FALSE(rep.redundant);
    for (double r : rep.r) large += std::abs(r) >= 0.25;
  }
  EXPECT_EQ(large, 0u);
}

TEST(Categorization, MajorityTiesAndObjective) {
  const auto vocab = default_category_vocabulary();
  std::vector<Problem> problems{make_problem(1, AnswerType::Boolean), make_problem(2, AnswerType::Numeric)};
  std::vector<bool> all(5, true);
  std::vector<CategorizationRecord> rs{
      rating(1, vocab[2], 4, 2, all, all),
      rating(1, vocab[2], 5, 3, all, all),
      rating(1, vocab[0], 3, 3, all, all),
      rating(2, vocab[3], 2, 4, {true, true, false, true, true}, all),
      rating(2, vocab[1], 2, 4, {true, true, false, true, true}, {false, true, true, true, true}),
  };
  auto s = categorization_summary(rs, problems, vocab);
  ASSERT_EQ(s.problems.size(), 2u);
  EXPECT_EQ(s.problems[0].majority_category, vocab[2]);
  EXPECT_EQ(s.problems[1].majority_category, vocab[1]);  // tie, vocabulary order
  EXPECT_NEAR(s.problems[1].objective, 0.8, 1e-12);
  EXPECT_NEAR(s.problems[1].answerable, 0.9, 1e-12);
  EXPECT_NEAR(s.problems[1].answerable_by_question[0], 0.5, 1e-12);
  EXPECT_EQ(s.problems[0].importance[3], 1u);
  EXPECT_EQ(s.problems[0].ratings, 3u);
  ASSERT_EQ(s.categories.size(), vocab.size());
  EXPECT_EQ(s.categories[2].problems, 1u);

  rs.push_back(rating(77, vocab[0], 1, 1, all, all));
  EXPECT_THROW(categorization_summary(rs, problems, vocab), ValidationError);
}

TEST(Characteristics, BooleanShareAndAssociation) {
  std::vector<Problem> ps;
  for (ProblemId id = 1; id <= 10; ++id) {
    auto p = make_problem(id, id <= 6 ? AnswerType::Boolean : AnswerType::Numeric);
    if (id > 6) p.inputs[0].answer_type = AnswerType::Numeric;
    ps.push_back(p);
  }
  auto c = problem_characteristics(ps);
  EXPECT_EQ(c.questions, 50u);
  EXPECT_EQ(c.boolean_targets, 6u);
  EXPECT_EQ(c.numeric_targets, 4u);
  EXPECT_EQ(c.boolean_questions, 6u * 5 + 4u * 3);
  EXPECT_NEAR(c.boolean_share.point, 42.0 / 50.0, 1e-12);
  EXPECT_EQ(c.boolean_inputs_mean_bool_target, 4.0);
  EXPECT_EQ(c.boolean_inputs_median_num_target, 3.0);
  ASSERT_TRUE(c.association.has_value());
  EXPECT_EQ(*c.association->statistic, 24.0);
}

namespace {

ArmData arm(std::string label, std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  const auto vocab = default_category_vocabulary();
  ArmData a;
  a.label = std::move(label);
  for (ProblemId id = 1; id <= n; ++id) {
    auto p = make_problem(id, rng.bernoulli(0.5) ? AnswerType::Boolean : AnswerType::Numeric);
    a.problems.push_back(p);
    for (int k = 0; k < 3; ++k) {
      std::vector<bool> o(5), an(5);
      for (std::size_t q = 0; q < 5; ++q) {
        o[q] = rng.bernoulli(0.6);
        an[q] = rng.bernoulli(0.8);
      }
      a.ratings.push_back(rating(id, vocab[rng.below(vocab.size())], 1 + int(rng.below(5)), 1 + int(rng.below(5)), o, an));
    }
  }
  return a;
}

}  // namespace

TEST(Rct, IdenticalArmsNotSignificant) {
  auto base = arm("baseline", 1, 20);
  auto copy = base;
  copy.label = "copy";
  auto cmp = rct_compare(base, copy, default_category_vocabulary());
  ASSERT_EQ(cmp.rows.size(), 6u);
  const std::vector<std::string> names{"categories", "importance", "inputs_useful", "answerable", "objective", "numeric"};
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(cmp.rows[i].difference, names[i]);
    EXPECT_TRUE(cmp.rows[i].test.computable);
    EXPECT_NEAR(cmp.rows[i].test.p_value, 1.0, 1e-9) << names[i];
    EXPECT_FALSE(cmp.rows[i].test.significant());
  }
  EXPECT_EQ(cmp.rows[0].test.name, "chi_square");
  EXPECT_EQ(cmp.rows[5].test.name, "fisher_exact");
  EXPECT_EQ(cmp.baseline.importance, cmp.treatment.importance);
}

TEST(Rct, DisjointCategories) {
  const auto vocab = default_category_vocabulary();
  ArmData a{"a", {}, {}}, b{"b", {}, {}};
  std::vector<bool> f(5, true);
  for (int i = 0; i < 15; ++i) {
    a.ratings.push_back(rating(1, vocab[0], 3, 3, f, f));
    b.ratings.push_back(rating(1, vocab[3], 3, 3, f, f));
  }
  auto cmp = rct_compare(a, b, vocab);
  EXPECT_LT(cmp.rows[0].test.p_value, 0.01);
  EXPECT_TRUE(cmp.rows[0].test.significant());
  EXPECT_FALSE(cmp.rows[1].test.computable);  // a single importance level
  EXPECT_FALSE(cmp.rows[5].test.computable);  // no problems
  EXPECT_THROW(rct_compare(ArmData{}, b, vocab), ValidationError);
}

TEST(Json, BatteryShape) {
  auto cmp = rct_compare(arm("baseline", 1, 10), arm("treatment", 2, 10), default_category_vocabulary());
  auto j = to_json(cmp);
  EXPECT_EQ(j["rows"].size(), 6u);
  EXPECT_EQ(j["rows"][0]["difference"], "categories");
  EXPECT_TRUE(j["rows"][0].contains("p_value"));
  EXPECT_EQ(j["baseline"]["label"], "baseline");
  EXPECT_TRUE(to_json(fisher_exact_2x2({{{1, 2}, {3, 4}}}))["statistic"].is_null());
}
