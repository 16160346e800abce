#include "ideation/stats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "ideation/descriptive.hpp"
#include "ideation/rng.hpp"

namespace ideation::stats {

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("y", "length differs from x");
  if (x.size() < 2) throw ValidationError("x", "need at least 2 points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw ValidationError("x", "constant input, correlation undefined");
  if (syy == 0.0) throw ValidationError("y", "constant input, correlation undefined");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationReport redundancy_report(const Dataset& dataset, const learner::EvalReport& eval,
                                    const learner::Forest& forest) {
  CorrelationReport rep;
  rep.problem = dataset.problem_id;
  const auto& y = dataset.y;
  rep.target_constant = std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end();
  bool first = true;
  for (std::size_t j = 0; j < dataset.X.cols(); ++j) {
    const auto col = dataset.X.column(j);
    const bool constant = std::adjacent_find(col.begin(), col.end(), std::not_equal_to<>()) == col.end();
    const double r = (constant || rep.target_constant) ? 0.0 : pearson(col, y);
    rep.r.push_back(r);
    rep.constant.push_back(constant);
    rep.max_corr = first ? r : std::max(rep.max_corr, r);
    rep.max_r2 = std::max(rep.max_r2, r * r);
    first = false;
  }
  rep.train_score = learner::score(dataset.task, y, forest.predict(dataset.X)).value;
  rep.cv_score = eval.cv_scores.empty() ? 0.0 : mean(eval.cv_scores);
  rep.redundant = rep.max_r2 >= 0.95;
  rep.outperforms_single = rep.train_score > rep.max_r2 && rep.cv_score > rep.max_r2;
  return rep;
}

BiasEstimate positivity_bias(std::span<const double> correlations, std::size_t bootstrap, std::uint64_t seed) {
  const std::size_t n = correlations.size();
  if (n < 2) throw ValidationError("correlations", "need at least 2 values");
  if (bootstrap == 0) throw ValidationError("bootstrap", "need at least one resample");
  BiasEstimate out;
  out.n = n;
  out.bootstrap = bootstrap;
  out.mean = mean(correlations);
  out.median = median(correlations);
  std::vector<double> means(bootstrap), medians(bootstrap), sample(n);
  for (std::size_t b = 0; b < bootstrap; ++b) {
    Rng rng(derive_seed(seed, {kBiasStream, b}));
    for (auto& s : sample) s = correlations[rng.below(n)];
    means[b] = mean(sample);
    medians[b] = median(sample);
  }
  out.mean_lower = quantile(means, 0.025);
  out.mean_upper = quantile(means, 0.975);
  out.median_lower = quantile(medians, 0.025);
  out.median_upper = quantile(medians, 0.975);
  return out;
}

namespace {

double u_statistic(std::span<const double> a, std::span<const double> b) {
  double u = 0.0;
  for (double x : a) {
    for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }
  return u;
}

}  // namespace

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty()) throw ValidationError("a", "sample is empty");
  if (b.empty()) throw ValidationError("b", "sample is empty");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;

  TestResult t;
  t.name = "mann_whitney";
  const double u = u_statistic(a, b);
  t.statistic = u;
  t.detail = {{"n_a", na}, {"n_b", nb}};

  // Pooled sort with doubled midranks keeps everything integral.
  std::vector<std::pair<double, bool>> pooled;  // (value, from a)
  for (double v : a) pooled.emplace_back(v, true);
  for (double v : b) pooled.emplace_back(v, false);
  std::sort(pooled.begin(), pooled.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
  std::vector<long long> rank2(n);
  double tie_term = 0.0;
  for (std::size_t s = 0; s < n;) {
    std::size_t e = s;
    while (e + 1 < n && pooled[e + 1].first == pooled[s].first) ++e;
    for (std::size_t i = s; i <= e; ++i) rank2[i] = static_cast<long long>(s + 1 + e + 1);
    const double tsz = static_cast<double>(e - s + 1);
    tie_term += tsz * tsz * tsz - tsz;
    s = e + 1;
  }

  if (n <= kExactMannWhitneyLimit) {
    const long long base = static_cast<long long>(na * (na + 1));
    const long long mu2 = static_cast<long long>(na * nb);
    long long obs2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pooled[i].second) {
        obs2 += rank2[i];
      }
    }
    const long long obs_dev = std::llabs(obs2 - base - mu2);
    std::size_t hits = 0, total = 0;
    const std::uint32_t limit = 1u << n;
    for (std::uint32_t mask = (1u << na) - 1; mask < limit;) {
      long long s2 = 0;
      for (std::uint32_t m = mask; m; m &= m - 1) s2 += rank2[static_cast<std::size_t>(std::countr_zero(m))];
      hits += std::llabs(s2 - base - mu2) >= obs_dev;
      ++total;
      // Gosper's hack: next mask with the same popcount.
      const std::uint32_t c = mask & (~mask + 1);
      const std::uint32_t r = mask + c;
      if (r == 0 || c == 0) break;
      mask = (((r ^ mask) >> 2) / c) | r;
    }
    t.p_value = std::min(1.0, static_cast<double>(hits) / static_cast<double>(total));
    t.detail["method"] = "exact";
    return t;
  }

  const double fa = static_cast<double>(na), fb = static_cast<double>(nb), fn = static_cast<double>(n);
  const double mu = fa * fb / 2.0;
  const double var = fa * fb / 12.0 * ((fn + 1.0) - tie_term / (fn * (fn - 1.0)));
  t.detail["method"] = "normal";
  if (var <= 0.0) {
    t.p_value = 1.0;
    return t;
  }
  const double z = std::max(0.0, std::abs(u - mu) - 0.5) / std::sqrt(var);
  t.detail["z"] = z;
  t.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return t;
}

TestResult chi_square_independence(const CountTable& table) {
  const std::size_t r = table.size();
  if (r < 2) throw ValidationError("table", "need at least 2 rows");
  const std::size_t c = table[0].size();
  if (c < 2) throw ValidationError("table", "need at least 2 columns");
  std::vector<double> rows(r, 0.0), cols(c, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (table[i].size() != c) throw ValidationError("table", "row " + std::to_string(i) + " has a different length");
    for (std::size_t j = 0; j < c; ++j) {
      if (table[i][j] < 0) throw ValidationError("table", "negative count");
      const auto v = static_cast<double>(table[i][j]);
      rows[i] += v;
      cols[j] += v;
      total += v;
    }
  }
  for (std::size_t i = 0; i < r; ++i) {
    if (rows[i] == 0.0) throw ValidationError("table", "row " + std::to_string(i) + " margin is zero");
  }
  for (std::size_t j = 0; j < c; ++j) {
    if (cols[j] == 0.0) throw ValidationError("table", "column " + std::to_string(j) + " margin is zero");
  }
  double stat = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double e = rows[i] * cols[j] / total;
      const double d = static_cast<double>(table[i][j]) - e;
      stat += d * d / e;
    }
  }
  const auto df = static_cast<double>((r - 1) * (c - 1));
  TestResult t;
  t.name = "chi_square";
  t.statistic = stat;
  t.p_value = std::clamp(boost::math::gamma_q(df / 2.0, stat / 2.0), 0.0, 1.0);
  t.detail = {{"df", (r - 1) * (c - 1)}, {"table", table}};
  return t;
}

TestResult fisher_exact_2x2(const std::array<std::array<long long, 2>, 2>& table) {
  for (const auto& row : table) {
    for (auto v : row) {
      if (v < 0) throw ValidationError("table", "negative count");
    }
  }
  const long long a = table[0][0], b = table[0][1], c = table[1][0], d = table[1][1];
  const long long r1 = a + b, r2 = c + d, c1 = a + c, n = r1 + r2;
  if (n == 0) throw ValidationError("table", "all counts are zero");

  auto lchoose = [](long long m, long long k) {
    return std::lgamma(static_cast<long double>(m + 1)) - std::lgamma(static_cast<long double>(k + 1)) -
           std::lgamma(static_cast<long double>(m - k + 1));
  };
  const long long lo = std::max(0LL, c1 - r2), hi = std::min(r1, c1);
  std::vector<long double> prob;
  for (long long x = lo; x <= hi; ++x) prob.push_back(std::exp(lchoose(r1, x) + lchoose(r2, c1 - x) - lchoose(n, c1)));
  const long double observed = prob[static_cast<std::size_t>(a - lo)];
  long double kept = 0.0L, all = 0.0L;
  for (auto p : prob) {
    all += p;
    if (p <= observed * (1.0L + 1e-12L)) kept += p;
  }
  TestResult t;
  t.name = "fisher_exact";
  t.p_value = std::clamp(static_cast<double>(kept / all), 0.0, 1.0);
  t.detail = {{"table", {{a, b}, {c, d}}}};
  return t;
}

Interval proportion_ci(std::size_t successes, std::size_t n, double level) {
  if (n == 0) throw ValidationError("n", "must be positive");
  if (successes > n) throw ValidationError("successes", "exceeds n");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("level", "must lie in (0, 1)");
  const double z = boost::math::quantile(boost::math::normal(), 1.0 - (1.0 - level) / 2.0);
  const double fn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / fn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / fn;
  const double centre = (p + z2 / (2.0 * fn)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / fn + z2 / (4.0 * fn * fn));
  Interval out{p, std::clamp(centre - half, 0.0, p), std::clamp(centre + half, p, 1.0)};
  if (successes == 0) out.lower = 0.0;
  if (successes == n) out.upper = 1.0;
  return out;
}

namespace {

void bump(Histogram& h, int likert) {
  if (likert >= 1 && likert <= 5) ++h[static_cast<std::size_t>(likert - 1)];
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

CategorizationSummary categorization_summary(std::span<const CategorizationRecord> ratings,
                                             std::span<const Problem> problems,
                                             std::span<const std::string> vocabulary) {
  std::map<ProblemId, std::size_t> index;
  CategorizationSummary out;
  for (const auto& p : problems) {
    index[p.id] = out.problems.size();
    ProblemSummary s;
    s.problem = p.id;
    s.objective_by_question.assign(p.question_count(), 0.0);
    s.answerable_by_question.assign(p.question_count(), 0.0);
    out.problems.push_back(std::move(s));
  }
  std::vector<std::vector<std::size_t>> obj(out.problems.size()), ans(out.problems.size());
  for (std::size_t i = 0; i < problems.size(); ++i) {
    obj[i].assign(problems[i].question_count(), 0);
    ans[i].assign(problems[i].question_count(), 0);
  }
  for (std::size_t k = 0; k < ratings.size(); ++k) {
    const auto& r = ratings[k];
    auto it = index.find(r.problem);
    if (it == index.end()) {
      throw ValidationError("ratings[" + std::to_string(k) + "].problem_id",
                            "unknown problem " + std::to_string(r.problem));
    }
    auto& s = out.problems[it->second];
    ++s.ratings;
    ++s.category_counts[r.category];
    bump(s.importance, r.importance);
    bump(s.inputs_useful, r.inputs_useful);
    if (r.diversity) bump(s.diversity, *r.diversity);
    auto& o = obj[it->second];
    auto& a = ans[it->second];
    for (std::size_t q = 0; q < o.size() && q < r.objective_flags.size(); ++q) o[q] += r.objective_flags[q];
    for (std::size_t q = 0; q < a.size() && q < r.answerable_flags.size(); ++q) a[q] += r.answerable_flags[q];
  }

  std::map<std::string, std::size_t> rollup_slot;
  for (const auto& v : vocabulary) {
    rollup_slot[v] = out.categories.size();
    out.categories.push_back({v, 0, {}, 0.0});
  }
  std::vector<std::size_t> roll_obj(out.categories.size(), 0), roll_flags(out.categories.size(), 0);

  for (std::size_t i = 0; i < out.problems.size(); ++i) {
    auto& s = out.problems[i];
    std::size_t obj_total = 0, ans_total = 0;
    for (std::size_t q = 0; q < obj[i].size(); ++q) {
      s.objective_by_question[q] = ratio(obj[i][q], s.ratings);
      s.answerable_by_question[q] = ratio(ans[i][q], s.ratings);
      obj_total += obj[i][q];
      ans_total += ans[i][q];
    }
    s.objective = ratio(obj_total, s.ratings * obj[i].size());
    s.answerable = ratio(ans_total, s.ratings * ans[i].size());
    if (s.ratings == 0) continue;

    std::size_t best = 0;
    for (const auto& v : vocabulary) {
      auto c = s.category_counts.find(v);
      if (c != s.category_counts.end() && c->second > best) {
        best = c->second;
        s.majority_category = v;
      }
    }
    auto slot = rollup_slot.find(s.majority_category);
    if (slot == rollup_slot.end()) continue;
    auto& roll = out.categories[slot->second];
    ++roll.problems;
    for (std::size_t l = 0; l < 5; ++l) roll.inputs_useful[l] += s.inputs_useful[l];
    roll_obj[slot->second] += obj_total;
    roll_flags[slot->second] += s.ratings * obj[i].size();
  }
  for (std::size_t c = 0; c < out.categories.size(); ++c) out.categories[c].objective = ratio(roll_obj[c], roll_flags[c]);
  return out;
}

ProblemCharacteristics problem_characteristics(std::span<const Problem> problems) {
  ProblemCharacteristics out;
  std::vector<double> bool_target, num_target;
  for (const auto& p : problems) {
    std::size_t bool_inputs = 0;
    for (const auto& q : p.inputs) bool_inputs += q.answer_type == AnswerType::Boolean;
    out.questions += p.question_count();
    out.boolean_questions += bool_inputs + (p.target.answer_type == AnswerType::Boolean);
    (p.target.answer_type == AnswerType::Boolean ? bool_target : num_target)
        .push_back(static_cast<double>(bool_inputs));
  }
  out.boolean_targets = bool_target.size();
  out.numeric_targets = num_target.size();
  if (out.questions > 0) out.boolean_share = proportion_ci(out.boolean_questions, out.questions);
  if (!bool_target.empty()) {
    out.boolean_inputs_mean_bool_target = mean(bool_target);
    out.boolean_inputs_median_bool_target = median(bool_target);
  }
  if (!num_target.empty()) {
    out.boolean_inputs_mean_num_target = mean(num_target);
    out.boolean_inputs_median_num_target = median(num_target);
  }
  if (!bool_target.empty() && !num_target.empty()) out.association = mann_whitney_u(bool_target, num_target);
  return out;
}

namespace {

struct ArmCounts {
  std::map<std::string, long long> categories;
  std::array<long long, 5> importance{};
  std::array<long long, 5> inputs_useful{};
  long long answerable = 0, answerable_flags = 0;
  long long objective = 0, objective_flags = 0;
  long long numeric = 0, questions = 0;
};

ArmCounts count_arm(const ArmData& arm) {
  ArmCounts c;
  for (const auto& r : arm.ratings) {
    ++c.categories[r.category];
    if (r.importance >= 1 && r.importance <= 5) ++c.importance[static_cast<std::size_t>(r.importance - 1)];
    if (r.inputs_useful >= 1 && r.inputs_useful <= 5) ++c.inputs_useful[static_cast<std::size_t>(r.inputs_useful - 1)];
    for (bool f : r.answerable_flags) c.answerable += f;
    for (bool f : r.objective_flags) c.objective += f;
    c.answerable_flags += static_cast<long long>(r.answerable_flags.size());
    c.objective_flags += static_cast<long long>(r.objective_flags.size());
  }
  for (const auto& p : arm.problems) {
    c.questions += static_cast<long long>(p.question_count());
    c.numeric += p.target.answer_type == AnswerType::Numeric;
    for (const auto& q : p.inputs) c.numeric += q.answer_type == AnswerType::Numeric;
  }
  return c;
}

TestResult not_computable(std::string name, std::string why) {
  TestResult t;
  t.name = std::move(name);
  t.computable = false;
  t.p_value = 1.0;
  t.detail = {{"reason", std::move(why)}};
  return t;
}

// Drops all-zero columns, then tests; too few columns is reported, not thrown.
TestResult chi_square_rows(const std::vector<long long>& first, const std::vector<long long>& second) {
  CountTable table(2);
  for (std::size_t j = 0; j < first.size(); ++j) {
    if (first[j] + second[j] == 0) continue;
    table[0].push_back(first[j]);
    table[1].push_back(second[j]);
  }
  if (table[0].size() < 2) return not_computable("chi_square", "fewer than two observed levels");
  try {
    return chi_square_independence(table);
  } catch (const ValidationError& e) {
    return not_computable("chi_square", e.what());
  }
}

TestResult fisher_rows(long long yes_a, long long total_a, long long yes_b, long long total_b) {
  if (total_a == 0 || total_b == 0) return not_computable("fisher_exact", "an arm has no observations");
  return fisher_exact_2x2({{{yes_a, total_a - yes_a}, {yes_b, total_b - yes_b}}});
}

}  // namespace

ArmMeans arm_means(const ArmData& arm) {
  const auto c = count_arm(arm);
  ArmMeans m;
  m.label = arm.label;
  double imp = 0.0, use = 0.0;
  long long n = 0, nu = 0;
  for (std::size_t l = 0; l < 5; ++l) {
    imp += static_cast<double>(l + 1) * static_cast<double>(c.importance[l]);
    use += static_cast<double>(l + 1) * static_cast<double>(c.inputs_useful[l]);
    n += c.importance[l];
    nu += c.inputs_useful[l];
  }
  m.importance = n ? imp / static_cast<double>(n) : 0.0;
  m.inputs_useful = nu ? use / static_cast<double>(nu) : 0.0;
  m.answerable = c.answerable_flags ? static_cast<double>(c.answerable) / static_cast<double>(c.answerable_flags) : 0.0;
  m.objective = c.objective_flags ? static_cast<double>(c.objective) / static_cast<double>(c.objective_flags) : 0.0;
  m.numeric = c.questions ? static_cast<double>(c.numeric) / static_cast<double>(c.questions) : 0.0;
  return m;
}

RctComparison rct_compare(const ArmData& baseline, const ArmData& treatment, std::span<const std::string> vocabulary) {
  if (baseline.ratings.empty() && baseline.problems.empty()) throw ValidationError("baseline", "arm is empty");
  if (treatment.ratings.empty() && treatment.problems.empty()) throw ValidationError("treatment", "arm is empty");
  const auto a = count_arm(baseline);
  const auto b = count_arm(treatment);
  RctComparison out;
  out.baseline = arm_means(baseline);
  out.treatment = arm_means(treatment);

  std::vector<std::string> levels(vocabulary.begin(), vocabulary.end());
  for (const auto* counts : {&a.categories, &b.categories}) {
    for (const auto& [cat, _] : *counts) {
      if (std::find(levels.begin(), levels.end(), cat) == levels.end()) levels.push_back(cat);
    }
  }
  std::vector<long long> ca, cb;
  for (const auto& l : levels) {
    auto fa = a.categories.find(l);
    auto fb = b.categories.find(l);
    ca.push_back(fa == a.categories.end() ? 0 : fa->second);
    cb.push_back(fb == b.categories.end() ? 0 : fb->second);
  }
  out.rows.push_back({"categories", chi_square_rows(ca, cb)});
  out.rows.push_back({"importance", chi_square_rows({a.importance.begin(), a.importance.end()},
                                                    {b.importance.begin(), b.importance.end()})});
  out.rows.push_back({"inputs_useful", chi_square_rows({a.inputs_useful.begin(), a.inputs_useful.end()},
                                                       {b.inputs_useful.begin(), b.inputs_useful.end()})});
  out.rows.push_back({"answerable", fisher_rows(a.answerable, a.answerable_flags, b.answerable, b.answerable_flags)});
  out.rows.push_back({"objective", fisher_rows(a.objective, a.objective_flags, b.objective, b.objective_flags)});
  out.rows.push_back({"numeric", fisher_rows(a.numeric, a.questions, b.numeric, b.questions)});
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const TestResult& t) {
  nlohmann::json j{{"name", t.name},
                   {"p_value", t.p_value},
                   {"computable", t.computable},
                   {"significant", t.significant()},
                   {"detail", t.detail}};
  j["statistic"] = t.statistic ? nlohmann::json(*t.statistic) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const CorrelationReport& r) {
  return {{"problem_id", r.problem},
          {"r", r.r},
          {"constant", r.constant},
          {"max_corr", r.max_corr},
          {"max_r2", r.max_r2},
          {"train_score", r.train_score},
          {"cv_score", r.cv_score},
          {"redundant", r.redundant},
          {"outperforms_single", r.outperforms_single},
          {"target_constant", r.target_constant}};
}

nlohmann::json to_json(const BiasEstimate& b) {
  return {{"n", b.n},
          {"bootstrap", b.bootstrap},
          {"mean", b.mean},
          {"mean_ci", {b.mean_lower, b.mean_upper}},
          {"median", b.median},
          {"median_ci", {b.median_lower, b.median_upper}}};
}

nlohmann::json to_json(const Interval& i) { return {{"point", i.point}, {"lower", i.lower}, {"upper", i.upper}}; }

nlohmann::json to_json(const CategorizationSummary& s) {
  nlohmann::json problems = nlohmann::json::array();
  for (const auto& p : s.problems) {
    problems.push_back({{"problem_id", p.problem},
                        {"ratings", p.ratings},
                        {"majority_category", p.majority_category},
                        {"category_counts", p.category_counts},
                        {"importance", p.importance},
                        {"inputs_useful", p.inputs_useful},
                        {"diversity", p.diversity},
                        {"objective_by_question", p.objective_by_question},
                        {"answerable_by_question", p.answerable_by_question},
                        {"objective", p.objective},
                        {"answerable", p.answerable}});
  }
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : s.categories) {
    cats.push_back(
        {{"category", c.category}, {"problems", c.problems}, {"inputs_useful", c.inputs_useful}, {"objective", c.objective}});
  }
  return {{"problems", problems}, {"categories", cats}};
}

nlohmann::json to_json(const ProblemCharacteristics& c) {
  return {{"questions", c.questions},
          {"boolean_questions", c.boolean_questions},
          {"boolean_share", to_json(c.boolean_share)},
          {"boolean_targets", c.boolean_targets},
          {"numeric_targets", c.numeric_targets},
          {"boolean_inputs_mean_bool_target", c.boolean_inputs_mean_bool_target},
          {"boolean_inputs_median_bool_target", c.boolean_inputs_median_bool_target},
          {"boolean_inputs_mean_num_target", c.boolean_inputs_mean_num_target},
          {"boolean_inputs_median_num_target", c.boolean_inputs_median_num_target},
          {"association", c.association ? to_json(*c.association) : nlohmann::json(nullptr)}};
}

nlohmann::json to_json(const ArmMeans& m) {
  return {{"label", m.label},
          {"importance", m.importance},
          {"inputs_useful", m.inputs_useful},
          {"answerable", m.answerable},
          {"objective", m.objective},
          {"numeric", m.numeric}};
}

nlohmann::json to_json(const RctComparison& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    auto j = to_json(row.test);
    j["difference"] = row.difference;
    rows.push_back(std::move(j));
  }
  return {{"baseline", to_json(r.baseline)}, {"treatment", to_json(r.treatment)}, {"rows", rows}};
}

}  // namespace ideation::stats
