#include "ideation/worker_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ideation/rng.hpp"

namespace ideation::sim {

using nlohmann::json;

namespace {

constexpr std::uint64_t kModelStream = 0x6d6f64;
constexpr std::uint64_t kQualityStream = 0x7175616c;
constexpr std::uint64_t kAnswerStream = 0x616e73;
constexpr std::uint64_t kCategoryStream = 0x636174;
constexpr std::uint64_t kCompareStream = 0x636d70;
constexpr std::uint64_t kLikertStream = 0x6c696b;
constexpr std::uint64_t kBalanceStream = 0x62616c;

const char* const kLinkNames[] = {"linear", "threshold", "xor", "independent-noise", "units-ambiguity"};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double uniform_in(Rng& r, double lo, double hi) { return lo + (hi - lo) * r.uniform(); }

LikertProfile discretized_normal(double centre, double sd) {
  LikertProfile p{};
  double total = 0.0;
  for (int k = 1; k <= 5; ++k) {
    const double d = (k - centre) / sd;
    p[static_cast<std::size_t>(k - 1)] = std::exp(-0.5 * d * d);
    total += p[static_cast<std::size_t>(k - 1)];
  }
  for (auto& v : p) v /= total;
  return p;
}

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

struct Draw {
  std::vector<double> x;  // encoded inputs
  double y = 0.0;         // encoded target before unit scaling
};

Draw draw_row(const ProblemModel& m, Rng& r) {
  Draw d;
  for (const auto& in : m.inputs) {
    d.x.push_back(in.type == AnswerType::Boolean ? (r.bernoulli(in.p) ? 1.0 : 0.0) : in.mean + in.sd * r.normal());
  }
  auto standardized = [&](std::size_t j) {
    const auto& in = m.inputs[j];
    if (in.type == AnswerType::Boolean) return (d.x[j] - in.p) / std::sqrt(in.p * (1.0 - in.p));
    return (d.x[j] - in.mean) / in.sd;
  };
  auto flip = [&](bool v) { return r.bernoulli(m.noise) ? !v : v; };
  const bool boolean = m.target == AnswerType::Boolean;
  switch (m.link) {
    case Link::Linear:
    case Link::UnitsAmbiguity: {
      double signal = 0.0, var = 0.0;
      for (std::size_t j = 0; j < d.x.size(); ++j) {
        signal += m.beta[j] * standardized(j);
        var += m.beta[j] * m.beta[j];
      }
      const double eps = m.noise * std::sqrt(var) * r.normal();
      d.y = boolean ? (signal + eps > m.threshold ? 1.0 : 0.0) : 10.0 + signal + eps;
      break;
    }
    case Link::Threshold: {
      const bool above = standardized(0) > m.threshold;
      if (boolean) {
        d.y = flip(above) ? 1.0 : 0.0;
      } else {
        d.y = (above ? 10.0 : 0.0) + m.noise * 5.0 * r.normal();
      }
      break;
    }
    case Link::Xor: {
      const bool v = (d.x[0] != 0.0) != (d.x.size() > 1 && d.x[1] != 0.0);
      d.y = boolean ? (flip(v) ? 1.0 : 0.0) : (v ? 1.0 : 0.0) + m.noise * r.normal();
      break;
    }
    case Link::IndependentNoise:
      d.y = boolean ? (r.bernoulli(m.base_rate) ? 1.0 : 0.0) : 20.0 + 5.0 * r.normal();
      break;
  }
  return d;
}

}  // namespace

std::string_view to_string(Link l) { return kLinkNames[static_cast<int>(l)]; }

Link link_from_string(std::string_view s) {
  for (int i = 0; i < 5; ++i) {
    if (s == kLinkNames[i]) return static_cast<Link>(i);
  }
  throw ValidationError("link", "unknown link '" + std::string(s) + "'");
}

PopulationConfig default_population(std::size_t p, std::uint64_t seed) {
  using AT = AnswerType;
  auto pattern = [p](std::initializer_list<AT> head, AT fill) {
    std::vector<AT> out(head);
    out.resize(p, fill);
    return out;
  };
  PopulationConfig c;
  c.seed = seed;
  c.templates = {
      {"xor", Link::Xor, AT::Boolean, pattern({AT::Boolean, AT::Boolean}, AT::Boolean), 0.0, 1.0},
      {"threshold", Link::Threshold, AT::Boolean, pattern({AT::Numeric}, AT::Boolean), 0.1, 1.5},
      {"linear-boolean", Link::Linear, AT::Boolean, pattern({AT::Boolean, AT::Boolean, AT::Numeric}, AT::Boolean),
       0.5, 2.0},
      {"noise-boolean", Link::IndependentNoise, AT::Boolean, pattern({}, AT::Boolean), 0.0, 2.0},
      {"linear", Link::Linear, AT::Numeric, pattern({AT::Numeric, AT::Numeric, AT::Boolean}, AT::Numeric), 0.5, 1.5},
      {"noise-numeric", Link::IndependentNoise, AT::Numeric, pattern({AT::Numeric, AT::Boolean}, AT::Numeric), 0.0,
       0.5},
      {"units", Link::UnitsAmbiguity, AT::Numeric, pattern({AT::Numeric, AT::Numeric, AT::Numeric}, AT::Boolean), 0.3,
       0.5},
  };
  return c;
}

std::vector<FieldError> validate(const PopulationConfig& c) {
  std::vector<FieldError> errs;
  if (c.templates.empty()) errs.push_back({"templates", "at least one proposal template is required"});
  double weight = 0.0;
  for (std::size_t i = 0; i < c.templates.size(); ++i) {
    const auto& t = c.templates[i];
    const std::string f = "templates[" + std::to_string(i) + "]";
    if (t.inputs.empty()) errs.push_back({f + ".inputs", "need at least one input"});
    if (!(t.noise >= 0.0 && t.noise <= 1.0)) errs.push_back({f + ".noise", "must lie in [0, 1]"});
    if (!(t.weight >= 0.0)) errs.push_back({f + ".weight", "must be nonnegative"});
    if (t.link == Link::Xor && (t.inputs.size() < 2 || t.inputs[0] != AnswerType::Boolean ||
                                t.inputs[1] != AnswerType::Boolean)) {
      errs.push_back({f + ".inputs", "xor needs two leading Boolean inputs"});
    }
    if (t.link == Link::UnitsAmbiguity && t.target != AnswerType::Numeric) {
      errs.push_back({f + ".target", "units ambiguity needs a numeric target"});
    }
    weight += t.weight;
  }
  if (!c.templates.empty() && !(weight > 0.0)) errs.push_back({"templates", "weights sum to zero"});
  if (!(c.quality_spread >= 1.0)) errs.push_back({"quality.spread", "must be at least 1"});
  if (c.quality_count < 2) errs.push_back({"quality.count", "must be at least 2"});
  if (!(c.positive_share >= 0.0 && c.positive_share <= 1.0)) errs.push_back({"positive_share", "must lie in [0, 1]"});
  if (!(c.likert_sd > 0.0)) errs.push_back({"likert_sd", "must be positive"});
  if (c.categories.empty()) errs.push_back({"categories", "vocabulary is empty"});
  for (const auto& [arm, share] : c.arm_numeric_share) {
    if (!(share >= 0.0 && share <= 1.0)) errs.push_back({"arm_numeric_share." + arm, "must lie in [0, 1]"});
  }
  return errs;
}

void to_json(json& j, const PopulationConfig& c) {
  json templates = json::array();
  for (const auto& t : c.templates) {
    json inputs = json::array();
    for (auto a : t.inputs) inputs.push_back(to_string(a));
    templates.push_back({{"name", t.name},
                         {"link", to_string(t.link)},
                         {"target", to_string(t.target)},
                         {"inputs", inputs},
                         {"noise", t.noise},
                         {"weight", t.weight}});
  }
  j = json{{"templates", templates},
           {"quality",
            {{"mode", c.quality_mode == QualityMode::LogSpaced ? "log_spaced" : "log_uniform"},
             {"spread", c.quality_spread},
             {"count", c.quality_count}}},
           {"positive_share", c.positive_share},
           {"likert_sd", c.likert_sd},
           {"arm_numeric_share", c.arm_numeric_share},
           {"categories", c.categories},
           {"seed", c.seed}};
}

void from_json(const json& j, PopulationConfig& c) {
  auto type_of = [](const std::string& s, const std::string& field) {
    if (s == "boolean") return AnswerType::Boolean;
    if (s == "numeric") return AnswerType::Numeric;
    throw ValidationError(field, "expected 'boolean' or 'numeric'");
  };
  const PopulationConfig d;
  c = d;
  if (auto it = j.find("templates"); it != j.end()) {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& t = (*it)[i];
      const std::string f = "templates[" + std::to_string(i) + "]";
      ProposalTemplate pt;
      pt.name = t.value("name", "template" + std::to_string(i));
      pt.link = link_from_string(t.at("link").get<std::string>());
      pt.target = type_of(t.at("target").get<std::string>(), f + ".target");
      for (const auto& in : t.at("inputs")) pt.inputs.push_back(type_of(in.get<std::string>(), f + ".inputs"));
      pt.noise = t.value("noise", 0.5);
      pt.weight = t.value("weight", 1.0);
      c.templates.push_back(std::move(pt));
    }
  }
  if (auto it = j.find("quality"); it != j.end()) {
    const auto mode = it->value("mode", std::string("log_uniform"));
    if (mode != "log_uniform" && mode != "log_spaced") throw ValidationError("quality.mode", "unknown mode '" + mode + "'");
    c.quality_mode = mode == "log_spaced" ? QualityMode::LogSpaced : QualityMode::LogUniform;
    c.quality_spread = it->value("spread", d.quality_spread);
    c.quality_count = it->value("count", d.quality_count);
  }
  c.positive_share = j.value("positive_share", d.positive_share);
  c.likert_sd = j.value("likert_sd", d.likert_sd);
  c.arm_numeric_share = j.value("arm_numeric_share", d.arm_numeric_share);
  c.categories = j.value("categories", d.categories);
  c.seed = j.value("seed", d.seed);
}

// ---------------------------------------------------------------------------

Population::Population(PopulationConfig config) : config_(std::move(config)) {
  if (auto errs = validate(config_); !errs.empty()) throw ValidationError(errs);
  if (config_.quality_mode == QualityMode::LogSpaced) {
    const auto n = config_.quality_count;
    spaced_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      spaced_[k] = std::pow(config_.quality_spread, static_cast<double>(k) / static_cast<double>(n - 1));
    }
    Rng r(derive_seed(config_.seed, {kQualityStream}));
    r.shuffle(spaced_.begin(), spaced_.end());
  }
}

double Population::quality(ProblemId id) const {
  if (id == 0) throw NotFoundError("problem ids start at 1");
  if (!spaced_.empty() && id <= spaced_.size()) return spaced_[id - 1];
  Rng r(derive_seed(config_.seed, {kQualityStream, id}));
  return std::pow(config_.quality_spread, r.uniform());
}

ProblemModel Population::model_for(const WorkerId& proposer, const std::optional<std::string>& arm) const {
  Rng r(derive_seed(config_.seed, {kModelStream, fnv1a(proposer)}));
  const auto& ts = config_.templates;

  std::vector<double> weights;
  for (const auto& t : ts) weights.push_back(t.weight);
  if (arm) {
    if (auto it = config_.arm_numeric_share.find(*arm); it != config_.arm_numeric_share.end()) {
      double wn = 0.0, wb = 0.0;
      for (const auto& t : ts) (t.target == AnswerType::Numeric ? wn : wb) += t.weight;
      for (std::size_t i = 0; i < ts.size(); ++i) {
        const bool numeric = ts[i].target == AnswerType::Numeric;
        const double share = numeric ? it->second : 1.0 - it->second;
        const double pool = numeric ? wn : wb;
        weights[i] = pool > 0.0 ? ts[i].weight / pool * share : 0.0;
      }
    }
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double pick = r.uniform() * total;
  std::size_t ti = 0;
  while (ti + 1 < ts.size() && pick >= weights[ti]) pick -= weights[ti++];
  const auto& t = ts[ti];

  ProblemModel m;
  m.template_index = ti;
  m.link = t.link;
  m.target = t.target;
  m.noise = t.noise;
  for (std::size_t j = 0; j < t.inputs.size(); ++j) {
    InputModel in;
    in.type = t.inputs[j];
    if (in.type == AnswerType::Boolean) {
      in.p = (t.link == Link::Xor && j < 2) ? 0.5 : uniform_in(r, 0.25, 0.75);
    } else {
      in.mean = round3(uniform_in(r, 0.0, 10.0));
      in.sd = round3(uniform_in(r, 1.0, 3.0));
    }
    m.inputs.push_back(in);
  }
  for (std::size_t j = 0; j < t.inputs.size(); ++j) {
    const double magnitude = j == 0 ? 2.0 : uniform_in(r, 0.2, 0.8);
    m.beta.push_back(r.bernoulli(config_.positive_share) ? magnitude : -magnitude);
  }
  if (t.link == Link::Threshold) {
    m.threshold = m.inputs[0].type == AnswerType::Boolean ? 0.0 : uniform_in(r, -0.8, 0.8);
  } else if (t.link == Link::Linear && t.target == AnswerType::Boolean) {
    double var = 0.0;
    for (double b : m.beta) var += b * b;
    m.threshold = uniform_in(r, -0.8, 0.8) * std::sqrt(var);
  }
  m.base_rate = uniform_in(r, 0.15, 0.85);
  m.category = static_cast<std::size_t>(r.below(config_.categories.size()));
  m.usefulness = t.link == Link::IndependentNoise ? 2 : (t.link == Link::UnitsAmbiguity ? 3 : 4);

  if (m.target == AnswerType::Boolean) {
    Rng b(derive_seed(config_.seed, {kBalanceStream, fnv1a(proposer)}));
    std::size_t positives = 0;
    constexpr std::size_t kDraws = 4000;
    for (std::size_t i = 0; i < kDraws; ++i) positives += draw_row(m, b).y != 0.0;
    m.positive_rate = static_cast<double>(positives) / kDraws;
  }
  m.likert = discretized_normal(1.0 + 4.0 * m.positive_rate, config_.likert_sd);
  return m;
}

Proposal Population::propose(const WorkerId& worker, std::size_t p_inputs, const std::optional<std::string>& arm) const {
  const auto m = model_for(worker, arm);
  const auto& t = config_.templates[m.template_index];
  Proposal prop;
  auto& problem = prop.problem;
  problem.proposer = worker;
  problem.arm = arm;
  auto question = [&](AnswerType type, const std::string& what) {
    Question q;
    q.answer_type = type;
    if (type == AnswerType::Boolean) {
      q.text = "Is " + what + " true for you?";
    } else {
      q.text = "What is your value of " + what + "?";
      if (t.link != Link::UnitsAmbiguity) q.unit_hint = "units";
    }
    return q;
  };
  problem.target = question(m.target, t.name + " outcome of " + worker);
  for (std::size_t j = 0; j < p_inputs; ++j) {
    const auto type = j < m.inputs.size() ? m.inputs[j].type : AnswerType::Boolean;
    problem.inputs.push_back(question(type, "factor " + std::to_string(j + 1) + " of " + worker));
  }
  prop.self_answers = answer(problem, worker).answers;
  prop.self_answers.resize(problem.question_count(), AnswerValue{false});
  return prop;
}

ProblemId btl_winner(ProblemId i, double wi, ProblemId j, double wj, double draw) {
  if (!(wi > 0.0) || !(wj > 0.0)) throw ValidationError("w", "qualities must be positive");
  return draw < wj / (wi + wj) ? j : i;
}

int likert_draw(const LikertProfile& profile, double draw) {
  double acc = 0.0;
  for (int k = 0; k < 5; ++k) {
    acc += profile[static_cast<std::size_t>(k)];
    if (draw < acc) return k + 1;
  }
  return 5;
}

ProblemId Population::compare(ProblemId i, ProblemId j, double draw) const {
  if (i == j) throw ValidationError("pair", "a problem cannot be compared with itself");
  return btl_winner(i, quality(i), j, quality(j), draw);
}

int Population::likert(const Problem& problem, double draw) const {
  return likert_draw(model_for(problem.proposer, problem.arm).likert, draw);
}

DataAnswers Population::answer(const Problem& problem, const WorkerId& worker) const {
  const auto m = model_for(problem.proposer, problem.arm);
  Rng r(derive_seed(config_.seed, {kAnswerStream, fnv1a(problem.proposer), problem.id, fnv1a(worker)}));
  const auto d = draw_row(m, r);
  DataAnswers out;
  out.problem = problem.id;
  auto encode = [](AnswerType type, double v) -> AnswerValue {
    if (type == AnswerType::Boolean) return v != 0.0;
    return round3(v);
  };
  double y = d.y;
  if (m.link == Link::UnitsAmbiguity && r.bernoulli(0.5)) y *= 1000.0;
  out.answers.push_back(encode(m.target, y));
  for (std::size_t j = 0; j < problem.inputs.size(); ++j) {
    out.answers.push_back(encode(problem.inputs[j].answer_type, j < d.x.size() ? d.x[j] : 0.0));
  }
  return out;
}

CategorizationRecord Population::categorize(const Problem& problem, const WorkerId& worker, std::uint64_t salt) const {
  const auto m = model_for(problem.proposer, problem.arm);
  Rng r(derive_seed(config_.seed, {kCategoryStream, problem.id, fnv1a(worker), salt}));
  CategorizationRecord rec;
  rec.problem = problem.id;
  const auto& cats = config_.categories;
  rec.category = r.bernoulli(0.7) ? cats[m.category] : cats[r.below(cats.size())];
  const double spread = std::log(std::max(config_.quality_spread, 1.0 + 1e-9));
  const double rel = problem.id == 0 ? 0.5 : std::log(quality(problem.id)) / spread;
  rec.importance = likert_draw(discretized_normal(1.0 + 4.0 * std::clamp(rel, 0.0, 1.0), 1.0), r.uniform());
  rec.inputs_useful = likert_draw(discretized_normal(m.usefulness, 1.0), r.uniform());
  for (std::size_t q = 0; q < problem.question_count(); ++q) {
    rec.objective_flags.push_back(r.bernoulli(0.6));
    rec.answerable_flags.push_back(r.bernoulli(0.85));
  }
  if (problem.target.answer_type == AnswerType::Boolean) {
    rec.diversity = likert_draw(discretized_normal(1.0 + 4.0 * (1.0 - std::abs(2.0 * m.positive_rate - 1.0)), 1.0),
                                r.uniform());
  }
  return rec;
}

Response Population::respond(const pipeline::PipelineState& state, const pipeline::TaskAssignment& a) const {
  using pipeline::TaskKind;
  Response resp;
  resp.worker = a.worker;
  switch (a.kind) {
    case TaskKind::Propose:
      resp.payload = propose(a.worker, state.config.p_inputs, a.arm);
      break;
    case TaskKind::CompareAndCategorize: {
      Rng r(derive_seed(config_.seed, {kCompareStream, a.id}));
      ComparisonJudgment c;
      c.first = a.problems.at(0);
      c.second = a.problems.at(1);
      c.winner = compare(c.first, c.second, r.uniform());
      c.categorizations = {categorize(state.problem(c.first), a.worker, a.id),
                           categorize(state.problem(c.second), a.worker, a.id)};
      resp.payload = std::move(c);
      break;
    }
    case TaskKind::RateLearnability: {
      Rng r(derive_seed(config_.seed, {kLikertStream, a.id}));
      const auto& p = state.problem(a.problems.at(0));
      resp.payload = LearnabilityRating{p.id, likert(p, r.uniform())};
      break;
    }
    case TaskKind::AnswerProblem:
      resp.payload = answer(state.problem(a.problems.at(0)), a.worker);
      break;
    case TaskKind::Categorize:
      resp.payload = categorize(state.problem(a.problems.at(0)), a.worker, a.id);
      break;
  }
  return resp;
}

// ---------------------------------------------------------------------------

std::string sim_worker_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sim-w%05zu", index);
  return buf;
}

bool step(pipeline::Orchestrator& o, const Population& pop, std::size_t window) {
  const auto& s = o.state();
  if (s.phase == pipeline::Phase::Done) return false;
  if (!s.open.empty()) {
    const auto a = s.open.begin()->second;
    o.record_response(a.id, pop.respond(s, a));
    return true;
  }
  const std::uint64_t tick = s.next_assignment - 1;
  auto try_worker = [&](const WorkerId& w) {
    auto task = o.next_task(w, tick);
    if (!task) return false;
    o.record_response(task->id, pop.respond(o.state(), *task));
    return true;
  };
  const std::size_t count = s.workers.size();
  const std::size_t span = std::min(std::max<std::size_t>(window, 1), count);
  if (span > 0) {
    const std::size_t first = count - span;
    const std::size_t start = static_cast<std::size_t>(tick % span);
    for (std::size_t k = 0; k < span; ++k) {
      if (try_worker(sim_worker_name(first + (start + k) % span))) return true;
    }
  }
  const auto fresh = sim_worker_name(count);
  o.register_worker(fresh);
  return try_worker(fresh);
}

DriveResult drive(pipeline::Orchestrator& o, const Population& pop, const DriverOptions& options) {
  DriveResult out;
  auto reached = [&] {
    const auto phase = o.state().phase;
    return phase == pipeline::Phase::Done || (options.stop_at && phase >= *options.stop_at);
  };
  while (out.steps < options.max_steps && !reached()) {
    if (!step(o, pop, options.window)) {
      out.stalled = true;
      break;
    }
    ++out.steps;
  }
  out.finished = reached();
  return out;
}

}  // namespace ideation::sim
