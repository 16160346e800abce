// Operator CLI: init, serve, simulate, rank, train, report, rct-analyze.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ideation/comparison_ranking.hpp"
#include "ideation/error.hpp"
#include "ideation/event_log.hpp"
#include "ideation/learnability.hpp"
#include "ideation/report.hpp"
#include "ideation/service.hpp"
#include "ideation/worker_sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ideation;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string log_dir = "run";
};

std::optional<std::uint64_t> effective_seed(const Globals& g) {
  if (g.seed) return g.seed;
  if (const char* env = std::getenv("IDEATION_SEED"); env && *env) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ValidationError("IDEATION_SEED", "not an unsigned integer: '" + std::string(env) + "'");
    }
  }
  return std::nullopt;
}

pipeline::PipelineConfig config_from(const Globals& g) {
  auto c = g.config.empty() ? pipeline::PipelineConfig{} : store::load_config(g.config);
  if (auto s = effective_seed(g)) c.seed = *s;
  return c;
}

std::vector<pipeline::RctArm> default_arms() {
  return {{"baseline", std::nullopt},
          {"obesity", "Target: Is your body mass index above 30? Inputs: Do you exercise at least three times a week? "
                      "How many servings of vegetables do you eat per day? ..."},
          {"savings", "Target: Do you have savings for at least three months of expenses? Inputs: Do you keep a "
                      "monthly budget? How many credit cards do you hold? ..."}};
}

// A pipeline config may carry the synthetic crowd under "population".
std::optional<json> embedded_population(const std::string& config) {
  if (config.empty()) return std::nullopt;
  std::ifstream in(config);
  if (!in) return std::nullopt;
  const auto j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("population")) return std::nullopt;
  return j["population"];
}

pipeline::PipelineState load_state(const std::string& dir) {
  store::EventLog log(dir);
  return store::recover(log).state();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  out << content;
  if (!out) throw Error("cannot write " + path.string());
}

void emit(const json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << '\n';
  } else {
    write_file(out, j.dump(2) + "\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowdsourced problem ideation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed override (else IDEATION_SEED, else the config seed)");
  app.add_option("--config", g.config, "Pipeline configuration JSON");
  app.add_option("--log-dir", g.log_dir, "Run directory holding config.json and events.jsonl")->capture_default_str();

  // init
  auto* init = app.add_subcommand("init", "Write a configuration and an empty event log");
  bool init_rct = false;
  std::optional<std::size_t> init_n;
  init->add_flag("--rct", init_rct, "Trial mode with three instruction arms");
  init->add_option("--N", init_n, "Number of problems to collect");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the task API over HTTP");
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t serve_bootstrap = 100;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--bootstrap", serve_bootstrap, "Bootstrap replicates used by GET /reports")->capture_default_str();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run the pipeline headless against a synthetic crowd");
  std::string population_file;
  std::string stop_at;
  std::size_t window = 30;
  std::optional<std::size_t> max_steps;
  simulate->add_option("--population", population_file, "Synthetic crowd configuration JSON");
  simulate->add_option("--stop-at", stop_at, "Stop once this phase is reached")
      ->check(CLI::IsMember({"ranking", "collection", "done"}));
  simulate->add_option("--window", window, "Recent workers offered tasks in rotation")->capture_default_str();
  simulate->add_option("--max-steps", max_steps, "Stop after this many tasks");

  // rank
  auto* rank = app.add_subcommand("rank", "Compute rankings from a log or a tally file");
  std::string tally_file;
  bool with_learnability = false;
  std::string rank_out;
  rank->add_option("--tally", tally_file, "Tally JSON {graph, counts} instead of a log");
  rank->add_flag("--learnability", with_learnability, "Include learnability scores");
  rank->add_option("--out", rank_out, "Output file (default stdout)");

  // train
  auto* train = app.add_subcommand("train", "Fit and evaluate forests on collected datasets");
  std::optional<ProblemId> train_problem;
  std::string train_csv, train_task = "auto";
  report::ReportOptions train_opts;
  std::string train_out;
  train->add_option("--problem", train_problem, "Problem id (default: every selected problem)");
  train->add_option("--csv", train_csv, "Evaluate a CSV dataset (x1..xp,y) instead of a log");
  train->add_option("--task", train_task, "classification | regression | auto (CSV only)")
      ->check(CLI::IsMember({"auto", "classification", "regression"}));
  train->add_option("--k", train_opts.k)->capture_default_str();
  train->add_option("--bootstrap", train_opts.bootstrap)->capture_default_str();
  train->add_option("--trees", train_opts.n_trees)->capture_default_str();
  train->add_option("--out", train_out, "Output file (default stdout)");

  // report
  auto* rep = app.add_subcommand("report", "Emit the analysis bundle");
  report::ReportOptions rep_opts;
  std::string rep_out;
  bool no_train = false;
  rep->add_option("--out", rep_out, "Output directory (default: JSON to stdout)");
  rep->add_option("--k", rep_opts.k)->capture_default_str();
  rep->add_option("--bootstrap", rep_opts.bootstrap)->capture_default_str();
  rep->add_option("--trees", rep_opts.n_trees)->capture_default_str();
  rep->add_flag("--no-train", no_train, "Skip model evaluation");

  // rct-analyze
  auto* rct = app.add_subcommand("rct-analyze", "Trial battery over two logs or over the arm tags of one log");
  std::string baseline_dir, treatment_dir, baseline_label = "baseline", treatment_label = "treatment", rct_out;
  rct->add_option("--baseline-log", baseline_dir, "Run directory of the baseline arm");
  rct->add_option("--treatment-log", treatment_dir, "Run directory of the treatment arm");
  rct->add_option("--baseline-label", baseline_label)->capture_default_str();
  rct->add_option("--treatment-label", treatment_label)->capture_default_str();
  rct->add_option("--out", rct_out, "Output directory for battery.json and the CSV tables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*init) {
      auto c = config_from(g);
      if (init_rct) c.rct_arms = default_arms();
      if (init_n) c.N = *init_n;
      store::init_run(g.log_dir, c);
      std::cout << "initialized " << (fs::path(g.log_dir) / store::kConfigFile).string() << '\n';
    } else if (*serve) {
      store::EventLog log(g.log_dir);
      if (!log.has_events() && !fs::exists(log.config_path())) store::init_run(g.log_dir, config_from(g));
      auto orch = store::open_run(log);
      service::ServiceOptions opts;
      opts.report.bootstrap = serve_bootstrap;
      opts.report.seed = orch.state().config.seed;
      service::Service svc(orch, opts, &log);
      service::HttpServer server(svc);
      const int bound = server.bind(host, port);
      if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
      std::cout << "listening on http://" << host << ':' << bound << std::endl;
      if (!server.listen()) throw Error("server stopped unexpectedly");
    } else if (*simulate) {
      store::EventLog log(g.log_dir);
      if (!log.has_events() && !fs::exists(log.config_path())) store::init_run(g.log_dir, config_from(g));
      auto orch = store::open_run(log);
      const auto& cfg = orch.state().config;
      sim::PopulationConfig pc;
      if (!population_file.empty()) {
        std::ifstream in(population_file);
        if (!in) throw NotFoundError("population file " + population_file + " not found");
        pc = json::parse(in).get<sim::PopulationConfig>();
      } else if (auto embedded = embedded_population(g.config)) {
        pc = embedded->get<sim::PopulationConfig>();
      } else {
        pc = sim::default_population(cfg.p_inputs, cfg.seed);
      }
      if (auto s = effective_seed(g)) pc.seed = *s;
      pc.categories = cfg.categories;
      sim::Population pop(pc);
      sim::DriverOptions dopts;
      dopts.window = window;
      if (max_steps) dopts.max_steps = *max_steps;
      if (!stop_at.empty()) dopts.stop_at = pipeline::phase_from_string(stop_at);
      const auto result = sim::drive(orch, pop, dopts);
      log.write_snapshot(orch.state());
      const auto& s = orch.state();
      json out{{"phase", pipeline::to_string(s.phase)},
               {"steps", result.steps},
               {"finished", result.finished},
               {"stalled", result.stalled},
               {"events", s.last_seq},
               {"workers", s.workers.size()},
               {"state_hash", pipeline::hash_hex(pipeline::state_hash(s))}};
      out["selected"] = s.selection ? json(s.selection->selected) : json::array();
      std::cout << out.dump(2) << '\n';
      if (result.stalled) return 2;
    } else if (*rank) {
      json out;
      if (!tally_file.empty()) {
        std::ifstream in(tally_file);
        if (!in) throw NotFoundError("tally file " + tally_file + " not found");
        const auto tally = ranking::tally_from_json(json::parse(in));
        const auto scores = ranking::rank_centrality(tally);
        std::vector<std::size_t> order(scores.order.begin(), scores.order.end());
        out = {{"scores", scores.u}, {"order", order}};
      } else {
        const auto s = load_state(g.log_dir);
        out = report::provisional_rankings_json(s);
        if (!with_learnability) out.erase("learnability_scores");
      }
      emit(out, rank_out);
    } else if (*train) {
      train_opts.seed = effective_seed(g).value_or(0);
      json out = json::array();
      if (!train_csv.empty()) {
        std::ifstream in(train_csv);
        if (!in) throw NotFoundError("dataset " + train_csv + " not found");
        const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        Task task = Task::Classification;
        if (train_task == "regression") task = Task::Regression;
        auto ds = dataset_from_csv(text, train_problem.value_or(0), task);
        if (train_task == "auto") {
          const bool binary = std::all_of(ds.y.begin(), ds.y.end(), [](double v) { return v == 0.0 || v == 1.0; });
          if (!binary) ds = dataset_from_csv(text, train_problem.value_or(0), Task::Regression);
        }
        out.push_back(report::to_json(report::evaluate_dataset(ds, train_opts)));
      } else {
        const auto s = load_state(g.log_dir);
        if (!effective_seed(g)) train_opts.seed = s.config.seed;
        if (!s.selection) throw StateError("no problems have been selected yet");
        bool found = false;
        for (const auto& a : pipeline::assemble_datasets(s)) {
          if (train_problem && a.dataset.problem_id != *train_problem) continue;
          found = true;
          out.push_back(report::to_json(report::evaluate_dataset(a.dataset, train_opts)));
        }
        if (!found) throw NotFoundError("problem " + std::to_string(*train_problem) + " is not selected");
      }
      emit(train_problem ? out.at(0) : out, train_out);
    } else if (*rep) {
      const auto s = load_state(g.log_dir);
      rep_opts.seed = effective_seed(g).value_or(s.config.seed);
      rep_opts.train = !no_train;
      const auto bundle = report::build_report(s, rep_opts);
      if (rep_out.empty()) {
        std::cout << bundle.dump(2) << '\n';
      } else {
        fs::create_directories(rep_out);
        write_file(fs::path(rep_out) / "report.json", bundle.dump(2) + "\n");
        if (s.config.rct_arms.size() >= 2) {
          const auto b = report::rct_battery(report::arms_by_tag(s), s.config.categories);
          write_file(fs::path(rep_out) / "arm_means.csv", report::arm_means_csv(b));
          write_file(fs::path(rep_out) / "battery.csv", report::battery_csv(b));
        }
        std::cout << "wrote " << (fs::path(rep_out) / "report.json").string() << '\n';
      }
    } else if (*rct) {
      std::vector<stats::ArmData> arms;
      std::vector<std::string> vocab;
      if (!baseline_dir.empty() || !treatment_dir.empty()) {
        if (baseline_dir.empty() || treatment_dir.empty()) {
          throw ValidationError("rct-analyze", "give both --baseline-log and --treatment-log");
        }
        const auto a = load_state(baseline_dir);
        const auto b = load_state(treatment_dir);
        arms.push_back(report::arm_from_state(a, baseline_label));
        arms.push_back(report::arm_from_state(b, treatment_label));
        vocab = a.config.categories;
      } else {
        const auto s = load_state(g.log_dir);
        arms = report::arms_by_tag(s);
        vocab = s.config.categories;
      }
      const auto battery = report::rct_battery(arms, vocab);
      const auto j = report::to_json(battery);
      if (rct_out.empty()) {
        std::cout << j.dump(2) << '\n';
      } else {
        fs::create_directories(rct_out);
        write_file(fs::path(rct_out) / "battery.json", j.dump(2) + "\n");
        write_file(fs::path(rct_out) / "arm_means.csv", report::arm_means_csv(battery));
        write_file(fs::path(rct_out) / "battery.csv", report::battery_csv(battery));
        std::cout << report::battery_csv(battery);
      }
    }
  } catch (const ReplayError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
