#include "ideation/service.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <random>

#include <httplib.h>

#include "ideation/comparison_ranking.hpp"
#include "ideation/error.hpp"

namespace ideation::service {

using nlohmann::json;

namespace {

Reply json_reply(int status, const json& body) { return {status, "application/json", body.dump()}; }

Reply error_reply(int status, std::string_view type, const std::string& message, json fields = json::array()) {
  return json_reply(status, {{"error", {{"type", type}, {"message", message}, {"fields", std::move(fields)}}}});
}

json fields_json(const std::vector<FieldError>& fields, const std::string& prefix = {}) {
  json out = json::array();
  for (const auto& f : fields) out.push_back({{"field", prefix + f.field}, {"reason", f.reason}});
  return out;
}

std::optional<std::uint64_t> parse_id(std::string_view s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string random_token() {
  static std::mutex m;
  static std::random_device rd;
  std::lock_guard lock(m);
  char buf[33];
  for (int i = 0; i < 4; ++i) std::snprintf(buf + 8 * i, 9, "%08x", static_cast<unsigned>(rd()));
  return buf;
}

std::uint64_t wall_seconds() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count());
}

bool uses_categories(pipeline::TaskKind k) {
  return k == pipeline::TaskKind::CompareAndCategorize || k == pipeline::TaskKind::Categorize;
}

}  // namespace

const std::array<std::string, 5>& likert_labels() {
  static const std::array<std::string, 5> labels{"Nobody answers true", "A few answer true", "About half answer true",
                                                 "Most answer true", "Everybody answers true"};
  return labels;
}

Service::Service(pipeline::Orchestrator& orchestrator, ServiceOptions options, store::EventLog* log)
    : orchestrator_(orchestrator), options_(std::move(options)), log_(log) {
  if (!options_.clock) options_.clock = wall_seconds;
  if (!options_.new_token) options_.new_token = random_token;
  snapshot_seq_ = orchestrator_.read([](const auto& s) { return s.last_seq; });
}

Reply Service::handle(const Request& request) {
  try {
    auto reply = route(request);
    if (request.method == "POST") maybe_snapshot();
    return reply;
  } catch (const AuthError& e) {
    return error_reply(401, "authentication", e.what());
  } catch (const ValidationError& e) {
    return error_reply(422, "validation", e.what(), fields_json(e.fields()));
  } catch (const StaleAssignmentError& e) {
    return error_reply(409, "stale_assignment", e.what());
  } catch (const ranking::IncompleteTallyError& e) {
    return error_reply(409, "incomplete_tally", e.what());
  } catch (const StateError& e) {
    return error_reply(409, "state", e.what());
  } catch (const NotFoundError& e) {
    return error_reply(404, "not_found", e.what());
  } catch (const json::exception& e) {
    return error_reply(400, "malformed", e.what());
  } catch (const std::exception& e) {
    return error_reply(500, "internal", e.what());
  }
}

Reply Service::route(const Request& r) {
  const std::string_view path = r.path;
  auto tail = [&](std::string_view prefix) -> std::optional<std::string_view> {
    if (path.size() > prefix.size() && path.substr(0, prefix.size()) == prefix) return path.substr(prefix.size());
    return std::nullopt;
  };
  if (r.method == "POST") {
    if (path == "/workers") return register_worker(r);
    if (path == "/responses") return post_response(r);
  } else if (r.method == "GET") {
    if (path == "/tasks/next") return next_task(r);
    if (path == "/status") {
      return json_reply(200, orchestrator_.read([](const auto& s) {
        auto j = pipeline::progress(s);
        j["ledger"] = report::ledger_json(s);
        return j;
      }));
    }
    if (path == "/rankings") {
      return json_reply(200, orchestrator_.read([](const auto& s) { return report::rankings_json(s); }));
    }
    if (path == "/reports") return get_reports();
    if (auto id = tail("/problems/")) return get_problem(*id);
    if (auto id = tail("/datasets/")) return get_dataset(*id);
  }
  return error_reply(404, "not_found", "no route for " + r.method + " " + r.path);
}

WorkerId Service::authenticate(const Request& r) const {
  auto it = r.headers.find("authorization");
  if (it == r.headers.end()) throw AuthError("missing bearer token");
  const std::string_view v = it->second;
  constexpr std::string_view kBearer = "Bearer ";
  if (v.substr(0, kBearer.size()) != kBearer) throw AuthError("authorization must be a bearer token");
  const std::string token(v.substr(kBearer.size()));
  auto worker = orchestrator_.read([&](const auto& s) -> std::optional<WorkerId> {
    auto found = s.sessions.find(token);
    if (found == s.sessions.end()) return std::nullopt;
    return found->second;
  });
  if (!worker) throw AuthError("unknown token");
  return *worker;
}

Reply Service::register_worker(const Request& r) {
  std::string worker;
  if (!r.body.empty()) {
    const auto j = json::parse(r.body);
    if (auto it = j.find("worker"); it != j.end()) {
      if (!it->is_string()) throw ValidationError("worker", "must be a string");
      worker = it->get<std::string>();
    }
  }
  if (worker.empty()) worker = "w-" + options_.new_token().substr(0, 12);
  orchestrator_.register_worker(worker);
  const auto token = options_.new_token();
  orchestrator_.open_session(token, worker);
  const auto phase = orchestrator_.read([](const auto& s) { return std::string(pipeline::to_string(s.phase)); });
  return json_reply(201, {{"worker", worker}, {"token", token}, {"phase", phase}});
}

Reply Service::next_task(const Request& r) {
  const auto worker = authenticate(r);
  const auto task = orchestrator_.next_task(worker, options_.clock());
  if (!task) return {204, "application/json", ""};
  return json_reply(200, orchestrator_.read([&](const auto& s) {
    json j = *task;
    json problems = json::array();
    for (auto id : task->problems) problems.push_back(s.problem(id));
    j["problems"] = problems;
    j["p_inputs"] = s.config.p_inputs;
    if (uses_categories(task->kind)) j["categories"] = s.config.categories;
    if (task->kind == pipeline::TaskKind::RateLearnability) j["likert_labels"] = likert_labels();
    return j;
  }));
}

Reply Service::post_response(const Request& r) {
  const auto worker = authenticate(r);
  json body;
  try {
    body = json::parse(r.body);
  } catch (const json::exception& e) {
    throw ValidationError("body", std::string("not valid JSON: ") + e.what());
  }
  if (!body.is_object()) throw ValidationError("body", "must be an object");
  std::vector<FieldError> errs;
  auto id_it = body.find("assignment_id");
  if (id_it == body.end() || !id_it->is_number_unsigned()) errs.push_back({"assignment_id", "required positive integer"});
  auto payload_it = body.find("payload");
  if (payload_it == body.end() || !payload_it->is_object()) errs.push_back({"payload", "required object"});
  if (!errs.empty()) throw ValidationError(errs);

  Response response;
  response.worker = worker;
  try {
    response.payload = payload_it->get<Payload>();
  } catch (const ValidationError& e) {
    throw ValidationError([&] {
      auto f = e.fields();
      for (auto& x : f) x.field = "payload." + x.field;
      return f;
    }());
  } catch (const json::exception& e) {
    throw ValidationError("payload", std::string("malformed: ") + e.what());
  }
  const auto id = id_it->get<std::uint64_t>();
  const bool owned = orchestrator_.read([&](const auto& s) {
    auto it = s.open.find(id);
    return it == s.open.end() || it->second.worker == worker;
  });
  if (!owned) throw StaleAssignmentError("assignment " + std::to_string(id) + " belongs to another worker");
  orchestrator_.record_response(id, response);
  return json_reply(200, orchestrator_.read([](const auto& s) {
    return json{{"accepted", true}, {"seq", s.last_seq}, {"phase", pipeline::to_string(s.phase)}};
  }));
}

Reply Service::get_problem(std::string_view id) {
  const auto v = parse_id(id);
  if (!v) throw NotFoundError("problem id '" + std::string(id) + "' is not a number");
  return json_reply(200, orchestrator_.read([&](const auto& s) {
    if (!s.has_problem(static_cast<ProblemId>(*v))) throw NotFoundError("no problem " + std::to_string(*v));
    return json(s.problem(static_cast<ProblemId>(*v)));
  }));
}

Reply Service::get_dataset(std::string_view name) {
  constexpr std::string_view kExt = ".csv";
  if (name.size() <= kExt.size() || name.substr(name.size() - kExt.size()) != kExt) {
    throw NotFoundError("datasets are served as <id>.csv");
  }
  const auto v = parse_id(name.substr(0, name.size() - kExt.size()));
  if (!v) throw NotFoundError("dataset id is not a number");
  return orchestrator_.read([&](const auto& s) {
    if (s.phase != pipeline::Phase::Done) {
      throw StateError("datasets are available once collection has closed (phase is " +
                       std::string(pipeline::to_string(s.phase)) + ")");
    }
    for (const auto& a : pipeline::assemble_datasets(s)) {
      if (a.dataset.problem_id == *v) return Reply{200, "text/csv", dataset_to_csv(a.dataset)};
    }
    throw NotFoundError("problem " + std::to_string(*v) + " was not selected for collection");
  });
}

Reply Service::get_reports() {
  const auto seq = orchestrator_.read([](const auto& s) {
    if (s.phase != pipeline::Phase::Done) {
      throw StateError("reports are available once collection has closed (phase is " +
                       std::string(pipeline::to_string(s.phase)) + ")");
    }
    return s.last_seq;
  });
  std::lock_guard lock(report_mutex_);
  if (!report_cache_ || report_cache_->first != seq) {
    auto body = orchestrator_.read([&](const auto& s) { return report::build_report(s, options_.report).dump(); });
    report_cache_.emplace(seq, std::move(body));
  }
  return {200, "application/json", report_cache_->second};
}

void Service::maybe_snapshot() {
  if (!log_ || options_.snapshot_every == 0) return;
  orchestrator_.read([&](const auto& s) {
    if (s.last_seq >= snapshot_seq_ + options_.snapshot_every) {
      log_->write_snapshot(s);
      snapshot_seq_ = s.last_seq;
    }
    return 0;
  });
}

// ---------------------------------------------------------------------------

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;

  explicit Impl(Service& s) : service(s) {
    auto forward = [this](const httplib::Request& in, httplib::Response& out) {
      Request r;
      r.method = in.method;
      r.path = in.path;
      r.body = in.body;
      for (const auto& [k, v] : in.headers) {
        std::string key = k;
        for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        r.headers[key] = v;
      }
      const auto reply = service.handle(r);
      out.status = reply.status;
      if (reply.status != 204) out.set_content(reply.body, reply.content_type);
    };
    server.Get(".*", forward);
    server.Post(".*", forward);
    server.Options(".*", [](const httplib::Request&, httplib::Response& out) { out.status = 204; });
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Authorization, Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace ideation::service
