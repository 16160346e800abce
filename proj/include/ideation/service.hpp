#pragma once

// HTTP task API as a transport-independent request handler, plus an adapter
// that serves it over cpp-httplib.
//
//   POST /workers             register; returns {worker, token}
//   GET  /tasks/next          Bearer token; assignment with problem bodies, or 204
//   POST /responses           Bearer token; {assignment_id, payload}
//   GET  /problems/:id
//   GET  /status
//   GET  /rankings            once ranking has closed
//   GET  /datasets/:id.csv    once collection has closed
//   GET  /reports             once collection has closed

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "ideation/event_log.hpp"
#include "ideation/orchestrator.hpp"
#include "ideation/report.hpp"

namespace ideation::service {

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;
};

struct Reply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;

  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

struct ServiceOptions {
  std::function<std::uint64_t()> clock;      // ticks (seconds); defaults to wall-clock seconds
  std::function<std::string()> new_token;    // defaults to 128 random bits in hex
  report::ReportOptions report;
  std::uint64_t snapshot_every = 500;        // events between snapshots, 0 disables
};

/// Labels for the learnability Likert scale, 1..5.
const std::array<std::string, 5>& likert_labels();

class Service {
 public:
  Service(pipeline::Orchestrator& orchestrator, ServiceOptions options = {}, store::EventLog* log = nullptr);

  /// Never throws; errors map to 4xx/5xx replies with a JSON error body.
  Reply handle(const Request& request);

 private:
  Reply route(const Request& request);
  WorkerId authenticate(const Request& request) const;
  Reply register_worker(const Request& request);
  Reply next_task(const Request& request);
  Reply post_response(const Request& request);
  Reply get_problem(std::string_view id);
  Reply get_dataset(std::string_view id);
  Reply get_reports();
  void maybe_snapshot();

  pipeline::Orchestrator& orchestrator_;
  ServiceOptions options_;
  store::EventLog* log_;
  std::mutex report_mutex_;
  std::optional<std::pair<std::uint64_t, std::string>> report_cache_;  // (seq, body)
  std::uint64_t snapshot_seq_ = 0;
};

/// Serves a Service over HTTP until stop() is called.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  /// Binds (port 0 picks a free port) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Blocks serving requests.
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ideation::service
