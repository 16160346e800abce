#include "ideation/event_log.hpp"

#include <sstream>
#include <string>

#include "ideation/error.hpp"

namespace ideation::store {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<Event> parse_events(std::istream& in) {
  std::vector<Event> out;
  std::string line;
  std::uint64_t expected = 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Event e;
    try {
      e = pipeline::event_from_json(json::parse(line));
    } catch (const std::exception& ex) {
      throw ReplayError(expected, std::string("unreadable record: ") + ex.what());
    }
    if (e.seq != expected) {
      throw ReplayError(expected, "found sequence " + std::to_string(e.seq) + " out of order");
    }
    out.push_back(std::move(e));
    ++expected;
  }
  return out;
}

EventLog::EventLog(fs::path dir) : dir_(std::move(dir)) {}

void EventLog::append(const Event& e) {
  if (!out_.is_open()) {
    out_.open(events_path(), std::ios::app);
    if (!out_) throw Error("cannot open " + events_path().string() + " for appending");
  }
  out_ << pipeline::to_json(e).dump() << '\n';
  out_.flush();
  if (!out_) throw Error("write to " + events_path().string() + " failed");
}

std::vector<Event> EventLog::load() const {
  std::ifstream in(events_path());
  if (!in) throw ReplayError(1, "missing event log " + events_path().string());
  return parse_events(in);
}

bool EventLog::has_events() const {
  std::error_code ec;
  return fs::exists(events_path(), ec) && fs::file_size(events_path(), ec) > 0;
}

void EventLog::write_snapshot(const pipeline::PipelineState& state) const {
  const auto tmp = dir_ / (std::string(kSnapshotFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << json{{"seq", state.last_seq}, {"state", pipeline::to_json(state)}}.dump();
    if (!out) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, snapshot_path());
}

std::optional<pipeline::PipelineState> EventLog::load_snapshot() const {
  std::ifstream in(snapshot_path());
  if (!in) return std::nullopt;
  try {
    const auto j = json::parse(in);
    auto state = pipeline::state_from_json(j.at("state"));
    if (state.last_seq != j.at("seq").get<std::uint64_t>()) throw Error("sequence mismatch");
    return state;
  } catch (const std::exception&) {
    // An unreadable snapshot is only a cache; the full log is authoritative.
    return std::nullopt;
  }
}

pipeline::Orchestrator::Sink EventLog::sink() {
  return [this](const Event& e) { append(e); };
}

void init_run(const fs::path& dir, const pipeline::PipelineConfig& config) {
  if (auto errs = pipeline::validate(config); !errs.empty()) throw ValidationError(errs);
  fs::create_directories(dir);
  EventLog log(dir);
  if (log.has_events()) throw StateError(dir.string() + " already holds an event log");
  {
    std::ofstream out(log.config_path(), std::ios::trunc);
    out << json(config).dump(2) << '\n';
    if (!out) throw Error("cannot write " + log.config_path().string());
  }
  std::ofstream touch(log.events_path(), std::ios::trunc);
  std::error_code ec;
  fs::remove(log.snapshot_path(), ec);
}

pipeline::PipelineConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw NotFoundError("config file " + file.string() + " not found");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config", std::string("not valid JSON: ") + e.what());
  }
  auto config = j.get<pipeline::PipelineConfig>();
  if (auto errs = pipeline::validate(config); !errs.empty()) throw ValidationError(errs);
  return config;
}

pipeline::Orchestrator recover(const EventLog& log, pipeline::Orchestrator::Sink sink) {
  auto events = log.load();
  if (events.empty()) throw ReplayError(1, "event log " + log.events_path().string() + " is empty");
  if (auto snap = log.load_snapshot(); snap && snap->last_seq <= events.size()) {
    const auto seq = snap->last_seq;
    std::vector<Event> tail(events.begin() + static_cast<std::ptrdiff_t>(seq), events.end());
    return pipeline::Orchestrator::resume(std::move(*snap), tail, std::move(sink));
  }
  return pipeline::Orchestrator::replay(events, std::move(sink));
}

pipeline::Orchestrator open_run(EventLog& log) {
  if (log.has_events()) {
    auto o = recover(log, log.sink());
    o.settle();
    return o;
  }
  return pipeline::Orchestrator(load_config(log.config_path()), log.sink());
}

}  // namespace ideation::store
