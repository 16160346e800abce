#pragma once

// On-disk run directory:
//   config.json     pipeline configuration written by init
//   events.jsonl    one Event per line, sequence numbers 1, 2, ...
//   snapshot.json   {"seq": s, "state": ...}, replaced atomically

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <vector>

#include "ideation/orchestrator.hpp"

namespace ideation::store {

using pipeline::Event;

inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kEventsFile = "events.jsonl";
inline constexpr const char* kSnapshotFile = "snapshot.json";

/// Parses a log. Throws ReplayError naming the sequence number that was
/// expected where a line is unparsable or out of order.
std::vector<Event> parse_events(std::istream& in);

class EventLog {
 public:
  explicit EventLog(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path events_path() const { return dir_ / kEventsFile; }
  std::filesystem::path snapshot_path() const { return dir_ / kSnapshotFile; }
  std::filesystem::path config_path() const { return dir_ / kConfigFile; }

  /// Appends and flushes one line.
  void append(const Event& e);
  /// Throws ReplayError when the file is missing or corrupt.
  std::vector<Event> load() const;
  bool has_events() const;

  void write_snapshot(const pipeline::PipelineState& state) const;
  std::optional<pipeline::PipelineState> load_snapshot() const;

  /// A sink that appends to this log.
  pipeline::Orchestrator::Sink sink();

 private:
  std::filesystem::path dir_;
  std::ofstream out_;
};

/// Writes config.json and an empty events.jsonl. Throws StateError when the
/// directory already holds events.
void init_run(const std::filesystem::path& dir, const pipeline::PipelineConfig& config);

pipeline::PipelineConfig load_config(const std::filesystem::path& file);

/// State recovered from snapshot plus log tail (or the full log) without
/// attaching a sink.
pipeline::Orchestrator recover(const EventLog& log, pipeline::Orchestrator::Sink sink = {});

/// Opens a run for appending: starts it from config.json when the log is
/// empty, else recovers it.
pipeline::Orchestrator open_run(EventLog& log);

}  // namespace ideation::store
