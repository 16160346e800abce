#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ideation {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FieldError {
  std::string field;
  std::string reason;
};

/// A payload or value failed validation. Carries one entry per offending field
/// so callers (HTTP layer, UI) can report them individually.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<FieldError> fields)
      : Error(summarize(fields)), fields_(std::move(fields)) {}
  ValidationError(std::string field, std::string reason)
      : ValidationError(std::vector<FieldError>{{std::move(field), std::move(reason)}}) {}

  const std::vector<FieldError>& fields() const noexcept { return fields_; }

 private:
  static std::string summarize(const std::vector<FieldError>& fields) {
    std::string out = "validation failed";
    for (const auto& f : fields) out += "; " + f.field + ": " + f.reason;
    return out;
  }
  std::vector<FieldError> fields_;
};

/// An operation was invoked in a state where its precondition does not hold.
class StateError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class StaleAssignmentError : public Error {
 public:
  using Error::Error;
};

class AuthError : public Error {
 public:
  using Error::Error;
};

/// Event log could not be replayed; `sequence()` names the offending record.
class ReplayError : public Error {
 public:
  ReplayError(std::uint64_t sequence, const std::string& what)
      : Error("replay failed at sequence " + std::to_string(sequence) + ": " + what),
        sequence_(sequence) {}
  std::uint64_t sequence() const noexcept { return sequence_; }

 private:
  std::uint64_t sequence_;
};

}  // namespace ideation
