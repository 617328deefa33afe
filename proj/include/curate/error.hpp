#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace curate {

// Exit codes of the command-line front end map onto these.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or invalid arguments. Carries every violation found.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::string message)
      : Error(message), violations_{std::move(message)} {}
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }
  std::vector<std::string> violations_;
};

/// Runtime failure inside a pipeline phase.
class PhaseError : public Error {
 public:
  PhaseError(std::string phase, const std::string& cause)
      : Error(phase + ": " + cause), phase_(std::move(phase)) {}
  const std::string& phase() const { return phase_; }

 private:
  std::string phase_;
};

/// On-disk artifact missing or failing its checksum.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// A single input record that cannot be ingested. `reason` is the short
/// machine-readable key used in the ingest report.
class RejectedRecord : public Error {
 public:
  RejectedRecord(std::string reason, const std::string& detail,
                 std::optional<std::size_t> byte_offset = std::nullopt)
      : Error(reason + ": " + detail), reason_(std::move(reason)), byte_offset_(byte_offset) {}

  const std::string& reason() const { return reason_; }
  std::optional<std::size_t> byte_offset() const { return byte_offset_; }

 private:
  std::string reason_;
  std::optional<std::size_t> byte_offset_;
};

}  // namespace curate
