#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace layerkit {

/// Base exception. `code()` is a stable dotted identifier (e.g.
/// "bundle.missing_manifest") that the CLI prints as the machine-readable
/// part of its one-line error report.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct Violation {
  std::string code;
  std::string message;
};

/// Raised when a document or plan breaks one or more invariants. Every
/// violation is itemized.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations)
      : Error("validation.failed", summarize(violations)), violations_(std::move(violations)) {}

  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  static std::string summarize(const std::vector<Violation>& v) {
    std::string out;
    for (const auto& item : v) {
      if (!out.empty()) out += "; ";
      out += item.code + ": " + item.message;
    }
    return out;
  }

  std::vector<Violation> violations_;
};

}  // namespace layerkit
