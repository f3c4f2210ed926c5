#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dobc {

// All library failures derive from Error so callers can catch one type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error { using Error::Error; };
struct RankDeficient : Error { using Error::Error; };
struct NotStabilizable : Error { using Error::Error; };
struct UnstableMatrix : Error { using Error::Error; };
struct NotDetectable : Error { using Error::Error; };
struct InconsistentChecks : Error { using Error::Error; };
struct PreconditionViolated : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct UnknownScenario : ConfigError { using ConfigError::ConfigError; };
struct ParseError : ConfigError { using ConfigError::ConfigError; };
struct IoError : Error { using Error::Error; };

// Carries every violated constraint, not just the first.
struct ValidationError : ConfigError {
  explicit ValidationError(std::vector<std::string> problems)
      : ConfigError(join(problems)), problems(std::move(problems)) {}
  std::vector<std::string> problems;

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string out = "invalid config:";
    for (const auto& s : p) out += "\n  - " + s;
    return out;
  }
};

struct Diverged : Error {
  Diverged(double t, const std::string& what)
      : Error("diverged at t=" + std::to_string(t) + ": " + what), time(t) {}
  double time;
};

}  // namespace dobc
