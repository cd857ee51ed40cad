#pragma once

#include <stdexcept>
#include <string>

namespace flexsched {

// Exit codes used by the CLI. Library code throws the typed exceptions
// below; the CLI maps them onto these codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitParseError = 2,
    kExitInvariant = 3,
    kExitConfigError = 4,
};

class Error : public std::runtime_error {
public:
    Error(std::string msg, int exit_code)
        : std::runtime_error(std::move(msg)), exit_code_(exit_code) {}
    int exit_code() const { return exit_code_; }

private:
    int exit_code_;
};

// Malformed input files (.fjs, Taillard/DMU, JSON, CSV).
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg, kExitParseError) {}
};

// Broken internal contract: infeasible action, non-terminal makespan query,
// overlapping schedule, stale cache.
class InvariantError : public Error {
public:
    explicit InvariantError(const std::string& msg) : Error(msg, kExitInvariant) {}
};

// Bad user-supplied configuration (dimensions, flags, variants).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg, kExitConfigError) {}
};

// Numerical failure during optimization (NaN/Inf gradients or probabilities).
class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& msg) : Error(msg, kExitInvariant) {}
};

}  // namespace flexsched
