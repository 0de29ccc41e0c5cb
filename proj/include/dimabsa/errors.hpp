#pragma once

#include <stdexcept>
#include <string>

namespace dimabsa {

// Base class for recoverable runtime failures. The CLI maps each subclass
// to a distinct process exit code; see tools/main.cpp.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad user-facing configuration: unknown task names, missing required
// options, malformed prompt templates, and the like.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A prompt template that cannot be instantiated (unknown or missing slot).
class TemplateError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Malformed input data. Carries a 1-based line number when the source is a
// line-oriented file; line() returns -1 when no position applies.
class DataError : public Error {
public:
    explicit DataError(const std::string& what, long line = -1)
        : Error(line >= 1 ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}

    long line() const noexcept { return line_; }

private:
    long line_;
};

// Network-level failure talking to a generation endpoint after retries
// were exhausted.
class TransportError : public Error {
public:
    using Error::Error;
};

// Statistically invalid request: too few observations, empty groups,
// out-of-range probabilities.
class DomainError : public Error {
public:
    using Error::Error;
};

// A sample on which the requested statistic is undefined, e.g. zero
// variance where a scale estimate is required.
class DegenerateSampleError : public DomainError {
public:
    using DomainError::DomainError;
};

// Violated internal precondition. Signals a programming error in the
// caller, not a data or environment problem.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace dimabsa
