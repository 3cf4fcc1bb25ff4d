#pragma once

#include <stdexcept>
#include <string>

namespace qch {

// Process exit codes surfaced by the CLI.
enum class ExitCode : int {
    ok = 0,
    usage = 1,
    data = 2,
    numeric = 3,
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept { return ExitCode::data; }
};

// Bad argument to a library call (out-of-range Q, k, alpha, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::usage; }
};

// Input data violates a domain constraint (NaN, p outside [0,1], bad row).
class InvalidData : public Error {
public:
    using Error::Error;
};

class DuplicateId : public InvalidData {
public:
    using InvalidData::InvalidData;
};

// Input is well-formed but statistically degenerate (zero variance).
class DegenerateData : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::numeric; }
};

// Composed hypothesis is vacuous or incompatible with the fitted model.
class InvalidQuery : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::usage; }
};

class IoError : public Error {
public:
    using Error::Error;
};

// Parse failure in a text input; carries the 1-based line number.
class ParseError : public InvalidData {
public:
    ParseError(const std::string& what, std::size_t line)
        : InvalidData("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class GenerationFailure : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::numeric; }
};

} // namespace qch
