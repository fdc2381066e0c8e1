#pragma once

#include <stdexcept>
#include <string>

namespace cgm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Bad user input or configuration (CLI exit code 2).
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Invalid argument to an operation (shapes, ranges, graph structure).
class InvalidArgument : public Error {
  public:
    using Error::Error;
};

/// Numerical failure: non-convergence, NaN, divergence (CLI exit code 3).
class NumericalError : public Error {
  public:
    using Error::Error;
};

/// Malformed file content. Carries the 1-based line number when known.
class ParseError : public Error {
  public:
    ParseError(const std::string &what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    explicit ParseError(const std::string &what) : Error(what), line_(0) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

/// Estimator invoked without enough data.
class NoDataError : public Error {
  public:
    using Error::Error;
};

#define CGM_REQUIRE(cond, ExcType, msg)                                        \
    do {                                                                       \
        if (!(cond)) {                                                         \
            throw ExcType(msg);                                                \
        }                                                                      \
    } while (0)

} // namespace cgm
