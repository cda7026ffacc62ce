#ifndef LC2ST_CORE_ERROR_HPP
#define LC2ST_CORE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace lc2st {

/// Base of every error raised by the library. `kind()` is a short
/// machine-parsable tag used by the CLI on stderr.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, long line = -1, long column = -1)
        : Error("parse", what), line_(line), column_(column) {}

    long line() const noexcept { return line_; }
    long column() const noexcept { return column_; }

private:
    long line_;
    long column_;
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

class FitError : public Error {
public:
    explicit FitError(const std::string& what) : Error("fit", what) {}
};

/// Gradient training diverged. `diagnostics` holds the last finite loss,
/// epoch and, for flows, the last good checkpoint.
class TrainingError : public Error {
public:
    TrainingError(const std::string& what, std::string diagnostics)
        : Error("training", what), diagnostics_(std::move(diagnostics)) {}

    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string diagnostics_;
};

class OracleUnavailable : public Error {
public:
    explicit OracleUnavailable(const std::string& what) : Error("oracle-unavailable", what) {}
};

class PlanError : public Error {
public:
    explicit PlanError(const std::string& what) : Error("plan", what) {}
};

/// Raised while sampling from an estimator during classification-set
/// construction; carries the offending calibration row.
class SamplingError : public Error {
public:
    SamplingError(const std::string& what, long row)
        : Error("sampling", what + " (row " + std::to_string(row) + ")"), row_(row) {}

    long row() const noexcept { return row_; }

private:
    long row_;
};

} // namespace lc2st

#endif
