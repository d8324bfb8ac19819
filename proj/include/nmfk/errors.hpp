#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nmfk {

/// Coarse error categories; the CLI maps them onto process exit codes.
enum class ErrorKind {
    shape,
    degenerate_input,
    parameter,
    numerical_failure,
    ensemble,
    clustering_degeneracy,
    contract_violation,
    ingest,
    io,
    config,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::shape: return "shape";
    case ErrorKind::degenerate_input: return "degenerate_input";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::numerical_failure: return "numerical_failure";
    case ErrorKind::ensemble: return "ensemble";
    case ErrorKind::clustering_degeneracy: return "clustering_degeneracy";
    case ErrorKind::contract_violation: return "contract_violation";
    case ErrorKind::ingest: return "ingest";
    case ErrorKind::io: return "io";
    case ErrorKind::config: return "config";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(ErrorKind::shape, what) {}
};

class DegenerateInputError : public Error {
public:
    explicit DegenerateInputError(const std::string& what) : Error(ErrorKind::degenerate_input, what) {}
};

class ParameterError : public Error {
public:
    explicit ParameterError(const std::string& what) : Error(ErrorKind::parameter, what) {}
};

/// Non-finite value produced during iteration; carries the iteration index.
class NumericalFailure : public Error {
public:
    NumericalFailure(const std::string& what, std::size_t iteration)
        : Error(ErrorKind::numerical_failure, what + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}
    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

class EnsembleError : public Error {
public:
    explicit EnsembleError(const std::string& what) : Error(ErrorKind::ensemble, what) {}
};

class ClusteringDegeneracy : public Error {
public:
    explicit ClusteringDegeneracy(const std::string& what) : Error(ErrorKind::clustering_degeneracy, what) {}
};

class ContractViolation : public Error {
public:
    explicit ContractViolation(const std::string& what) : Error(ErrorKind::contract_violation, what) {}
};

/// Input table problem; row/column are 1-based file coordinates, 0 when not applicable.
class IngestError : public Error {
public:
    IngestError(const std::string& what, std::size_t row = 0, std::size_t column = 0)
        : Error(ErrorKind::ingest, format(what, row, column)), row_(row), column_(column) {}
    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& what, std::size_t row, std::size_t column) {
        if (row == 0 && column == 0) return what;
        return what + " at row " + std::to_string(row) + ", column " + std::to_string(column);
    }
    std::size_t row_;
    std::size_t column_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

}  // namespace nmfk
