#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace latent_align {

enum class ErrorKind {
    InvalidArgument,
    InvalidShape,
    DegenerateVector,
    FormatError,
    DataError,
    PairingError,
    InvalidSplit,
    IoError,
    DegenerateKernel,
    InsufficientAnchors,
    InvalidRank,
    SingularCovariance,
    UnderDetermined,
    DivergenceError,
    InvalidK,
    DegenerateCorrelation,
};

/// Coarse families used for process exit codes.
enum class ErrorFamily { Io = 2, Validation = 3, Numerical = 4 };

std::string_view error_kind_name(ErrorKind kind) noexcept;
ErrorFamily error_family(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    ErrorFamily family() const noexcept { return error_family(kind_); }

private:
    ErrorKind kind_;
};

/// DataError carrying the first offending cell of a matrix.
class CellError : public Error {
public:
    CellError(std::size_t row, std::size_t col, const std::string& message)
        : Error(ErrorKind::DataError, message), row_(row), col_(col) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t col() const noexcept { return col_; }

private:
    std::size_t row_;
    std::size_t col_;
};

/// DegenerateVector carrying the offending row.
class DegenerateRowError : public Error {
public:
    DegenerateRowError(std::size_t row, const std::string& message)
        : Error(ErrorKind::DegenerateVector, message), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// DivergenceError carrying the iteration at which the loss stopped being finite.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t iteration, const std::string& message)
        : Error(ErrorKind::DivergenceError, message), iteration_(iteration) {}

    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace latent_align
