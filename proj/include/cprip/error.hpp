#pragma once

#include <stdexcept>
#include <string>

namespace cprip {

enum class ErrorKind {
    invalid_argument,
    dimension_mismatch,
    non_finite,
    rank_deficient,
    budget_exceeded,
    parse_error,
    io_error,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid_argument";
        case ErrorKind::dimension_mismatch: return "dimension_mismatch";
        case ErrorKind::non_finite: return "non_finite";
        case ErrorKind::rank_deficient: return "rank_deficient";
        case ErrorKind::budget_exceeded: return "budget_exceeded";
        case ErrorKind::parse_error: return "parse_error";
        case ErrorKind::io_error: return "io_error";
    }
    return "unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) throw Error(kind, what);
}

}  // namespace cprip
