#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace alphatest {

enum class ErrorCode {
    InvalidData,
    InvalidArgument,
    InsufficientSample,
    SingularDesign,
    DegenerateResidual,
    Unconverged,
    IndefiniteInput,
    InvalidPrecision,
    InvalidK,
    BudgetExceeded,
    DegenerateNull,
    SingularCovariance,
    ExperimentInvalid,
    AlignmentError,
    ParseError,
    IoError,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidData: return "InvalidData";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::InsufficientSample: return "InsufficientSample";
        case ErrorCode::SingularDesign: return "SingularDesign";
        case ErrorCode::DegenerateResidual: return "DegenerateResidual";
        case ErrorCode::Unconverged: return "Unconverged";
        case ErrorCode::IndefiniteInput: return "IndefiniteInput";
        case ErrorCode::InvalidPrecision: return "InvalidPrecision";
        case ErrorCode::InvalidK: return "InvalidK";
        case ErrorCode::BudgetExceeded: return "BudgetExceeded";
        case ErrorCode::DegenerateNull: return "DegenerateNull";
        case ErrorCode::SingularCovariance: return "SingularCovariance";
        case ErrorCode::ExperimentInvalid: return "ExperimentInvalid";
        case ErrorCode::AlignmentError: return "AlignmentError";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI, the Monte Carlo harness) can classify it.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

// Warnings (PD repairs, dropped assets, skipped windows). Defaults to stderr;
// the Monte Carlo harness silences it.
using WarningHandler = std::function<void(std::string_view)>;

namespace detail {
inline std::mutex& warning_mutex() {
    static std::mutex m;
    return m;
}
inline WarningHandler& warning_handler() {
    static WarningHandler h = [](std::string_view msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return h;
}
}  // namespace detail

inline void set_warning_handler(WarningHandler handler) {
    std::lock_guard lock(detail::warning_mutex());
    detail::warning_handler() = std::move(handler);
}

inline void warn(std::string_view msg) {
    std::lock_guard lock(detail::warning_mutex());
    if (detail::warning_handler()) detail::warning_handler()(msg);
}

}  // namespace alphatest
