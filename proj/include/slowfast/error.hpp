#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace slowfast {

enum class ErrorCode {
    InvalidArgument,
    EmptyProbeSet,
    DegenerateScan,
    DivergentLimit,
    TruncationTooSmall,
    NonEllipticDiffusion,
    NonReversibleTorus,
    GridTooCoarse,
    GridMismatch,
    TailDominates,
    FredholmViolation,
    DegenerateDiffusion,
    SingularSystem,
    CenteringViolation,
    UncertifiedCorrector,
    SingularQ,
    MissingCellSolution,
    MissingCorrector,
    BlowUp,
    NumericalBlowUp,
    MinimizationFailed,
    WeightOverflow,
    ConfigError,
    UsageError,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyProbeSet: return "EmptyProbeSet";
    case ErrorCode::DegenerateScan: return "DegenerateScan";
    case ErrorCode::DivergentLimit: return "DivergentLimit";
    case ErrorCode::TruncationTooSmall: return "TruncationTooSmall";
    case ErrorCode::NonEllipticDiffusion: return "NonEllipticDiffusion";
    case ErrorCode::NonReversibleTorus: return "NonReversibleTorus";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::TailDominates: return "TailDominates";
    case ErrorCode::FredholmViolation: return "FredholmViolation";
    case ErrorCode::DegenerateDiffusion: return "DegenerateDiffusion";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::CenteringViolation: return "CenteringViolation";
    case ErrorCode::UncertifiedCorrector: return "UncertifiedCorrector";
    case ErrorCode::SingularQ: return "SingularQ";
    case ErrorCode::MissingCellSolution: return "MissingCellSolution";
    case ErrorCode::MissingCorrector: return "MissingCorrector";
    case ErrorCode::BlowUp: return "BlowUp";
    case ErrorCode::NumericalBlowUp: return "NumericalBlowUp";
    case ErrorCode::MinimizationFailed: return "MinimizationFailed";
    case ErrorCode::WeightOverflow: return "WeightOverflow";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::UsageError: return "UsageError";
    }
    return "Unknown";
}

/// Exception type for every failure raised by the library. The code is
/// stable and machine-readable; the message carries the offending values.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) fail(code, message);
}

}  // namespace slowfast
