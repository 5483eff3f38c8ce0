#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace quantfolio {

enum class ErrorCode {
    // data ingestion and shaping
    MalformedCsv,
    NonMonotonicDates,
    NonPositivePrice,
    MissingCell,
    TooFewRows,
    EmptyIntersection,
    DegenerateSplit,
    DateMisalignment,
    AssetMismatch,
    // estimation
    EmptySeries,
    TooFewSamples,
    SingularCovariance,
    SingularSystem,
    DecompositionFailure,
    DimensionMismatch,
    ZeroVarianceAsset,
    // optimization
    UnsupportedMeasure,
    InfeasibleProblem,
    UnboundedProblem,
    SolverFailure,
    // model selection and reporting
    InvalidConfig,
    EmptyCv,
    EmptyPopulation,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Broad family an error code belongs to; the CLI maps these onto exit codes.
enum class ErrorCategory { Config, Data, Solver };

ErrorCategory category(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace quantfolio
