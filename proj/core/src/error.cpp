#include "quantfolio/error.hpp"

namespace quantfolio {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MalformedCsv: return "MalformedCsv";
        case ErrorCode::NonMonotonicDates: return "NonMonotonicDates";
        case ErrorCode::NonPositivePrice: return "NonPositivePrice";
        case ErrorCode::MissingCell: return "MissingCell";
        case ErrorCode::TooFewRows: return "TooFewRows";
        case ErrorCode::EmptyIntersection: return "EmptyIntersection";
        case ErrorCode::DegenerateSplit: return "DegenerateSplit";
        case ErrorCode::DateMisalignment: return "DateMisalignment";
        case ErrorCode::AssetMismatch: return "AssetMismatch";
        case ErrorCode::EmptySeries: return "EmptySeries";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::SingularCovariance: return "SingularCovariance";
        case ErrorCode::SingularSystem: return "SingularSystem";
        case ErrorCode::DecompositionFailure: return "DecompositionFailure";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::ZeroVarianceAsset: return "ZeroVarianceAsset";
        case ErrorCode::UnsupportedMeasure: return "UnsupportedMeasure";
        case ErrorCode::InfeasibleProblem: return "InfeasibleProblem";
        case ErrorCode::UnboundedProblem: return "UnboundedProblem";
        case ErrorCode::SolverFailure: return "SolverFailure";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::EmptyCv: return "EmptyCv";
        case ErrorCode::EmptyPopulation: return "EmptyPopulation";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

ErrorCategory category(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InfeasibleProblem:
        case ErrorCode::UnboundedProblem:
        case ErrorCode::SolverFailure:
            return ErrorCategory::Solver;
        case ErrorCode::InvalidConfig:
        case ErrorCode::InvalidArgument:
        case ErrorCode::UnsupportedMeasure:
        case ErrorCode::EmptyCv:
            return ErrorCategory::Config;
        default:
            return ErrorCategory::Data;
    }
}

}  // namespace quantfolio
