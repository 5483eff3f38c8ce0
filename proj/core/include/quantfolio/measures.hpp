/**
 * @file measures.hpp
 * @brief Risk and reward measures on a realized return series.
 *
 * Risk measures report positive loss magnitudes: a portfolio that loses 5%
 * in its worst period has worst_realization() == 0.05. Variance-type
 * measures use the unbiased (T - 1) denominator.
 */
#pragma once

#include <span>
#include <string>
#include <vector>

#include "quantfolio/market_data.hpp"

namespace quantfolio {

/// Per-period portfolio returns with an optional date axis.
struct ReturnSeries {
    Vector values;
    std::vector<Date> dates;  ///< empty or same length as values

    Eigen::Index size() const { return values.size(); }
};

enum class MeasureKind {
    Variance,
    StandardDeviation,
    MeanAbsoluteDeviation,
    CVaR,
    CDaR,
    MaxDrawdown,
    WorstRealization,
};

inline constexpr double kDefaultBeta = 0.95;

struct RiskMeasure {
    MeasureKind kind = MeasureKind::Variance;
    double beta = kDefaultBeta;  ///< tail level for CVaR / CDaR

    static RiskMeasure variance() { return {MeasureKind::Variance}; }
    static RiskMeasure standard_deviation() { return {MeasureKind::StandardDeviation}; }
    static RiskMeasure mad() { return {MeasureKind::MeanAbsoluteDeviation}; }
    static RiskMeasure cvar(double beta = kDefaultBeta) { return {MeasureKind::CVaR, beta}; }
    static RiskMeasure cdar(double beta = kDefaultBeta) { return {MeasureKind::CDaR, beta}; }
    static RiskMeasure max_drawdown() { return {MeasureKind::MaxDrawdown}; }
    static RiskMeasure worst_realization() { return {MeasureKind::WorstRealization}; }

    /// True for measures with measure(c * r) == c * measure(r), c > 0.
    bool positively_homogeneous() const { return kind != MeasureKind::Variance; }
    /// True for measures computed from the scenario matrix rather than the covariance.
    bool scenario_based() const {
        return kind != MeasureKind::Variance && kind != MeasureKind::StandardDeviation;
    }

    std::string name() const;
    /// Parses the names produced by name() without the beta suffix, e.g. "cvar".
    static RiskMeasure parse(const std::string& text, double beta = kDefaultBeta);

    bool operator==(const RiskMeasure&) const = default;
};

enum class Dispersion { Variance, StandardDeviation, MeanAbsoluteDeviation };

/// Tail mean of the worst (1 - beta) fraction of `losses` with fractional
/// weighting of the boundary observation (Rockafellar-Uryasev value).
double tail_mean(std::span<const double> losses, double beta);

double cvar(const ReturnSeries& series, double beta = kDefaultBeta);

/// Compounded: 1 - W_t / max W_s with W the wealth path. Uncompounded:
/// running max of cumulative returns minus the current cumulative return.
Vector drawdown_path(const ReturnSeries& series, bool compounded);

double cdar(const ReturnSeries& series, double beta = kDefaultBeta, bool compounded = false);
double max_drawdown(const ReturnSeries& series, bool compounded = false);
double dispersion(const ReturnSeries& series, Dispersion which);
double worst_realization(const ReturnSeries& series);

/// Dispatches on the measure kind. Drawdown measures use uncompounded paths.
double evaluate(const RiskMeasure& measure, const ReturnSeries& series);

inline ReturnSeries as_series(Vector values) { return ReturnSeries{std::move(values), {}}; }

}  // namespace quantfolio
