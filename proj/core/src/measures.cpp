#include "quantfolio/measures.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "quantfolio/error.hpp"

namespace quantfolio {

namespace {

void require_nonempty(const ReturnSeries& series) {
    if (series.size() == 0) throw Error(ErrorCode::EmptySeries, "return series is empty");
}

void require_beta(double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorCode::InvalidArgument, "beta must lie in (0, 1)");
}

}  // namespace

std::string RiskMeasure::name() const {
    switch (kind) {
        case MeasureKind::Variance: return "variance";
        case MeasureKind::StandardDeviation: return "standard_deviation";
        case MeasureKind::MeanAbsoluteDeviation: return "mad";
        case MeasureKind::CVaR: return "cvar";
        case MeasureKind::CDaR: return "cdar";
        case MeasureKind::MaxDrawdown: return "max_drawdown";
        case MeasureKind::WorstRealization: return "worst_realization";
    }
    return "unknown";
}

RiskMeasure RiskMeasure::parse(const std::string& text, double beta) {
    for (auto kind : {MeasureKind::Variance, MeasureKind::StandardDeviation, MeasureKind::MeanAbsoluteDeviation,
                      MeasureKind::CVaR, MeasureKind::CDaR, MeasureKind::MaxDrawdown,
                      MeasureKind::WorstRealization}) {
        RiskMeasure m{kind, beta};
        if (m.name() == text) {
            require_beta(beta);
            return m;
        }
    }
    throw Error(ErrorCode::UnsupportedMeasure, "unknown risk measure '" + text + "'");
}

double tail_mean(std::span<const double> losses, double beta) {
    if (losses.empty()) throw Error(ErrorCode::EmptySeries, "return series is empty");
    require_beta(beta);
    std::vector<double> sorted(losses.begin(), losses.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const double mass = (1.0 - beta) * static_cast<double>(sorted.size());
    const auto whole = static_cast<std::size_t>(std::floor(mass));
    double total = 0.0;
    for (std::size_t i = 0; i < whole; ++i) total += sorted[i];
    const double frac = mass - static_cast<double>(whole);
    if (frac > 0.0 && whole < sorted.size()) total += frac * sorted[whole];
    return total / mass;
}

double cvar(const ReturnSeries& series, double beta) {
    require_nonempty(series);
    Vector losses = -series.values;
    return tail_mean({losses.data(), static_cast<std::size_t>(losses.size())}, beta);
}

Vector drawdown_path(const ReturnSeries& series, bool compounded) {
    require_nonempty(series);
    const auto t = series.size();
    Vector dd(t);
    if (compounded) {
        double wealth = 1.0;
        double peak = 0.0;
        for (Eigen::Index i = 0; i < t; ++i) {
            wealth *= 1.0 + series.values[i];
            peak = i == 0 ? wealth : std::max(peak, wealth);
            dd[i] = peak > 0.0 ? 1.0 - wealth / peak : 0.0;
        }
    } else {
        double cum = 0.0;
        double peak = 0.0;
        for (Eigen::Index i = 0; i < t; ++i) {
            cum += series.values[i];
            peak = i == 0 ? cum : std::max(peak, cum);
            dd[i] = peak - cum;
        }
    }
    return dd;
}

double cdar(const ReturnSeries& series, double beta, bool compounded) {
    Vector dd = drawdown_path(series, compounded);
    return tail_mean({dd.data(), static_cast<std::size_t>(dd.size())}, beta);
}

double max_drawdown(const ReturnSeries& series, bool compounded) {
    return drawdown_path(series, compounded).maxCoeff();
}

double dispersion(const ReturnSeries& series, Dispersion which) {
    const auto t = series.size();
    if (which == Dispersion::MeanAbsoluteDeviation) {
        if (t < 1) throw Error(ErrorCode::TooFewSamples, "MAD needs at least one observation");
        const double mean = series.values.mean();
        return (series.values.array() - mean).abs().mean();
    }
    if (t < 2) throw Error(ErrorCode::TooFewSamples, "variance needs at least two observations");
    const double mean = series.values.mean();
    const double var = (series.values.array() - mean).square().sum() / static_cast<double>(t - 1);
    return which == Dispersion::Variance ? var : std::sqrt(var);
}

double worst_realization(const ReturnSeries& series) {
    require_nonempty(series);
    return -series.values.minCoeff();
}

double evaluate(const RiskMeasure& measure, const ReturnSeries& series) {
    switch (measure.kind) {
        case MeasureKind::Variance: return dispersion(series, Dispersion::Variance);
        case MeasureKind::StandardDeviation: return dispersion(series, Dispersion::StandardDeviation);
        case MeasureKind::MeanAbsoluteDeviation: return dispersion(series, Dispersion::MeanAbsoluteDeviation);
        case MeasureKind::CVaR: return cvar(series, measure.beta);
        case MeasureKind::CDaR: return cdar(series, measure.beta, false);
        case MeasureKind::MaxDrawdown: return max_drawdown(series, false);
        case MeasureKind::WorstRealization: return worst_realization(series);
    }
    throw Error(ErrorCode::UnsupportedMeasure, "unknown measure");
}

}  // namespace quantfolio
