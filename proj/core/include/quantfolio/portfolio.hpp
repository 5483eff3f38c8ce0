/**
 * @file portfolio.hpp
 * @brief Portfolio value types and their summary statistics.
 *
 * Every statistic is delegated to the measures module; nothing here
 * re-derives a risk number. Reports are rendered with 12 significant digits
 * and a `.` decimal separator so they can be compared byte for byte.
 */
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "quantfolio/market_data.hpp"
#include "quantfolio/measures.hpp"

namespace quantfolio {

inline constexpr int kDefaultPeriodsPerYear = 252;

/// Named weight vector produced by an optimizer or allocator.
struct Weights {
    std::vector<std::string> assets;
    Vector values;
    std::vector<std::string> warnings;  ///< non-fatal notes from the fit

    Eigen::Index size() const { return values.size(); }
    double sum() const { return values.sum(); }
};

struct Portfolio {
    std::string name;
    std::vector<std::string> assets;
    std::optional<Vector> weights;
    ReturnSeries returns;
    int periods_per_year = kDefaultPeriodsPerYear;
};

/// One out-of-sample block of a multi-period portfolio.
struct Segment {
    Vector weights;
    Eigen::Index begin = 0;  ///< first row in the source returns matrix
    Eigen::Index end = 0;    ///< one past the last row
    Date first;
    Date last;
};

struct MultiPeriodPortfolio {
    std::string name;
    std::vector<std::string> assets;
    std::vector<Segment> segments;  ///< disjoint and chronologically ordered
    ReturnSeries returns;           ///< concatenation over segments
    int periods_per_year = kDefaultPeriodsPerYear;

    /// Appends a segment; its rows must start after the previous segment ends.
    void append(Segment segment, const Vector& segment_returns, const std::vector<Date>& segment_dates);
    Portfolio as_portfolio() const;
};

struct Population {
    std::vector<Portfolio> members;
};

/// Ordered (name, value) pairs.
using Summary = std::vector<std::pair<std::string, double>>;

/// Statistic names in report order.
const std::vector<std::string>& summary_fields();

/**
 * cumulative_return (compounded), annualized_mean, annualized_volatility,
 * sharpe_ratio (0 when volatility is 0), cvar_95, cdar_95, max_drawdown
 * (compounded) and worst_realization. Requires at least two periods.
 */
Summary summary(const ReturnSeries& returns, int periods_per_year = kDefaultPeriodsPerYear);
Summary summary(const Portfolio& portfolio);

struct SummaryTable {
    std::vector<std::string> names;
    std::vector<Summary> rows;
};

SummaryTable population_summary(const Population& population);

/// Portfolio return series r_t = sum_i w_i X_ti; asset names must match.
Portfolio predict(const Weights& weights, const ReturnsMatrix& returns, std::string name = {});

/// Realized per-period mean and risk of one weight vector on two datasets.
struct FrontierReportRow {
    std::size_t point = 0;
    double train_return = 0.0;
    double train_risk = 0.0;
    double test_return = 0.0;
    double test_risk = 0.0;
};

std::vector<FrontierReportRow> frontier_report(const std::vector<Weights>& points, const RiskMeasure& measure,
                                               const ReturnsMatrix& train, const ReturnsMatrix& test);

/// Per-period Sharpe ratio (mean / standard deviation, 0 when the deviation is 0).
double sharpe(const ReturnSeries& returns);

/// `%.12g` with the C locale; the single number format of every report.
std::string format_number(double value);

std::string summary_json(const Summary& summary);
std::string population_json(const SummaryTable& table);
/// Header `name,<fields...>` then one row per member.
std::string population_csv(const SummaryTable& table);

}  // namespace quantfolio
