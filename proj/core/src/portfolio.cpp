#include "quantfolio/portfolio.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "quantfolio/error.hpp"

namespace quantfolio {

void MultiPeriodPortfolio::append(Segment segment, const Vector& segment_returns,
                                  const std::vector<Date>& segment_dates) {
    if (segment.end - segment.begin != segment_returns.size()) {
        throw Error(ErrorCode::DimensionMismatch, "segment length does not match its return series");
    }
    if (!segments.empty() && segment.begin < segments.back().end) {
        throw Error(ErrorCode::InvalidArgument, "segments must be disjoint and chronologically ordered");
    }
    const auto old = returns.values.size();
    returns.values.conservativeResize(old + segment_returns.size());
    returns.values.tail(segment_returns.size()) = segment_returns;
    returns.dates.insert(returns.dates.end(), segment_dates.begin(), segment_dates.end());
    segments.push_back(std::move(segment));
}

Portfolio MultiPeriodPortfolio::as_portfolio() const {
    return Portfolio{name, assets, std::nullopt, returns, periods_per_year};
}

const std::vector<std::string>& summary_fields() {
    static const std::vector<std::string> fields{
        "cumulative_return", "annualized_mean", "annualized_volatility", "sharpe_ratio",
        "cvar_95",           "cdar_95",         "max_drawdown",          "worst_realization",
    };
    return fields;
}

Summary summary(const ReturnSeries& returns, int periods_per_year) {
    if (returns.size() < 2) throw Error(ErrorCode::TooFewSamples, "summary needs at least two periods");
    if (periods_per_year <= 0) throw Error(ErrorCode::InvalidArgument, "periods_per_year must be positive");
    const double periods = periods_per_year;

    double wealth = 1.0;
    for (Eigen::Index t = 0; t < returns.size(); ++t) wealth *= 1.0 + returns.values[t];
    const double mean = returns.values.mean();
    const double volatility = dispersion(returns, Dispersion::StandardDeviation);
    const double ann_mean = mean * periods;
    const double ann_vol = volatility * std::sqrt(periods);

    return Summary{
        {"cumulative_return", wealth - 1.0},
        {"annualized_mean", ann_mean},
        {"annualized_volatility", ann_vol},
        {"sharpe_ratio", ann_vol > 0.0 ? ann_mean / ann_vol : 0.0},
        {"cvar_95", cvar(returns, 0.95)},
        {"cdar_95", cdar(returns, 0.95, false)},
        {"max_drawdown", max_drawdown(returns, true)},
        {"worst_realization", worst_realization(returns)},
    };
}

Summary summary(const Portfolio& portfolio) { return summary(portfolio.returns, portfolio.periods_per_year); }

SummaryTable population_summary(const Population& population) {
    if (population.members.empty()) throw Error(ErrorCode::EmptyPopulation, "population has no members");
    SummaryTable table;
    for (const auto& member : population.members) {
        table.names.push_back(member.name);
        table.rows.push_back(summary(member));
    }
    return table;
}

Portfolio predict(const Weights& weights, const ReturnsMatrix& returns, std::string name) {
    if (weights.assets != returns.assets) {
        throw Error(ErrorCode::AssetMismatch, "weights and returns refer to different assets");
    }
    if (weights.values.size() != returns.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "weight vector length does not match the asset count");
    }
    Portfolio p;
    p.name = std::move(name);
    p.assets = returns.assets;
    p.weights = weights.values;
    p.returns = ReturnSeries{returns.values * weights.values, returns.dates};
    return p;
}

std::vector<FrontierReportRow> frontier_report(const std::vector<Weights>& points, const RiskMeasure& measure,
                                               const ReturnsMatrix& train, const ReturnsMatrix& test) {
    if (points.empty()) throw Error(ErrorCode::InvalidArgument, "frontier report needs at least one point");
    std::vector<FrontierReportRow> rows;
    rows.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Portfolio in = predict(points[i], train);
        const Portfolio out = predict(points[i], test);
        rows.push_back({i, in.returns.values.mean(), evaluate(measure, in.returns), out.returns.values.mean(),
                        evaluate(measure, out.returns)});
    }
    return rows;
}

double sharpe(const ReturnSeries& returns) {
    const double sd = dispersion(returns, Dispersion::StandardDeviation);
    return sd > 0.0 ? returns.values.mean() / sd : 0.0;
}

std::string format_number(double value) {
    if (value == 0.0) return "0";  // folds -0 into 0
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.12g", value);
    return buffer;
}

namespace {

/// Numbers are embedded pre-formatted so the output never depends on the
/// JSON library's own float printer.
std::string json_object(const Summary& summary) {
    std::string out = "{";
    for (std::size_t i = 0; i < summary.size(); ++i) {
        if (i > 0) out += ",";
        out += nlohmann::json(summary[i].first).dump() + ":" + format_number(summary[i].second);
    }
    return out + "}";
}

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
    std::string quoted = "\"";
    for (char c : text) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    return quoted + "\"";
}

}  // namespace

std::string summary_json(const Summary& summary) { return json_object(summary) + "\n"; }

std::string population_json(const SummaryTable& table) {
    std::string out = "[";
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        if (i > 0) out += ",";
        out += "{\"name\":" + nlohmann::json(table.names[i]).dump() + ",\"summary\":" + json_object(table.rows[i]) + "}";
    }
    return out + "]\n";
}

std::string population_csv(const SummaryTable& table) {
    std::ostringstream out;
    out << "name";
    for (const auto& field : summary_fields()) out << ',' << field;
    out << '\n';
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        out << csv_field(table.names[i]);
        for (const auto& [key, value] : table.rows[i]) out << ',' << format_number(value);
        out << '\n';
    }
    return out.str();
}

}  // namespace quantfolio
