#include "quantfolio/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "quantfolio/error.hpp"

namespace quantfolio {

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

Date next_day(Date d) {
    if (++d.day > days_in_month(d.year, d.month)) {
        d.day = 1;
        if (++d.month > 12) {
            d.month = 1;
            ++d.year;
        }
    }
    return d;
}

int parse_int(std::string_view text) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw Error(ErrorCode::MalformedCsv, "invalid date component '" + std::string(text) + "'");
    }
    return value;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

void check_dates(const std::vector<Date>& dates) {
    for (std::size_t i = 1; i < dates.size(); ++i) {
        if (!(dates[i - 1] < dates[i])) {
            throw Error(ErrorCode::NonMonotonicDates,
                        "date " + dates[i].to_string() + " does not follow " + dates[i - 1].to_string());
        }
    }
}

PriceFrame restrict_to(const PriceFrame& frame, const std::vector<Date>& keep) {
    PriceFrame out;
    out.assets = frame.assets;
    out.dates = keep;
    out.values.resize(static_cast<Eigen::Index>(keep.size()), frame.cols());
    Eigen::Index row = 0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < frame.dates.size() && k < keep.size(); ++i) {
        if (frame.dates[i] == keep[k]) {
            out.values.row(row++) = frame.values.row(static_cast<Eigen::Index>(i));
            ++k;
        }
    }
    return out;
}

}  // namespace

Date Date::parse(std::string_view text) {
    text = trim(text);
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw Error(ErrorCode::MalformedCsv, "expected YYYY-MM-DD date, got '" + std::string(text) + "'");
    }
    Date d{parse_int(text.substr(0, 4)), parse_int(text.substr(5, 2)), parse_int(text.substr(8, 2))};
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month)) {
        throw Error(ErrorCode::MalformedCsv, "not a calendar date: '" + std::string(text) + "'");
    }
    return d;
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
}

void PriceFrame::validate() const {
    if (values.rows() != static_cast<Eigen::Index>(dates.size()) ||
        values.cols() != static_cast<Eigen::Index>(assets.size())) {
        throw Error(ErrorCode::DimensionMismatch, "price matrix shape does not match dates/assets");
    }
    check_dates(dates);
    for (Eigen::Index t = 0; t < values.rows(); ++t) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            const double p = values(t, j);
            if (!std::isfinite(p) || p <= 0.0) {
                throw Error(ErrorCode::NonPositivePrice, "price for " + assets[static_cast<std::size_t>(j)] +
                                                             " on " + dates[static_cast<std::size_t>(t)].to_string() +
                                                             " is not a positive finite number");
            }
        }
    }
}

void ReturnsMatrix::validate() const {
    if (values.rows() != static_cast<Eigen::Index>(dates.size()) ||
        values.cols() != static_cast<Eigen::Index>(assets.size())) {
        throw Error(ErrorCode::DimensionMismatch, "returns matrix shape does not match dates/assets");
    }
    check_dates(dates);
    if (!values.allFinite()) {
        throw Error(ErrorCode::MissingCell, "returns contain non-finite values");
    }
    if (kind == ReturnKind::Simple && values.size() > 0 && values.minCoeff() <= -1.0) {
        throw Error(ErrorCode::NonPositivePrice, "simple return at or below -100%");
    }
}

ReturnsMatrix ReturnsMatrix::slice(Eigen::Index begin, Eigen::Index end) const {
    ReturnsMatrix out;
    out.assets = assets;
    out.kind = kind;
    out.dates.assign(dates.begin() + begin, dates.begin() + end);
    out.values = values.middleRows(begin, end - begin);
    return out;
}

ReturnsMatrix ReturnsMatrix::take_rows(const std::vector<Eigen::Index>& rows) const {
    ReturnsMatrix out;
    out.assets = assets;
    out.kind = kind;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), cols());
    out.dates.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.values.row(static_cast<Eigen::Index>(i)) = values.row(rows[i]);
        out.dates.push_back(dates[static_cast<std::size_t>(rows[i])]);
    }
    return out;
}

ReturnsMatrix ReturnsMatrix::take_columns(const std::vector<Eigen::Index>& columns) const {
    ReturnsMatrix out;
    out.dates = dates;
    out.kind = kind;
    out.values.resize(rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
        out.values.col(static_cast<Eigen::Index>(j)) = values.col(columns[j]);
        out.assets.push_back(assets[static_cast<std::size_t>(columns[j])]);
    }
    return out;
}

ReturnsMatrix make_returns(Matrix values, std::vector<std::string> assets) {
    ReturnsMatrix out;
    if (assets.empty()) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) assets.push_back("A" + std::to_string(j));
    }
    out.assets = std::move(assets);
    Date d{2000, 1, 3};
    out.dates.reserve(static_cast<std::size_t>(values.rows()));
    for (Eigen::Index t = 0; t < values.rows(); ++t) {
        out.dates.push_back(d);
        d = next_day(d);
    }
    out.values = std::move(values);
    return out;
}

PriceFrame load_prices(std::istream& source) {
    std::string line;
    if (!std::getline(source, line)) {
        throw Error(ErrorCode::MalformedCsv, "empty input");
    }
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
    auto header = split_fields(line);
    if (header.empty() || header.front() != "date") {
        throw Error(ErrorCode::MalformedCsv, "first header must be 'date'");
    }
    PriceFrame frame;
    for (std::size_t j = 1; j < header.size(); ++j) {
        if (header[j].empty()) throw Error(ErrorCode::MalformedCsv, "empty asset identifier in header");
        frame.assets.emplace_back(header[j]);
    }
    if (frame.assets.empty()) throw Error(ErrorCode::MalformedCsv, "no asset columns");

    const std::size_t n = frame.assets.size();
    std::vector<double> cells;
    std::size_t line_no = 1;
    while (std::getline(source, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() < n + 1) {
            throw Error(ErrorCode::MissingCell, "line " + std::to_string(line_no) + " has too few cells");
        }
        if (fields.size() > n + 1) {
            throw Error(ErrorCode::MalformedCsv, "line " + std::to_string(line_no) + " has too many cells");
        }
        frame.dates.push_back(Date::parse(fields[0]));
        for (std::size_t j = 1; j <= n; ++j) {
            auto cell = fields[j];
            if (cell.empty()) {
                throw Error(ErrorCode::MissingCell,
                            "line " + std::to_string(line_no) + ", column " + frame.assets[j - 1]);
            }
            double value = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
                throw Error(ErrorCode::MalformedCsv, "line " + std::to_string(line_no) + ": cannot parse '" +
                                                         std::string(cell) + "'");
            }
            cells.push_back(value);
        }
    }
    frame.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        cells.data(), static_cast<Eigen::Index>(frame.dates.size()), static_cast<Eigen::Index>(n));
    frame.validate();
    return frame;
}

PriceFrame load_prices_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MalformedCsv, "cannot open '" + path + "'");
    return load_prices(in);
}

ReturnsMatrix prices_to_returns(const PriceFrame& prices, ReturnKind kind) {
    if (prices.rows() < 2) {
        throw Error(ErrorCode::TooFewRows, "need at least two price rows");
    }
    ReturnsMatrix out;
    out.assets = prices.assets;
    out.kind = kind;
    out.dates.assign(prices.dates.begin() + 1, prices.dates.end());
    const auto t = prices.rows() - 1;
    Matrix ratio = prices.values.bottomRows(t).cwiseQuotient(prices.values.topRows(t));
    if (kind == ReturnKind::Simple) {
        out.values = ratio.array() - 1.0;
    } else {
        out.values = ratio.array().log();
    }
    return out;
}

std::pair<PriceFrame, PriceFrame> align(const PriceFrame& prices, const PriceFrame& factor_prices) {
    std::vector<Date> common;
    std::set_intersection(prices.dates.begin(), prices.dates.end(), factor_prices.dates.begin(),
                          factor_prices.dates.end(), std::back_inserter(common));
    if (common.empty()) {
        throw Error(ErrorCode::EmptyIntersection, "price and factor frames share no dates");
    }
    return {restrict_to(prices, common), restrict_to(factor_prices, common)};
}

std::pair<ReturnsMatrix, ReturnsMatrix> time_split(const ReturnsMatrix& returns, double test_fraction) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "test_fraction must lie in (0, 1)");
    }
    const auto t = returns.rows();
    auto test_len = static_cast<Eigen::Index>(std::floor(static_cast<double>(t) * test_fraction));
    test_len = std::max<Eigen::Index>(test_len, 1);
    if (t < 2 || test_len >= t) {
        throw Error(ErrorCode::DegenerateSplit, "cannot split " + std::to_string(t) + " rows into train and test");
    }
    return {returns.slice(0, t - test_len), returns.slice(t - test_len, t)};
}

}  // namespace quantfolio
