/**
 * @file market_data.hpp
 * @brief Price ingestion, time alignment and price-to-return conversion.
 *
 * Everything here is a pure function over immutable values. Missing data is
 * rejected rather than imputed; align() is the only way to reconcile two
 * calendars.
 */
#pragma once

#include <compare>
#include <istream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace quantfolio {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Calendar date parsed from ISO-8601 `YYYY-MM-DD`.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    /// Throws Error(MalformedCsv) for anything that is not a valid calendar date.
    static Date parse(std::string_view text);
    std::string to_string() const;

    auto operator<=>(const Date&) const = default;
};

struct PriceFrame {
    std::vector<Date> dates;
    std::vector<std::string> assets;
    Matrix values;  ///< T x N, strictly positive

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }

    /// Checks the frame invariants; throws the matching Error on violation.
    void validate() const;
};

enum class ReturnKind { Simple, Log };

struct ReturnsMatrix {
    std::vector<Date> dates;
    std::vector<std::string> assets;
    Matrix values;  ///< T x N per-period returns
    ReturnKind kind = ReturnKind::Simple;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }

    void validate() const;

    /// Rows [begin, end) as a new matrix.
    ReturnsMatrix slice(Eigen::Index begin, Eigen::Index end) const;
    /// Arbitrary row subset, in the order given.
    ReturnsMatrix take_rows(const std::vector<Eigen::Index>& rows) const;
    /// Column subset, in the order given.
    ReturnsMatrix take_columns(const std::vector<Eigen::Index>& columns) const;
};

/// Builds a ReturnsMatrix from raw values with synthetic consecutive dates.
/// Intended for tests and synthetic experiments.
ReturnsMatrix make_returns(Matrix values, std::vector<std::string> assets = {});

PriceFrame load_prices(std::istream& source);
PriceFrame load_prices_file(const std::string& path);

ReturnsMatrix prices_to_returns(const PriceFrame& prices, ReturnKind kind = ReturnKind::Simple);

/// Restricts both frames to their common dates.
std::pair<PriceFrame, PriceFrame> align(const PriceFrame& prices, const PriceFrame& factor_prices);

/// Chronological split: the last floor(T * test_fraction) rows (at least one) form the test set.
std::pair<ReturnsMatrix, ReturnsMatrix> time_split(const ReturnsMatrix& returns, double test_fraction);

}  // namespace quantfolio
