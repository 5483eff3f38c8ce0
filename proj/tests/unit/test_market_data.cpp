#include <cmath>
#include <functional>
#include <sstream>

#include <gtest/gtest.h>

#include "quantfolio/error.hpp"
#include "quantfolio/market_data.hpp"

namespace qf = quantfolio;

namespace {

qf::PriceFrame parse(const std::string& text) {
    std::istringstream in(text);
    return qf::load_prices(in);
}

qf::ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const qf::Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return qf::ErrorCode::InvalidArgument;
}

qf::PriceFrame column(std::vector<double> prices) {
    qf::PriceFrame f;
    f.assets = {"X"};
    f.values = qf::Matrix(static_cast<Eigen::Index>(prices.size()), 1);
    for (std::size_t i = 0; i < prices.size(); ++i) {
        f.values(static_cast<Eigen::Index>(i), 0) = prices[i];
        f.dates.push_back(qf::Date{2020, 1, static_cast<int>(i) + 1});
    }
    return f;
}

}  // namespace

TEST(Date, ParsesAndRoundTrips) {
    const auto d = qf::Date::parse("2024-02-29");
    EXPECT_EQ(d.year, 2024);
    EXPECT_EQ(d.month, 2);
    EXPECT_EQ(d.day, 29);
    EXPECT_EQ(d.to_string(), "2024-02-29");
    EXPECT_EQ(code_of([] { qf::Date::parse("2023-02-29"); }), qf::ErrorCode::MalformedCsv);
    EXPECT_EQ(code_of([] { qf::Date::parse("2023/01/02"); }), qf::ErrorCode::MalformedCsv);
    EXPECT_LT(qf::Date::parse("2023-12-31"), qf::Date::parse("2024-01-01"));
}

TEST(LoadPrices, ParsesValidFrame) {
    const auto f = parse("date,A,B\n2020-01-01,1,2\n2020-01-02,1.5,2.5\n2020-01-03,2,3\n");
    EXPECT_EQ(f.rows(), 3);
    EXPECT_EQ(f.cols(), 2);
    EXPECT_EQ(f.assets, (std::vector<std::string>{"A", "B"}));
    EXPECT_DOUBLE_EQ(f.values(1, 0), 1.5);
    EXPECT_DOUBLE_EQ(f.values(2, 1), 3.0);
}

TEST(LoadPrices, RejectsDuplicateDate) {
    EXPECT_EQ(code_of([] { parse("date,A\n2020-01-01,1\n2020-01-01,2\n"); }), qf::ErrorCode::NonMonotonicDates);
}

TEST(LoadPrices, RejectsDecreasingDate) {
    EXPECT_EQ(code_of([] { parse("date,A\n2020-01-02,1\n2020-01-01,2\n"); }), qf::ErrorCode::NonMonotonicDates);
}

TEST(LoadPrices, RejectsEmptyCell) {
    EXPECT_EQ(code_of([] { parse("date,A,B\n2020-01-01,1,\n2020-01-02,1,2\n"); }), qf::ErrorCode::MissingCell);
}

TEST(LoadPrices, RejectsNonPositivePrice) {
    EXPECT_EQ(code_of([] { parse("date,A\n2020-01-01,1\n2020-01-02,0\n"); }), qf::ErrorCode::NonPositivePrice);
}

TEST(LoadPrices, RejectsGarbage) {
    EXPECT_EQ(code_of([] { parse(""); }), qf::ErrorCode::MalformedCsv);
    EXPECT_EQ(code_of([] { parse("time,A\n2020-01-01,1\n"); }), qf::ErrorCode::MalformedCsv);
    EXPECT_EQ(code_of([] { parse("date,A\n2020-01-01,abc\n"); }), qf::ErrorCode::MalformedCsv);
}

TEST(PricesToReturns, SimpleReturns) {
    const auto r = qf::prices_to_returns(column({100, 110, 99}));
    ASSERT_EQ(r.rows(), 2);
    EXPECT_NEAR(r.values(0, 0), 0.10, 1e-15);
    EXPECT_NEAR(r.values(1, 0), -0.10, 1e-15);
    EXPECT_EQ(r.dates.front(), (qf::Date{2020, 1, 2}));
}

TEST(PricesToReturns, LogReturns) {
    const auto r = qf::prices_to_returns(column({100, 100 * std::exp(1.0)}), qf::ReturnKind::Log);
    ASSERT_EQ(r.rows(), 1);
    EXPECT_NEAR(r.values(0, 0), 1.0, 1e-14);
    EXPECT_EQ(r.kind, qf::ReturnKind::Log);
}

TEST(PricesToReturns, ConstantPricesGiveZero) {
    const auto r = qf::prices_to_returns(column({50, 50, 50}));
    EXPECT_EQ(r.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(PricesToReturns, NeedsTwoRows) {
    EXPECT_EQ(code_of([] { qf::prices_to_returns(column({50})); }), qf::ErrorCode::TooFewRows);
}

TEST(Align, IdenticalAxesUnchanged) {
    const auto a = column({1, 2, 3});
    const auto [x, y] = qf::align(a, a);
    EXPECT_EQ(x.dates, a.dates);
    EXPECT_EQ(y.values, a.values);
}

TEST(Align, IntersectsDates) {
    const auto a = column({1, 2, 3});  // Jan 1..3
    auto b = column({4, 5, 6});
    for (auto& d : b.dates) d.day += 1;  // Jan 2..4
    const auto [x, y] = qf::align(a, b);
    ASSERT_EQ(x.rows(), 2);
    EXPECT_EQ(x.dates, y.dates);
    EXPECT_EQ(x.dates.front(), (qf::Date{2020, 1, 2}));
    EXPECT_DOUBLE_EQ(x.values(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(y.values(0, 0), 4.0);
    EXPECT_DOUBLE_EQ(y.values(1, 0), 5.0);
}

TEST(Align, DisjointDatesFail) {
    const auto a = column({1, 2});
    auto b = column({1, 2});
    for (auto& d : b.dates) d.month = 6;
    EXPECT_EQ(code_of([&] { qf::align(a, b); }), qf::ErrorCode::EmptyIntersection);
}

TEST(TimeSplit, FloorArithmetic) {
    const auto r = qf::make_returns(qf::Matrix::Zero(10, 2));
    const auto [train, test] = qf::time_split(r, 0.2);
    EXPECT_EQ(train.rows(), 8);
    EXPECT_EQ(test.rows(), 2);
    EXPECT_EQ(test.dates.front(), r.dates[8]);
}

TEST(TimeSplit, ClampsToOneTestRow) {
    const auto r = qf::make_returns(qf::Matrix::Zero(5, 1));
    const auto [train, test] = qf::time_split(r, 0.2);
    EXPECT_EQ(train.rows(), 4);
    EXPECT_EQ(test.rows(), 1);
}

TEST(TimeSplit, DegenerateInputs) {
    const auto one = qf::make_returns(qf::Matrix::Zero(1, 1));
    EXPECT_EQ(code_of([&] { qf::time_split(one, 0.5); }), qf::ErrorCode::DegenerateSplit);
    const auto r = qf::make_returns(qf::Matrix::Zero(5, 1));
    EXPECT_EQ(code_of([&] { qf::time_split(r, 1.0); }), qf::ErrorCode::InvalidArgument);
}

TEST(ReturnsMatrix, SliceAndTake) {
    qf::Matrix v(4, 3);
    v << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
    const auto r = qf::make_returns(v, {"a", "b", "c"});
    const auto s = r.slice(1, 3);
    EXPECT_EQ(s.rows(), 2);
    EXPECT_EQ(s.dates.front(), r.dates[1]);
    EXPECT_DOUBLE_EQ(s.values(0, 0), 4.0);
    const auto t = r.take_rows({3, 0});
    EXPECT_DOUBLE_EQ(t.values(0, 2), 12.0);
    const auto c = r.take_columns({2, 0});
    EXPECT_EQ(c.assets, (std::vector<std::string>{"c", "a"}));
    EXPECT_DOUBLE_EQ(c.values(3, 1), 10.0);
}

TEST(ReturnsMatrix, ValidateRejectsNonFinite) {
    auto r = qf::make_returns(qf::Matrix::Zero(3, 1));
    r.values(1, 0) = std::nan("");
    EXPECT_EQ(code_of([&] { r.validate(); }), qf::ErrorCode::MissingCell);
}
