#include <cmath>

#include <gtest/gtest.h>

#include "quantfolio/error.hpp"
#include "quantfolio/portfolio.hpp"
#include "test_support.hpp"

namespace qf = quantfolio;

namespace {

double field(const qf::Summary& s, const std::string& name) {
    for (const auto& [k, v] : s)
        if (k == name) return v;
    ADD_FAILURE() << "missing field " << name;
    return std::nan("");
}

qf::Weights weights_of(const qf::ReturnsMatrix& r, qf::Vector v) { return qf::Weights{r.assets, std::move(v), {}}; }

}  // namespace

TEST(Summary, HandArithmetic) {
    qf::Vector v(2);
    v << 0.1, -0.5;
    const auto s = qf::summary(qf::as_series(v), 252);
    EXPECT_NEAR(field(s, "cumulative_return"), -0.45, 1e-15);
    EXPECT_NEAR(field(s, "max_drawdown"), 0.5, 1e-15);
    EXPECT_NEAR(field(s, "annualized_mean"), -0.2 * 252, 1e-12);
    EXPECT_NEAR(field(s, "annualized_volatility"), std::sqrt(0.18) * std::sqrt(252.0), 1e-12);
    EXPECT_NEAR(field(s, "worst_realization"), 0.5, 1e-15);
}

TEST(Summary, ZeroSeries) {
    for (const auto& [name, value] : qf::summary(qf::as_series(qf::Vector::Zero(10)))) EXPECT_EQ(value, 0.0) << name;
}

TEST(Summary, FieldOrderAndCount) {
    const auto s = qf::summary(qf::as_series(qf::Vector::LinSpaced(5, -0.01, 0.02)));
    ASSERT_EQ(s.size(), qf::summary_fields().size());
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s[i].first, qf::summary_fields()[i]);
}

TEST(Summary, NeedsTwoPeriods) { EXPECT_THROW(qf::summary(qf::as_series(qf::Vector::Zero(1))), qf::Error); }

TEST(Predict, UnitVectorSelectsColumn) {
    const auto r = qf::testing::synthetic_returns(30, 3, 1);
    const auto p = qf::predict(weights_of(r, qf::Vector::Unit(3, 2)), r, "k");
    EXPECT_EQ(p.returns.values, r.values.col(2));
    EXPECT_EQ(p.returns.dates, r.dates);
    const auto single = qf::summary(p);
    const auto direct = qf::summary(qf::as_series(r.values.col(2)));
    EXPECT_EQ(single, direct);
}

TEST(Predict, EqualWeightsIsRowMean) {
    const auto r = qf::testing::synthetic_returns(30, 2, 2);
    const auto p = qf::predict(weights_of(r, qf::Vector::Constant(2, 0.5)), r);
    EXPECT_LT((p.returns.values - r.values.rowwise().mean()).cwiseAbs().maxCoeff(), 1e-17);
}

TEST(Predict, ZeroReturns) {
    const auto r = qf::make_returns(qf::Matrix::Zero(5, 2), {"a", "b"});
    EXPECT_EQ(qf::predict(weights_of(r, qf::Vector::Constant(2, 0.5)), r).returns.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Predict, AssetMismatch) {
    const auto r = qf::make_returns(qf::Matrix::Zero(5, 2), {"a", "b"});
    try {
        qf::predict(qf::Weights{{"b", "a"}, qf::Vector::Zero(2), {}}, r);
        FAIL();
    } catch (const qf::Error& e) {
        EXPECT_EQ(e.code(), qf::ErrorCode::AssetMismatch);
    }
}

TEST(Population, OrderAndIdentity) {
    const auto r = qf::testing::synthetic_returns(40, 2, 3);
    qf::Population pop;
    pop.members.push_back(qf::predict(weights_of(r, qf::Vector::Unit(2, 1)), r, "second"));
    pop.members.push_back(qf::predict(weights_of(r, qf::Vector::Unit(2, 0)), r, "first"));
    pop.members.push_back(qf::predict(weights_of(r, qf::Vector::Unit(2, 0)), r, "again"));
    const auto table = qf::population_summary(pop);
    EXPECT_EQ(table.names, (std::vector<std::string>{"second", "first", "again"}));
    EXPECT_EQ(table.rows[0], qf::summary(pop.members[0]));
    EXPECT_EQ(table.rows[1], table.rows[2]);
    EXPECT_THROW(qf::population_summary(qf::Population{}), qf::Error);
}

TEST(Population, CsvAndJsonShapes) {
    const auto r = qf::testing::synthetic_returns(40, 2, 4);
    qf::Population pop;
    pop.members.push_back(qf::predict(weights_of(r, qf::Vector::Unit(2, 1)), r, "x,y"));
    const auto table = qf::population_summary(pop);
    const auto csv = qf::population_csv(table);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "name,cumulative_return,annualized_mean,annualized_volatility,sharpe_ratio,cvar_95,cdar_95,max_drawdown,"
              "worst_realization");
    EXPECT_NE(csv.find("\"x,y\""), std::string::npos);
    EXPECT_EQ(qf::population_json(table).front(), '[');
}

TEST(MultiPeriod, AppendRejectsOverlap) {
    qf::MultiPeriodPortfolio m;
    m.append(qf::Segment{qf::Vector::Ones(1), 0, 2, {}, {}}, qf::Vector::Zero(2), {});
    EXPECT_THROW(m.append(qf::Segment{qf::Vector::Ones(1), 1, 3, {}, {}}, qf::Vector::Zero(2), {}), qf::Error);
    m.append(qf::Segment{qf::Vector::Ones(1), 4, 5, {}, {}}, qf::Vector::Ones(1), {});
    EXPECT_EQ(m.returns.size(), 3);
}

TEST(FrontierReport, SameDataCoincides) {
    const auto r = qf::testing::synthetic_returns(60, 3, 5);
    const std::vector<qf::Weights> pts = {weights_of(r, qf::Vector::Constant(3, 1.0 / 3)),
                                          weights_of(r, qf::Vector::Unit(3, 0))};
    const auto rows = qf::frontier_report(pts, qf::RiskMeasure::cvar(), r, r);
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& row : rows) {
        EXPECT_EQ(row.train_return, row.test_return);
        EXPECT_EQ(row.train_risk, row.test_risk);
    }
}

TEST(Sharpe, ZeroVolatilityIsZero) {
    EXPECT_EQ(qf::sharpe(qf::as_series(qf::Vector::Constant(4, 0.01))), 0.0);
    qf::Vector v(2);
    v << 0.0, 2.0;
    EXPECT_NEAR(qf::sharpe(qf::as_series(v)), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(FormatNumber, TwelveDigits) {
    EXPECT_EQ(qf::format_number(-0.0), "0");
    EXPECT_EQ(qf::format_number(1.0 / 3.0), "0.333333333333");
    EXPECT_EQ(qf::format_number(1e-20), "1e-20");
}
