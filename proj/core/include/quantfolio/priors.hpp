/**
 * @file priors.hpp
 * @brief The (mu, sigma, scenarios) bundle consumed by the optimizers.
 *
 * Moment-based risk measures read mu and sigma; scenario-based measures
 * (CVaR, CDaR, MAD, worst realization) read the scenario matrix. The two
 * need not agree: a factor prior's scenarios carry no residual noise while
 * its sigma does.
 */
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "quantfolio/market_data.hpp"
#include "quantfolio/moments.hpp"

namespace quantfolio {

enum class PriorSource { Empirical, Factor, BlackLitterman };

struct Prior {
    Vector mu;
    Matrix sigma;
    ReturnsMatrix scenarios;  ///< may be empty when only moment-based measures are used
    PriorSource source = PriorSource::Empirical;

    Eigen::Index assets() const { return mu.size(); }
    const std::vector<std::string>& asset_names() const { return scenarios.assets; }
    /// Asset names, or A0, A1, ... when the prior carries none.
    std::vector<std::string> labels() const;
    void validate() const;
};

enum class MeanEstimator { Sample, ExponentiallyWeighted, BayesStein };
enum class CovarianceEstimator { Sample, ExponentiallyWeighted, LedoitWolf, Gerber };

struct EmpiricalPriorSettings {
    MeanEstimator mean = MeanEstimator::Sample;
    CovarianceEstimator covariance = CovarianceEstimator::Sample;
    double halflife = 60.0;    ///< for the exponentially weighted estimators
    double gerber_c = 0.5;
    bool denoise = false;      ///< apply Marchenko-Pastur clipping after estimation
    int rmt_passes = 2;
};

Prior empirical_prior(const ReturnsMatrix& returns, const EmpiricalPriorSettings& settings = {});

/// Loadings from a ridge regression with unpenalized intercept.
struct FactorLoadings {
    Vector intercept;  ///< N
    Matrix loadings;   ///< N x K
    Vector residual_variance;
};

FactorLoadings fit_loadings(const ReturnsMatrix& returns, const ReturnsMatrix& factors, double ridge_alpha);

Prior factor_model_prior(const ReturnsMatrix& returns, const ReturnsMatrix& factors, double ridge_alpha);

/// Black-Litterman views: P w = Q with uncertainty omega.
struct ViewSet {
    Matrix picks;                  ///< K x N
    Vector values;                 ///< K
    std::optional<Vector> omega;   ///< K diagonal variances; default diag(P tau Sigma P')
    double tau = 0.05;

    Eigen::Index size() const { return values.size(); }
};

Prior black_litterman_prior(const Prior& base, const ViewSet& views);

}  // namespace quantfolio
