#include "quantfolio/priors.hpp"

#include <cmath>

#include "quantfolio/error.hpp"

namespace quantfolio {

std::vector<std::string> Prior::labels() const {
    if (static_cast<Eigen::Index>(scenarios.assets.size()) == assets()) return scenarios.assets;
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < assets(); ++i) out.push_back("A" + std::to_string(i));
    return out;
}

void Prior::validate() const {
    if (scenarios.rows() > 0 && scenarios.cols() != mu.size()) {
        throw Error(ErrorCode::DimensionMismatch, "scenario columns do not match the mean vector");
    }
    MomentEstimate{mu, sigma, scenarios.rows()}.validate();
}

Prior empirical_prior(const ReturnsMatrix& returns, const EmpiricalPriorSettings& settings) {
    MomentEstimate base = sample_moments(returns);

    Vector mu;
    switch (settings.mean) {
        case MeanEstimator::Sample: mu = base.mu; break;
        case MeanEstimator::ExponentiallyWeighted: mu = ew_moments(returns, settings.halflife).mu; break;
        case MeanEstimator::BayesStein: mu = bayes_stein(base).mu; break;
    }

    MomentEstimate cov;
    switch (settings.covariance) {
        case CovarianceEstimator::Sample: cov = base; break;
        case CovarianceEstimator::ExponentiallyWeighted: cov = ew_moments(returns, settings.halflife); break;
        case CovarianceEstimator::LedoitWolf: cov = ledoit_wolf(returns); break;
        case CovarianceEstimator::Gerber: cov = gerber(returns, settings.gerber_c); break;
    }
    if (settings.denoise) cov = denoise_rmt(cov, settings.rmt_passes);

    return Prior{std::move(mu), std::move(cov.sigma), returns, PriorSource::Empirical};
}

FactorLoadings fit_loadings(const ReturnsMatrix& returns, const ReturnsMatrix& factors, double ridge_alpha) {
    if (returns.dates != factors.dates) {
        throw Error(ErrorCode::DateMisalignment, "asset and factor returns must share the same date axis");
    }
    if (!(ridge_alpha >= 0.0)) throw Error(ErrorCode::InvalidArgument, "ridge alpha must be non-negative");
    const auto t = returns.rows();
    const auto k = factors.cols();
    if (t <= k + 1) {
        throw Error(ErrorCode::TooFewSamples, "need more observations than factors + 1");
    }
    const Vector f_mean = factors.values.colwise().mean().transpose();
    const Vector x_mean = returns.values.colwise().mean().transpose();
    const Matrix fc = factors.values.rowwise() - f_mean.transpose();
    const Matrix xc = returns.values.rowwise() - x_mean.transpose();

    Matrix gram = fc.transpose() * fc;
    gram.diagonal().array() += ridge_alpha;
    // K x N coefficients; the intercept absorbs the means so it is never penalized
    const Matrix coef = solve_psd(gram, fc.transpose() * xc, ErrorCode::SingularSystem);

    FactorLoadings out;
    out.loadings = coef.transpose();
    out.intercept = x_mean - out.loadings * f_mean;
    const Matrix residuals = xc - fc * coef;
    out.residual_variance = residuals.colwise().squaredNorm().transpose() / static_cast<double>(t - 1);
    return out;
}

Prior factor_model_prior(const ReturnsMatrix& returns, const ReturnsMatrix& factors, double ridge_alpha) {
    const FactorLoadings fit = fit_loadings(returns, factors, ridge_alpha);
    const MomentEstimate f = sample_moments(factors);

    Prior prior;
    prior.source = PriorSource::Factor;
    prior.mu = fit.intercept + fit.loadings * f.mu;
    Matrix sigma = fit.loadings * f.sigma * fit.loadings.transpose();
    sigma.diagonal() += fit.residual_variance;
    prior.sigma = 0.5 * (sigma + sigma.transpose());

    prior.scenarios = returns;
    prior.scenarios.values = (factors.values * fit.loadings.transpose()).rowwise() + fit.intercept.transpose();
    return prior;
}

Prior black_litterman_prior(const Prior& base, const ViewSet& views) {
    const auto n = base.assets();
    const auto k = views.size();
    if (!(views.tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be positive");
    if (views.picks.rows() != k || (k > 0 && views.picks.cols() != n)) {
        throw Error(ErrorCode::DimensionMismatch, "pick matrix must be K x N");
    }
    if (views.omega && views.omega->size() != k) {
        throw Error(ErrorCode::DimensionMismatch, "omega must have one entry per view");
    }

    Prior out = base;
    out.source = PriorSource::BlackLitterman;
    const Matrix tau_sigma = views.tau * base.sigma;
    if (k == 0) {
        out.sigma = base.sigma + tau_sigma;
        return out;
    }

    // Woodbury form of [(tau S)^-1 + P' O^-1 P]^-1, which avoids inverting sigma.
    const Matrix& p = views.picks;
    const Matrix p_ts = p * tau_sigma;  // K x N
    Matrix middle = p_ts * p.transpose();
    Vector omega = views.omega ? *views.omega : Vector(middle.diagonal());
    for (Eigen::Index i = 0; i < k; ++i) {
        if (!(omega[i] > 0.0)) throw Error(ErrorCode::SingularSystem, "view uncertainty must be positive");
    }
    middle.diagonal() += omega;
    const Vector gap = views.values - p * base.mu;
    out.mu = base.mu + p_ts.transpose() * solve_psd(middle, gap, ErrorCode::SingularSystem);
    const Matrix posterior_cov = tau_sigma - p_ts.transpose() * solve_psd(middle, p_ts, ErrorCode::SingularSystem);
    Matrix sigma = base.sigma + posterior_cov;
    out.sigma = 0.5 * (sigma + sigma.transpose());
    return out;
}

}  // namespace quantfolio
