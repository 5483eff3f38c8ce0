#include "quantfolio/allocator.hpp"

#include "quantfolio/error.hpp"

namespace quantfolio {

Prior estimate_prior(const ReturnsMatrix& returns, const PriorSettings& settings, const FitContext& context) {
    Prior prior;
    switch (settings.kind) {
        case PriorKind::Empirical: prior = empirical_prior(returns, settings.empirical); break;
        case PriorKind::FactorModel:
            if (context.factors == nullptr) {
                throw Error(ErrorCode::InvalidConfig, "the factor-model prior needs factor returns");
            }
            if (context.factors->rows() != returns.rows()) {
                throw Error(ErrorCode::DateMisalignment, "factor returns are not row-aligned with asset returns");
            }
            prior = factor_model_prior(returns, *context.factors, settings.ridge_alpha);
            break;
        case PriorKind::BlackLitterman:
            if (!settings.views) throw Error(ErrorCode::InvalidConfig, "the Black-Litterman prior needs views");
            prior = black_litterman_prior(empirical_prior(returns, settings.empirical), *settings.views);
            break;
    }
    if (context.covariance_jitter > 0.0) prior.sigma.diagonal().array() += context.covariance_jitter;
    return prior;
}

MeanRiskAllocator::MeanRiskAllocator(ProblemSpec spec, PriorSettings prior, std::string name)
    : spec_(std::move(spec)), prior_(std::move(prior)), name_(std::move(name)) {}

Weights MeanRiskAllocator::fit(const ReturnsMatrix& returns, const FitContext& context) const {
    ProblemSpec spec = spec_;
    spec.prior = estimate_prior(returns, prior_, context);
    return optimize(spec);
}

}  // namespace quantfolio
