/**
 * @file allocator.hpp
 * @brief Common fit interface shared by the mean-risk optimizer, the
 * hierarchical allocators and the ensembles.
 *
 * An allocator is an immutable recipe: fit() maps a returns window to a
 * weight vector and never mutates the allocator, so one instance can be
 * fitted concurrently on many cross-validation splits.
 */
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "quantfolio/mean_risk.hpp"
#include "quantfolio/portfolio.hpp"
#include "quantfolio/priors.hpp"

namespace quantfolio {

struct FitContext {
    int threads = 1;
    std::uint64_t seed = 0;
    /// Factor returns row-aligned with the returns passed to fit(); needed by the factor-model prior.
    const ReturnsMatrix* factors = nullptr;
    /// Added to the diagonal of every estimated covariance (used to regularize degenerate inputs).
    double covariance_jitter = 0.0;
};

class Allocator {
public:
    virtual ~Allocator() = default;

    virtual std::string name() const = 0;
    /// Long-only allocators return non-negative weights summing to one.
    virtual Weights fit(const ReturnsMatrix& returns, const FitContext& context) const = 0;
};

using AllocatorPtr = std::shared_ptr<const Allocator>;

enum class PriorKind { Empirical, FactorModel, BlackLitterman };

struct PriorSettings {
    PriorKind kind = PriorKind::Empirical;
    EmpiricalPriorSettings empirical;
    double ridge_alpha = 0.0;       ///< factor-model loadings regression
    std::optional<ViewSet> views;   ///< Black-Litterman views over the empirical base
};

/// Estimates (mu, Sigma, scenarios) from a returns window.
Prior estimate_prior(const ReturnsMatrix& returns, const PriorSettings& settings, const FitContext& context = {});

/// Mean-risk optimization on a freshly estimated prior; the ProblemSpec's own prior is ignored.
class MeanRiskAllocator final : public Allocator {
public:
    MeanRiskAllocator(ProblemSpec spec, PriorSettings prior, std::string name = "mean_risk");

    std::string name() const override { return name_; }
    Weights fit(const ReturnsMatrix& returns, const FitContext& context) const override;

    const ProblemSpec& spec() const { return spec_; }

private:
    ProblemSpec spec_;
    PriorSettings prior_;
    std::string name_;
};

}  // namespace quantfolio
