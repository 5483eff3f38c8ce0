/**
 * @file moments.hpp
 * @brief Expected-return and covariance estimators.
 *
 * All estimators return per-period moments. Covariances use the unbiased
 * (T - 1) convention unless stated otherwise.
 */
#pragma once

#include "quantfolio/error.hpp"
#include "quantfolio/market_data.hpp"

namespace quantfolio {

struct MomentEstimate {
    Vector mu;
    Matrix sigma;
    Eigen::Index sample_size = 0;
    /// Shrinkage intensity chosen by the estimator, when it has one.
    double shrinkage = 0.0;

    /// Throws unless sigma is symmetric (1e-12) and PSD (min eigenvalue >= -1e-10 scaled).
    void validate() const;
};

/// Diagonal jitter applied once when a factorization fails.
double inversion_jitter(const Matrix& m);

/// Solves m * x = rhs for symmetric PSD m. On failure the jitter above is added
/// to the diagonal once; a second failure throws `on_failure`.
Matrix solve_psd(const Matrix& m, const Matrix& rhs, ErrorCode on_failure);

MomentEstimate sample_moments(const ReturnsMatrix& returns);

/// Exponentially weighted mean and covariance; weights decay by half every
/// `halflife` periods going back from the most recent observation.
MomentEstimate ew_moments(const ReturnsMatrix& returns, double halflife);

/// Shrinks the mean vector toward the minimum-variance portfolio mean.
MomentEstimate bayes_stein(const MomentEstimate& estimate);

/// Shrinks the sample covariance toward (tr(S)/N) I with the data-driven
/// optimal intensity; the intensity is reported in `shrinkage`.
MomentEstimate ledoit_wolf(const ReturnsMatrix& returns);

/// Gerber co-movement covariance with exceedance threshold `c` standard deviations.
MomentEstimate gerber(const ReturnsMatrix& returns, double c = 0.5);

/// Raw (unrepaired) Gerber statistic matrix; exposed for inspection.
Matrix gerber_statistic(const ReturnsMatrix& returns, double c = 0.5);

/// Marchenko-Pastur eigenvalue clipping on the correlation matrix.
MomentEstimate denoise_rmt(const MomentEstimate& estimate, int passes = 2);

/// Projects a symmetric matrix onto the PSD cone by clipping eigenvalues at 0.
Matrix clip_to_psd(const Matrix& m);

Matrix covariance_to_correlation(const Matrix& sigma);

}  // namespace quantfolio
