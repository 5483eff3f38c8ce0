#include "quantfolio/moments.hpp"

#include <algorithm>
#include <cmath>

namespace quantfolio {

namespace {

void require_rows(const ReturnsMatrix& returns, Eigen::Index min_rows) {
    if (returns.rows() < min_rows) {
        throw Error(ErrorCode::TooFewSamples, "need at least " + std::to_string(min_rows) + " observations, got " +
                                                  std::to_string(returns.rows()));
    }
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Eigen::SelfAdjointEigenSolver<Matrix> eigen_of(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success) {
        throw Error(ErrorCode::DecompositionFailure, "symmetric eigendecomposition did not converge");
    }
    return es;
}

}  // namespace

void MomentEstimate::validate() const {
    if (sigma.rows() != sigma.cols() || sigma.rows() != mu.size()) {
        throw Error(ErrorCode::DimensionMismatch, "mu and sigma dimensions disagree");
    }
    if (sigma.size() == 0) return;
    const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw Error(ErrorCode::DecompositionFailure, "covariance is not symmetric");
    }
    const double min_eig = eigen_of(symmetrize(sigma)).eigenvalues().minCoeff();
    if (min_eig < -1e-10 * scale) {
        throw Error(ErrorCode::DecompositionFailure, "covariance is not positive semidefinite");
    }
}

double inversion_jitter(const Matrix& m) {
    const double mean_diag = m.rows() > 0 ? m.diagonal().mean() : 0.0;
    return 1e-10 * (mean_diag > 0.0 ? mean_diag : 1.0);
}

Matrix solve_psd(const Matrix& m, const Matrix& rhs, ErrorCode on_failure) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() == Eigen::Success) return llt.solve(rhs);
    Matrix jittered = m;
    jittered.diagonal().array() += inversion_jitter(m);
    llt.compute(jittered);
    if (llt.info() != Eigen::Success) {
        throw Error(on_failure, "matrix is not invertible even after diagonal jitter");
    }
    return llt.solve(rhs);
}

MomentEstimate sample_moments(const ReturnsMatrix& returns) {
    require_rows(returns, 2);
    MomentEstimate est;
    est.sample_size = returns.rows();
    est.mu = returns.values.colwise().mean().transpose();
    Matrix centered = returns.values.rowwise() - est.mu.transpose();
    est.sigma = symmetrize(centered.transpose() * centered / static_cast<double>(returns.rows() - 1));
    return est;
}

MomentEstimate ew_moments(const ReturnsMatrix& returns, double halflife) {
    require_rows(returns, 2);
    if (!(halflife > 0.0)) throw Error(ErrorCode::InvalidArgument, "halflife must be positive");
    const auto t = returns.rows();
    Vector w(t);
    for (Eigen::Index i = 0; i < t; ++i) {
        w[i] = std::exp2(-static_cast<double>(t - 1 - i) / halflife);
    }
    w /= w.sum();
    MomentEstimate est;
    est.sample_size = t;
    est.mu = returns.values.transpose() * w;
    Matrix centered = returns.values.rowwise() - est.mu.transpose();
    const double correction = 1.0 - w.squaredNorm();
    est.sigma = symmetrize(centered.transpose() * w.asDiagonal() * centered / correction);
    return est;
}

MomentEstimate bayes_stein(const MomentEstimate& estimate) {
    const auto n = estimate.mu.size();
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "Bayes-Stein needs at least two assets");
    const Vector ones = Vector::Ones(n);
    const Vector inv_ones = solve_psd(estimate.sigma, ones, ErrorCode::SingularCovariance);
    const Vector w_gmv = inv_ones / ones.dot(inv_ones);
    const double mu0 = w_gmv.dot(estimate.mu);
    const Vector gap = estimate.mu - mu0 * ones;
    const Vector inv_gap = solve_psd(estimate.sigma, gap, ErrorCode::SingularCovariance);
    const double nd = static_cast<double>(n);
    const double quad = std::max(0.0, gap.dot(inv_gap));
    double phi = (nd + 2.0) / ((nd + 2.0) + static_cast<double>(estimate.sample_size) * quad);
    phi = std::clamp(phi, 0.0, 1.0);

    MomentEstimate out = estimate;
    out.mu = (1.0 - phi) * estimate.mu + phi * mu0 * ones;
    out.shrinkage = phi;
    return out;
}

MomentEstimate ledoit_wolf(const ReturnsMatrix& returns) {
    require_rows(returns, 2);
    const auto t = returns.rows();
    const auto n = returns.cols();
    MomentEstimate est = sample_moments(returns);

    // Intensity from the biased (1/T) moments of the original estimator.
    const Matrix x = returns.values.rowwise() - est.mu.transpose();
    const Matrix s_biased = x.transpose() * x / static_cast<double>(t);
    const double target_scale = s_biased.trace() / static_cast<double>(n);
    Matrix diff = s_biased;
    diff.diagonal().array() -= target_scale;
    const double d2 = diff.squaredNorm();

    double b2_bar = 0.0;
    const double s_norm2 = s_biased.squaredNorm();
    for (Eigen::Index i = 0; i < t; ++i) {
        const Vector xi = x.row(i).transpose();
        const double xn = xi.squaredNorm();
        b2_bar += xn * xn - 2.0 * xi.dot(s_biased * xi) + s_norm2;
    }
    b2_bar /= static_cast<double>(t) * static_cast<double>(t);
    const double b2 = std::min(b2_bar, d2);
    const double delta = d2 > 0.0 ? std::clamp(b2 / d2, 0.0, 1.0) : 0.0;

    const double mean_var = est.sigma.trace() / static_cast<double>(n);
    Matrix shrunk = (1.0 - delta) * est.sigma;
    shrunk.diagonal().array() += delta * mean_var;
    est.sigma = symmetrize(shrunk);
    est.shrinkage = delta;
    return est;
}

Matrix gerber_statistic(const ReturnsMatrix& returns, double c) {
    require_rows(returns, 2);
    if (!(c > 0.0)) throw Error(ErrorCode::InvalidArgument, "Gerber threshold must be positive");
    const auto n = returns.cols();
    const auto t = returns.rows();
    const Vector sd = sample_moments(returns).sigma.diagonal().cwiseSqrt();

    // +1 / -1 for an exceedance in that direction, 0 otherwise
    Eigen::MatrixXi hits = Eigen::MatrixXi::Zero(t, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double threshold = c * sd[j];
        for (Eigen::Index i = 0; i < t; ++i) {
            const double r = returns.values(i, j);
            if (std::abs(r) >= threshold && r != 0.0) hits(i, j) = r > 0.0 ? 1 : -1;
        }
    }
    Matrix g = Matrix::Identity(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = a + 1; b < n; ++b) {
            long concordant = 0;
            long discordant = 0;
            for (Eigen::Index i = 0; i < t; ++i) {
                const int prod = hits(i, a) * hits(i, b);
                if (prod > 0) ++concordant;
                else if (prod < 0) ++discordant;
            }
            const long total = concordant + discordant;
            const double value = total > 0 ? static_cast<double>(concordant - discordant) / static_cast<double>(total) : 0.0;
            g(a, b) = value;
            g(b, a) = value;
        }
    }
    return g;
}

Matrix clip_to_psd(const Matrix& m) {
    auto es = eigen_of(symmetrize(m));
    const Vector clipped = es.eigenvalues().cwiseMax(0.0);
    return symmetrize(es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose());
}

MomentEstimate gerber(const ReturnsMatrix& returns, double c) {
    MomentEstimate est = sample_moments(returns);
    Matrix g = clip_to_psd(gerber_statistic(returns, c));
    // Clipping can move the unit diagonal; rescale so the output keeps the sample variances.
    Vector inv_sqrt(g.rows());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        inv_sqrt[i] = g(i, i) > 0.0 ? 1.0 / std::sqrt(g(i, i)) : 0.0;
    }
    g = inv_sqrt.asDiagonal() * g * inv_sqrt.asDiagonal();
    g.diagonal().setOnes();
    const Vector variances = est.sigma.diagonal();
    const Vector sd = variances.cwiseSqrt();
    est.sigma = symmetrize(sd.asDiagonal() * g * sd.asDiagonal());
    est.sigma.diagonal() = variances;
    return est;
}

Matrix covariance_to_correlation(const Matrix& sigma) {
    const Vector sd = sigma.diagonal().cwiseSqrt();
    for (Eigen::Index i = 0; i < sd.size(); ++i) {
        if (!(sd[i] > 0.0)) throw Error(ErrorCode::ZeroVarianceAsset, "asset " + std::to_string(i) + " has zero variance");
    }
    const Vector inv = sd.cwiseInverse();
    Matrix corr = inv.asDiagonal() * sigma * inv.asDiagonal();
    corr.diagonal().setOnes();
    return symmetrize(corr);
}

MomentEstimate denoise_rmt(const MomentEstimate& estimate, int passes) {
    const auto n = estimate.sigma.rows();
    if (estimate.sample_size < 1) throw Error(ErrorCode::TooFewSamples, "denoising needs the sample size");
    if (passes < 1) throw Error(ErrorCode::InvalidArgument, "rmt passes must be at least 1");
    const Matrix corr = covariance_to_correlation(estimate.sigma);
    auto es = eigen_of(corr);
    const Vector& eig = es.eigenvalues();

    const double q = static_cast<double>(n) / static_cast<double>(estimate.sample_size);
    const double edge_factor = (1.0 + std::sqrt(q)) * (1.0 + std::sqrt(q));
    double noise_var = 1.0;
    auto noise_mean = [&](double cutoff, long& count) {
        double sum = 0.0;
        count = 0;
        for (Eigen::Index i = 0; i < eig.size(); ++i) {
            if (eig[i] <= cutoff) {
                sum += eig[i];
                ++count;
            }
        }
        return count > 0 ? sum / static_cast<double>(count) : 0.0;
    };
    long count = 0;
    for (int pass = 0; pass < passes; ++pass) {
        const double mean = noise_mean(edge_factor * noise_var, count);
        if (count == 0) break;
        noise_var = mean;
    }
    const double cutoff = edge_factor * noise_var;
    const double flat = noise_mean(cutoff, count);

    Vector cleaned = eig;
    if (count > 0) {
        for (Eigen::Index i = 0; i < cleaned.size(); ++i) {
            if (eig[i] <= cutoff) cleaned[i] = flat;
        }
    }
    Matrix rebuilt = symmetrize(es.eigenvectors() * cleaned.asDiagonal() * es.eigenvectors().transpose());
    const Vector inv = rebuilt.diagonal().cwiseSqrt().cwiseInverse();
    rebuilt = inv.asDiagonal() * rebuilt * inv.asDiagonal();
    rebuilt.diagonal().setOnes();

    MomentEstimate out = estimate;
    const Vector sd = estimate.sigma.diagonal().cwiseSqrt();
    out.sigma = symmetrize(sd.asDiagonal() * rebuilt * sd.asDiagonal());
    out.sigma.diagonal() = estimate.sigma.diagonal();
    return out;
}

}  // namespace quantfolio
