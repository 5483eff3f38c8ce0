// Shared fixtures for the unit, CLI and acceptance tests.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quantfolio/market_data.hpp"

namespace quantfolio::testing {

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double mean = 0.0,
                              double sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(mean, sd);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
    }
    return m;
}

/// Well-conditioned random SPD matrix A A' / n + eps I.
inline Matrix random_spd(Eigen::Index n, std::uint64_t seed, double ridge = 0.1) {
    const Matrix a = gaussian_matrix(n, n, seed);
    Matrix s = a * a.transpose() / static_cast<double>(n);
    s.diagonal().array() += ridge;
    return s;
}

/// Factor-structured synthetic daily returns with a per-asset drift.
inline ReturnsMatrix synthetic_returns(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vector drift(cols), beta(cols), idio(cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        drift[j] = 0.0002 + 0.0008 * u(rng);
        beta[j] = 0.5 + u(rng);
        idio[j] = 0.006 + 0.01 * u(rng);
    }
    Matrix x(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double market = 0.009 * z(rng);
        for (Eigen::Index j = 0; j < cols; ++j) x(i, j) = drift[j] + beta[j] * market + idio[j] * z(rng);
    }
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < cols; ++j) names.push_back("S" + std::string(j < 10 ? "0" : "") + std::to_string(j));
    return make_returns(std::move(x), std::move(names));
}

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace quantfolio::testing
