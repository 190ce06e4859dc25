#include "diffscm/fda.hpp"

#include <cmath>

namespace diffscm {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid) {
    const Eigen::Index g = grid.size();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(g);
    for (Eigen::Index i = 0; i + 1 < g; ++i) {
        const double h = grid[i + 1] - grid[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    return w;
}

Eigen::MatrixXd raw_family(const std::string& kind, int K_n, const Eigen::VectorXd& grid) {
    const Eigen::Index g = grid.size();
    const double lo = grid[0];
    const double span = grid[g - 1] - lo;
    Eigen::MatrixXd raw(g, K_n);
    if (kind == "fourier") {
        // constant, then sin/cos pairs of increasing frequency
        for (int m = 0; m < K_n; ++m) {
            const int harmonic = (m + 1) / 2;
            for (Eigen::Index i = 0; i < g; ++i) {
                const double tau = (grid[i] - lo) / span;
                if (m == 0)
                    raw(i, m) = 1.0;
                else if (m % 2 == 1)
                    raw(i, m) = std::sin(kTwoPi * harmonic * tau);
                else
                    raw(i, m) = std::cos(kTwoPi * harmonic * tau);
            }
        }
    } else if (kind == "poly") {
        for (int m = 0; m < K_n; ++m)
            for (Eigen::Index i = 0; i < g; ++i) {
                const double tau = 2.0 * (grid[i] - lo) / span - 1.0;
                raw(i, m) = std::pow(tau, m);
            }
    } else {
        throw ConfigError("unknown basis kind: " + kind + " (supported: fourier, poly)");
    }
    return raw;
}

// Modified Gram-Schmidt under the weighted inner product, run twice to push
// discretization leakage in the Gram matrix below 1e-8.
void orthonormalize(Eigen::MatrixXd& b, const Eigen::VectorXd& w) {
    const auto dot = [&](Eigen::Index p, Eigen::Index q) {
        return (b.col(p).array() * w.array() * b.col(q).array()).sum();
    };
    for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index m = 0; m < b.cols(); ++m) {
            for (Eigen::Index p = 0; p < m; ++p) b.col(m) -= dot(p, m) * b.col(p);
            const double nrm = std::sqrt(dot(m, m));
            if (nrm < 1e-12)
                throw TooFewGridPoints("basis family is degenerate on this grid");
            b.col(m) /= nrm;
        }
    }
}

} // namespace

BasisSystem build_basis(const std::string& kind, int K_n, const Eigen::VectorXd& grid) {
    if (K_n < 1) throw ConfigError("K_n must be >= 1");
    if (grid.size() < 2 * K_n)
        throw TooFewGridPoints("need at least " + std::to_string(2 * K_n) + " grid points for K_n=" +
                               std::to_string(K_n) + ", got " + std::to_string(grid.size()));
    for (Eigen::Index i = 0; i + 1 < grid.size(); ++i)
        if (grid[i + 1] <= grid[i]) throw ConfigError("grid must be strictly increasing");

    BasisSystem basis;
    basis.kind = kind;
    basis.K_n = K_n;
    basis.grid = grid;
    basis.weights = trapezoid_weights(grid);
    basis.values = raw_family(kind, K_n, grid);
    orthonormalize(basis.values, basis.weights);
    return basis;
}

Eigen::VectorXd expand(const Curve& curve, const BasisSystem& basis) {
    if (curve.size() != basis.grid.size())
        throw GridMismatch("curve has " + std::to_string(curve.size()) + " points, basis grid has " +
                           std::to_string(basis.grid.size()));
    return basis.values.transpose() * (basis.weights.array() * curve.array()).matrix();
}

Curve reconstruct(const Eigen::VectorXd& coeffs, const BasisSystem& basis) {
    if (coeffs.size() != basis.K_n)
        throw DimensionMismatch("expected " + std::to_string(basis.K_n) + " coefficients, got " +
                                std::to_string(coeffs.size()));
    return basis.values * coeffs;
}

} // namespace diffscm
