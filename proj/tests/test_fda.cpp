#include <doctest.h>

#include <cmath>

#include "diffscm/fda.hpp"
#include "diffscm/rng.hpp"

using namespace diffscm;

namespace {
Eigen::VectorXd uniform_grid(int points) { return Eigen::VectorXd::LinSpaced(points, 0.0, 1.0); }

double quad_inner(const BasisSystem& b, const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
    return (f.array() * b.weights.array() * g.array()).sum();
}
} // namespace

TEST_SUITE("fda") {

TEST_CASE("single constant basis function is normalized") {
    const auto basis = build_basis("fourier", 1, uniform_grid(16));
    CHECK(quad_inner(basis, basis.values.col(0), basis.values.col(0)) == doctest::Approx(1.0).epsilon(1e-12));
    // constant sign/value: should be exactly flat at 1 on [0,1]
    for (Eigen::Index i = 0; i < basis.grid.size(); ++i)
        CHECK(basis.values(i, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("gram matrix is the identity under the quadrature rule") {
    const auto basis = build_basis("fourier", 6, uniform_grid(64));
    for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) {
            const double expect = a == b ? 1.0 : 0.0;
            CHECK(std::abs(quad_inner(basis, basis.values.col(a), basis.values.col(b)) - expect) < 1e-8);
        }
}

TEST_CASE("too few grid points") {
    CHECK_THROWS_AS(build_basis("fourier", 6, uniform_grid(3)), TooFewGridPoints);
}

TEST_CASE("unknown family is rejected") {
    CHECK_THROWS_AS(build_basis("wavelet", 3, uniform_grid(16)), ConfigError);
}

TEST_CASE("poly family also orthonormalizes") {
    const auto basis = build_basis("poly", 4, uniform_grid(32));
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            const double expect = a == b ? 1.0 : 0.0;
            CHECK(std::abs(quad_inner(basis, basis.values.col(a), basis.values.col(b)) - expect) < 1e-8);
        }
}

TEST_CASE("expanding a basis function gives a unit coordinate") {
    const auto basis = build_basis("fourier", 6, uniform_grid(64));
    const Eigen::VectorXd c = expand(basis.values.col(0), basis);
    CHECK(std::abs(c[0] - 1.0) < 1e-8);
    for (int m = 1; m < 6; ++m) CHECK(std::abs(c[m]) < 1e-8);
}

TEST_CASE("expand is linear in the curve") {
    const auto basis = build_basis("fourier", 6, uniform_grid(64));
    const Curve mix = 2.0 * basis.values.col(0) + 3.0 * basis.values.col(1);
    const Eigen::VectorXd c = expand(mix, basis);
    CHECK(c[0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(c[1] == doctest::Approx(3.0).epsilon(1e-10));
    for (int m = 2; m < 6; ++m) CHECK(std::abs(c[m]) < 1e-8);

    Rng rng(4);
    Eigen::VectorXd x(basis.grid.size()), y(basis.grid.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x[i] = rng.normal();
        y[i] = rng.normal();
    }
    const Eigen::VectorXd lhs = expand(1.7 * x - 0.4 * y, basis);
    const Eigen::VectorXd rhs = 1.7 * expand(x, basis) - 0.4 * expand(y, basis);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ramp curve coefficients match a ten-times-finer quadrature") {
    // the trapezoid error is O(h^2), so a 2048-point grid against a
    // 20480-point oracle resolves the coefficients to ~5e-7
    const auto coarse = build_basis("fourier", 6, uniform_grid(2048));
    const auto fine = build_basis("fourier", 6, uniform_grid(20480));
    const Eigen::VectorXd c_coarse = expand(coarse.grid, coarse);
    const Eigen::VectorXd c_fine = expand(fine.grid, fine);
    CHECK((c_coarse - c_fine).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("reconstruct inverts expand on the basis span") {
    const auto basis = build_basis("fourier", 6, uniform_grid(64));
    const Eigen::VectorXd c = expand(basis.values.col(1), basis);
    const Curve back = reconstruct(c, basis);
    CHECK((back - basis.values.col(1)).cwiseAbs().maxCoeff() < 1e-8);

    CHECK(reconstruct(Eigen::VectorXd::Zero(6), basis).cwiseAbs().maxCoeff() == 0.0);

    Rng rng(9);
    Eigen::VectorXd coeffs(6);
    for (int m = 0; m < 6; ++m) coeffs[m] = rng.normal();
    const Curve curve = reconstruct(coeffs, basis);
    const Curve round = reconstruct(expand(curve, basis), basis);
    CHECK((round - curve).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("expand-reconstruct identities") {
    const auto basis = build_basis("fourier", 5, uniform_grid(50));
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd coeffs(5);
        for (int m = 0; m < 5; ++m) coeffs[m] = rng.normal();
        // expand o reconstruct = identity on coefficients
        CHECK((expand(reconstruct(coeffs, basis), basis) - coeffs).cwiseAbs().maxCoeff() < 1e-8);

        // reconstruct o expand is an orthogonal projection: idempotent
        Eigen::VectorXd noise(basis.grid.size());
        for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = rng.normal();
        const Curve once = reconstruct(expand(noise, basis), basis);
        const Curve twice = reconstruct(expand(once, basis), basis);
        CHECK((once - twice).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("grid and dimension mismatches") {
    const auto basis = build_basis("fourier", 4, uniform_grid(32));
    CHECK_THROWS_AS(expand(Eigen::VectorXd::Zero(10), basis), GridMismatch);
    CHECK_THROWS_AS(reconstruct(Eigen::VectorXd::Zero(3), basis), DimensionMismatch);
}

} // TEST_SUITE
