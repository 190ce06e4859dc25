#ifndef DIFFSCM_FDA_HPP
#define DIFFSCM_FDA_HPP

#include <string>

#include <Eigen/Dense>

#include "diffscm/errors.hpp"

namespace diffscm {

/// A curve is its values on the paired basis grid.
using Curve = Eigen::VectorXd;

/// Orthonormal basis evaluated on a fixed grid. Orthonormality is enforced
/// under the trapezoidal quadrature rule on that grid, so expand/reconstruct
/// round trips are exact to quadrature precision even on non-uniform grids.
struct BasisSystem {
    std::string kind;        // "fourier" or "poly"
    int K_n = 0;             // number of basis functions
    Eigen::VectorXd grid;    // strictly increasing evaluation points
    Eigen::VectorXd weights; // trapezoidal quadrature weights
    Eigen::MatrixXd values;  // grid.size() x K_n, column m = b_m on the grid
};

BasisSystem build_basis(const std::string& kind, int K_n, const Eigen::VectorXd& grid);

/// Coefficients of the curve under the basis: c_m = sum_g w_g b_m(t_g) x(t_g).
Eigen::VectorXd expand(const Curve& curve, const BasisSystem& basis);

/// Curve on the grid from coefficients: sum_m c_m b_m.
Curve reconstruct(const Eigen::VectorXd& coeffs, const BasisSystem& basis);

} // namespace diffscm

#endif
