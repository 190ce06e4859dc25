#ifndef DIFFSCM_DIFFUSION_HPP
#define DIFFSCM_DIFFUSION_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "diffscm/errors.hpp"
#include "diffscm/net.hpp"

namespace diffscm {

/// Noise levels beta_1..beta_T and cumulative signal products
/// abar_t = prod_{s<=t}(1 - beta_s), stored with the convention abar_0 = 1 so
/// the encode recursion is well defined from the clean observation.
struct NoiseSchedule {
    int T = 0;
    Eigen::VectorXd beta;      // size T, beta[t-1] = beta_t
    Eigen::VectorXd alpha_bar; // size T+1, alpha_bar[0] = 1

    /// True when the terminal signal level is small enough (< 0.01) that the
    /// latent is close to pure noise.
    bool well_mixed() const { return alpha_bar[T] < 0.01; }
};

NoiseSchedule linear_schedule(int T, double beta_min, double beta_max);

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, for 1 <= t <= T.
Eigen::VectorXd forward_noising(const Eigen::VectorXd& x0, int t, const Eigen::VectorXd& eps,
                                const NoiseSchedule& schedule);

/// Assembles a denoising batch (t uniform on {1..T}, eps standard normal,
/// x_t from forward_noising) and delegates to net.loss_and_grad.
std::pair<double, Eigen::VectorXd> training_batch_loss(
    const DenoiserNet& net, const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& samples,
    const NoiseSchedule& schedule, std::uint64_t seed);

/// Deterministic forward implicit recursion from Z^0 = x0 to the latent Z^T.
Eigen::VectorXd ddim_encode(const DenoiserNet& net, const Eigen::VectorXd& x0,
                            const Eigen::VectorXd& cond, const NoiseSchedule& schedule);

/// Deterministic reverse implicit recursion from X^T = z down to X^0.
Eigen::VectorXd ddim_decode(const DenoiserNet& net, const Eigen::VectorXd& z,
                            const Eigen::VectorXd& cond, const NoiseSchedule& schedule);

} // namespace diffscm

#endif
