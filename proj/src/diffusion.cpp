#include "diffscm/diffusion.hpp"

#include <cmath>

#include "diffscm/rng.hpp"

namespace diffscm {

NoiseSchedule linear_schedule(int T, double beta_min, double beta_max) {
    if (T < 2) throw InvalidRange("schedule needs T >= 2");
    if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0))
        throw InvalidRange("need 0 < beta_min <= beta_max < 1");
    NoiseSchedule s;
    s.T = T;
    s.beta.resize(T);
    s.alpha_bar.resize(T + 1);
    s.alpha_bar[0] = 1.0;
    for (int t = 1; t <= T; ++t) {
        s.beta[t - 1] = beta_min + (beta_max - beta_min) * static_cast<double>(t - 1) / static_cast<double>(T - 1);
        s.alpha_bar[t] = s.alpha_bar[t - 1] * (1.0 - s.beta[t - 1]);
    }
    return s;
}

Eigen::VectorXd forward_noising(const Eigen::VectorXd& x0, int t, const Eigen::VectorXd& eps,
                                const NoiseSchedule& schedule) {
    if (t < 1 || t > schedule.T)
        throw StepOutOfRange("noising step " + std::to_string(t) + " outside [1, " +
                             std::to_string(schedule.T) + "]");
    if (eps.size() != x0.size()) throw DimensionMismatch("eps/x0 size mismatch");
    const double ab = schedule.alpha_bar[t];
    return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

std::pair<double, Eigen::VectorXd> training_batch_loss(
    const DenoiserNet& net, const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& samples,
    const NoiseSchedule& schedule, std::uint64_t seed) {
    if (samples.empty()) throw EmptyBatch("training batch is empty");
    Rng rng(seed);
    std::vector<TrainItem> batch;
    batch.reserve(samples.size());
    for (const auto& [x0, cond] : samples) {
        const int t = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(schedule.T)));
        Eigen::VectorXd eps(x0.size());
        for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
        TrainItem item;
        item.x_t = forward_noising(x0, t, eps, schedule);
        item.cond = cond;
        item.temb = time_embedding(t, schedule.T, net.embed_dim());
        item.eps_target = std::move(eps);
        batch.push_back(std::move(item));
    }
    return net.loss_and_grad(batch);
}

// The forward recursion queries the denoiser at step t while the reverse one
// queries it at t during the t -> t-1 transition, so the two maps are exact
// inverses only for denoisers that ignore their state argument; for trained
// nets they are first-order inverses whose gap shrinks with finer schedules.
Eigen::VectorXd ddim_encode(const DenoiserNet& net, const Eigen::VectorXd& x0,
                            const Eigen::VectorXd& cond, const NoiseSchedule& schedule) {
    const auto& ab = schedule.alpha_bar;
    Eigen::VectorXd z = x0;
    for (int t = 0; t < schedule.T; ++t) {
        const double scale = std::sqrt(ab[t + 1] / ab[t]);
        const double drift = std::sqrt(1.0 - ab[t + 1]) - std::sqrt(ab[t + 1] * (1.0 - ab[t]) / ab[t]);
        const Eigen::VectorXd eps_hat = net.forward(z, cond, time_embedding(t, schedule.T, net.embed_dim()));
        z = scale * z + drift * eps_hat;
    }
    return z;
}

Eigen::VectorXd ddim_decode(const DenoiserNet& net, const Eigen::VectorXd& z,
                            const Eigen::VectorXd& cond, const NoiseSchedule& schedule) {
    const auto& ab = schedule.alpha_bar;
    Eigen::VectorXd x = z;
    for (int t = schedule.T; t >= 1; --t) {
        const double scale = std::sqrt(ab[t - 1] / ab[t]);
        const double drift = std::sqrt(ab[t - 1] * (1.0 - ab[t]) / ab[t]) - std::sqrt(1.0 - ab[t - 1]);
        const Eigen::VectorXd eps_hat = net.forward(x, cond, time_embedding(t, schedule.T, net.embed_dim()));
        x = scale * x - drift * eps_hat;
    }
    return x;
}

} // namespace diffscm
