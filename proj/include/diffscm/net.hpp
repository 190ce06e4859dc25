#ifndef DIFFSCM_NET_HPP
#define DIFFSCM_NET_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "diffscm/errors.hpp"

namespace diffscm {

/// Sinusoidal step embedding: pairs (sin(w_r t/T), cos(w_r t/T)) with
/// geometrically spaced frequencies w_r = pi * 2^r, so t=0 and t=T stay
/// distinguishable through the slowest pair.
Eigen::VectorXd time_embedding(int t, int T, int dim);

struct TrainItem {
    Eigen::VectorXd x_t;
    Eigen::VectorXd cond;
    Eigen::VectorXd temb;
    Eigen::VectorXd eps_target;
};

/// Feed-forward noise predictor on the concatenation [x_t | cond | temb].
/// Hidden layers use the sigmoid-weighted linear unit; the output head is
/// linear. An empty hidden list degenerates to a single linear map, which the
/// tests use to build analytically exact models. Parameters live in one flat
/// vector (per layer: row-major weights, then biases).
class DenoiserNet {
public:
    DenoiserNet() = default;
    DenoiserNet(int x_dim, int cond_dim, int embed_dim, std::vector<int> hidden);

    int x_dim() const { return x_dim_; }
    int cond_dim() const { return cond_dim_; }
    int embed_dim() const { return embed_dim_; }
    int input_dim() const { return x_dim_ + cond_dim_ + embed_dim_; }
    const std::vector<int>& hidden() const { return hidden_; }

    int param_count() const { return static_cast<int>(params_.size()); }
    Eigen::VectorXd& params() { return params_; }
    const Eigen::VectorXd& params() const { return params_; }

    /// Seeded uniform fan-in initialization; biases start at zero.
    void init(std::uint64_t seed);

    Eigen::VectorXd forward(const Eigen::VectorXd& x_t, const Eigen::VectorXd& cond,
                            const Eigen::VectorXd& temb) const;

    /// Mean over the batch of ||eps_target - forward(...)||^2 and its exact
    /// gradient with respect to the flat parameter vector.
    std::pair<double, Eigen::VectorXd> loss_and_grad(const std::vector<TrainItem>& batch) const;

private:
    struct LayerView {
        int in = 0, out = 0, offset = 0; // offset into the flat parameter vector
    };
    std::vector<LayerView> layers() const;
    Eigen::VectorXd concat_input(const Eigen::VectorXd& x_t, const Eigen::VectorXd& cond,
                                 const Eigen::VectorXd& temb) const;

    int x_dim_ = 0, cond_dim_ = 0, embed_dim_ = 0;
    std::vector<int> hidden_;
    Eigen::VectorXd params_;
};

/// Adaptive-moment optimizer with bias correction.
class AdamOptimizer {
public:
    explicit AdamOptimizer(int param_count, double lr = 1e-3, double beta1 = 0.9,
                           double beta2 = 0.999, double eps = 1e-8);

    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grads);

    int step_count() const { return step_count_; }
    double learning_rate() const { return lr_; }

private:
    double lr_, beta1_, beta2_, eps_;
    int step_count_ = 0;
    Eigen::VectorXd m_, v_;
};

} // namespace diffscm

#endif
