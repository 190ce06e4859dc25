#include "diffscm/net.hpp"

#include <cmath>

#include "diffscm/rng.hpp"

namespace diffscm {

namespace {
constexpr double kPi = 3.1415926535897932384626433832795;

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double silu(double z) { return z * sigmoid(z); }
inline double silu_grad(double z) {
    const double s = sigmoid(z);
    return s * (1.0 + z * (1.0 - s));
}
} // namespace

Eigen::VectorXd time_embedding(int t, int T, int dim) {
    if (dim < 2 || dim % 2 != 0) throw InvalidDim("embedding dim must be a positive even integer");
    if (t < 0 || t > T) throw StepOutOfRange("step " + std::to_string(t) + " outside [0, " + std::to_string(T) + "]");
    const double frac = static_cast<double>(t) / static_cast<double>(T);
    Eigen::VectorXd e(dim);
    double omega = kPi;
    for (int r = 0; r < dim / 2; ++r, omega *= 2.0) {
        e[2 * r] = std::sin(omega * frac);
        e[2 * r + 1] = std::cos(omega * frac);
    }
    return e;
}

DenoiserNet::DenoiserNet(int x_dim, int cond_dim, int embed_dim, std::vector<int> hidden)
    : x_dim_(x_dim), cond_dim_(cond_dim), embed_dim_(embed_dim), hidden_(std::move(hidden)) {
    if (x_dim < 1 || cond_dim < 0 || embed_dim < 0)
        throw InvalidDim("invalid denoiser dimensions");
    for (const int h : hidden_)
        if (h < 1) throw InvalidDim("hidden widths must be positive");
    int count = 0;
    int in = input_dim();
    for (const int h : hidden_) {
        count += in * h + h;
        in = h;
    }
    count += in * x_dim_ + x_dim_;
    params_ = Eigen::VectorXd::Zero(count);
}

std::vector<DenoiserNet::LayerView> DenoiserNet::layers() const {
    std::vector<LayerView> out;
    int offset = 0;
    int in = input_dim();
    for (const int h : hidden_) {
        out.push_back({in, h, offset});
        offset += in * h + h;
        in = h;
    }
    out.push_back({in, x_dim_, offset});
    return out;
}

void DenoiserNet::init(std::uint64_t seed) {
    Rng rng(seed);
    for (const auto& l : layers()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
        for (int i = 0; i < l.in * l.out; ++i)
            params_[l.offset + i] = rng.uniform(-bound, bound);
        for (int i = 0; i < l.out; ++i)
            params_[l.offset + l.in * l.out + i] = 0.0;
    }
}

Eigen::VectorXd DenoiserNet::concat_input(const Eigen::VectorXd& x_t, const Eigen::VectorXd& cond,
                                          const Eigen::VectorXd& temb) const {
    if (x_t.size() != x_dim_ || cond.size() != cond_dim_ || temb.size() != embed_dim_)
        throw DimensionMismatch("denoiser input dims (" + std::to_string(x_t.size()) + "," +
                                std::to_string(cond.size()) + "," + std::to_string(temb.size()) +
                                ") do not match net spec (" + std::to_string(x_dim_) + "," +
                                std::to_string(cond_dim_) + "," + std::to_string(embed_dim_) + ")");
    Eigen::VectorXd in(input_dim());
    in << x_t, cond, temb;
    return in;
}

Eigen::VectorXd DenoiserNet::forward(const Eigen::VectorXd& x_t, const Eigen::VectorXd& cond,
                                     const Eigen::VectorXd& temb) const {
    Eigen::VectorXd a = concat_input(x_t, cond, temb);
    const auto views = layers();
    for (std::size_t li = 0; li < views.size(); ++li) {
        const auto& l = views[li];
        const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            W(params_.data() + l.offset, l.out, l.in);
        const Eigen::Map<const Eigen::VectorXd> b(params_.data() + l.offset + l.in * l.out, l.out);
        Eigen::VectorXd z = W * a + b;
        if (li + 1 < views.size())
            for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = silu(z[i]);
        a = std::move(z);
    }
    return a;
}

std::pair<double, Eigen::VectorXd> DenoiserNet::loss_and_grad(const std::vector<TrainItem>& batch) const {
    if (batch.empty()) throw EmptyBatch("loss_and_grad requires a non-empty batch");
    const auto views = layers();
    const std::size_t L = views.size();
    double loss = 0.0;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    std::vector<Eigen::VectorXd> act(L + 1);   // activations entering each layer
    std::vector<Eigen::VectorXd> pre(L);       // pre-activation values
    for (const auto& item : batch) {
        act[0] = concat_input(item.x_t, item.cond, item.temb);
        for (std::size_t li = 0; li < L; ++li) {
            const auto& l = views[li];
            const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
                W(params_.data() + l.offset, l.out, l.in);
            const Eigen::Map<const Eigen::VectorXd> b(params_.data() + l.offset + l.in * l.out, l.out);
            pre[li] = W * act[li] + b;
            act[li + 1] = pre[li];
            if (li + 1 < L)
                for (Eigen::Index i = 0; i < act[li + 1].size(); ++i)
                    act[li + 1][i] = silu(act[li + 1][i]);
        }
        if (item.eps_target.size() != x_dim_)
            throw DimensionMismatch("eps_target dimension mismatch");
        const Eigen::VectorXd resid = act[L] - item.eps_target;
        loss += resid.squaredNorm() * inv_b;

        // reverse pass
        Eigen::VectorXd delta = 2.0 * inv_b * resid; // dL/d(pre of output layer)
        for (std::size_t li = L; li-- > 0;) {
            const auto& l = views[li];
            Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
                gW(grad.data() + l.offset, l.out, l.in);
            Eigen::Map<Eigen::VectorXd> gb(grad.data() + l.offset + l.in * l.out, l.out);
            gW.noalias() += delta * act[li].transpose();
            gb += delta;
            if (li > 0) {
                const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
                    W(params_.data() + l.offset, l.out, l.in);
                Eigen::VectorXd back = W.transpose() * delta;
                for (Eigen::Index i = 0; i < back.size(); ++i)
                    back[i] *= silu_grad(pre[li - 1][i]);
                delta = std::move(back);
            }
        }
    }
    return {loss, std::move(grad)};
}

AdamOptimizer::AdamOptimizer(int param_count, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(Eigen::VectorXd::Zero(param_count)), v_(Eigen::VectorXd::Zero(param_count)) {
    if (param_count < 1) throw ShapeMismatch("optimizer needs at least one parameter");
    if (!(lr > 0) || !(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(eps > 0))
        throw InvalidHyper("bad optimizer hyperparameters");
}

void AdamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw ShapeMismatch("parameter/gradient shape does not match optimizer state");
    ++step_count_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grads;
    v_ = beta2_ * v_.array().matrix() + (1.0 - beta2_) * grads.array().square().matrix();
    const double c1 = 1.0 - std::pow(beta1_, step_count_);
    const double c2 = 1.0 - std::pow(beta2_, step_count_);
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

} // namespace diffscm
