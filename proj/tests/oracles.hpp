// Reference implementations used only by tests. They stay independent of the
// library code paths they check: the d-separation oracle enumerates paths
// explicitly, the gradient oracle uses central finite differences, and the
// MMD oracle is a direct transcription of the estimator definition.
#ifndef DIFFSCM_TESTS_ORACLES_HPP
#define DIFFSCM_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "diffscm/graph.hpp"

namespace testoracle {

inline std::set<int> descendants_bruteforce(const diffscm::CausalGraph& g, int node) {
    std::set<int> out;
    std::vector<int> stack{node};
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (const auto& [a, b] : g.edges())
            if (a == v && !out.count(b)) {
                out.insert(b);
                stack.push_back(b);
            }
    }
    out.erase(node);
    return out;
}

/// Enumerates every simple undirected path from cause to outcome whose first
/// edge points into the cause, and applies the chain/fork/collider blocking
/// rules to each interior node.
inline bool backdoor_bruteforce(const diffscm::CausalGraph& g, int cause, int outcome,
                                const std::vector<int>& candidate) {
    const std::set<int> cand(candidate.begin(), candidate.end());
    const auto desc_of_cause = descendants_bruteforce(g, cause);
    for (const int b : candidate)
        if (desc_of_cause.count(b)) return false;

    const auto has_edge = [&](int u, int v) {
        for (const auto& [a, b] : g.edges())
            if (a == u && b == v) return true;
        return false;
    };

    bool found_active = false;
    std::vector<int> path{cause};
    std::function<void()> extend = [&]() {
        if (found_active) return;
        const int last = path.back();
        if (last == outcome) {
            // first edge must enter the cause
            if (!has_edge(path[1], path[0])) return;
            bool blocked = false;
            for (std::size_t m = 1; m + 1 < path.size(); ++m) {
                const bool in_left = has_edge(path[m - 1], path[m]);
                const bool in_right = has_edge(path[m + 1], path[m]);
                if (in_left && in_right) { // collider
                    bool opened = cand.count(path[m]) > 0;
                    for (const int d : descendants_bruteforce(g, path[m]))
                        if (cand.count(d)) opened = true;
                    if (!opened) blocked = true;
                } else { // chain or fork
                    if (cand.count(path[m])) blocked = true;
                }
            }
            if (!blocked) found_active = true;
            return;
        }
        for (int next = 1; next <= g.node_count(); ++next) {
            if (std::find(path.begin(), path.end(), next) != path.end()) continue;
            if (!has_edge(last, next) && !has_edge(next, last)) continue;
            path.push_back(next);
            extend();
            path.pop_back();
        }
    };
    extend();
    return !found_active;
}

/// Central finite differences of a scalar function of a parameter vector.
inline Eigen::VectorXd finite_diff_grad(const std::function<double(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& params, double h = 1e-5) {
    Eigen::VectorXd grad(params.size());
    Eigen::VectorXd p = params;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        const double base = p[i];
        p[i] = base + h;
        const double up = f(p);
        p[i] = base - h;
        const double dn = f(p);
        p[i] = base;
        grad[i] = (up - dn) / (2.0 * h);
    }
    return grad;
}

/// Direct transcription of the biased V-statistic with a Gaussian kernel and
/// median-heuristic bandwidth over the pooled sample.
inline double mmd2_naive(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    std::vector<double> dists;
    Eigen::MatrixXd P(A.rows() + B.rows(), A.cols());
    P << A, B;
    for (Eigen::Index i = 0; i < P.rows(); ++i)
        for (Eigen::Index j = i + 1; j < P.rows(); ++j)
            dists.push_back((P.row(i) - P.row(j)).norm());
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2),
                     dists.end());
    double h = dists[dists.size() / 2];
    if (h <= 0) h = 1.0;
    const auto k = [&](const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y) {
        return std::exp(-(x - y).squaredNorm() / (2.0 * h * h));
    };
    double aa = 0, bb = 0, ab = 0;
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.rows(); ++j) aa += k(A.row(i), A.row(j));
    for (Eigen::Index i = 0; i < B.rows(); ++i)
        for (Eigen::Index j = 0; j < B.rows(); ++j) bb += k(B.row(i), B.row(j));
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < B.rows(); ++j) ab += k(A.row(i), B.row(j));
    const double m = static_cast<double>(A.rows()), n = static_cast<double>(B.rows());
    return aa / (m * m) + bb / (n * n) - 2.0 * ab / (m * n);
}

} // namespace testoracle

#endif
