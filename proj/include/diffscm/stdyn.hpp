#ifndef DIFFSCM_STDYN_HPP
#define DIFFSCM_STDYN_HPP

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "diffscm/errors.hpp"
#include "diffscm/fda.hpp"
#include "diffscm/graph.hpp"

namespace diffscm {

// ---------------------------------------------------------------------------
// Temporal covariance machinery
// ---------------------------------------------------------------------------

/// Conditional autoregressive temporal structure over J time points.
struct CarSpec {
    int J = 0;
    double rho = 0.0;
    Eigen::MatrixXd H; // J x J symmetric 0/1 adjacency, zero diagonal
};

/// Path-graph adjacency: consecutive time points are neighbours.
Eigen::MatrixXd path_adjacency(int J);

/// D = (I_J - rho H)^{-1}, symmetric positive definite under the CAR
/// validity condition |rho| * specrad(H) < 1.
Eigen::MatrixXd car_cov(const CarSpec& spec);

/// Kronecker product D (x) Sigma with block (j,l) = D_jl * Sigma.
Eigen::MatrixXd kron_cov(const Eigen::MatrixXd& D, const Eigen::MatrixXd& Sigma);

/// i.i.d. zero-mean Gaussian draws of length J*m with covariance D (x) Sigma,
/// built from the Cholesky factors of D and Sigma separately. Entry order is
/// time-major: component (j, v) lands at index j*m + v.
std::vector<Eigen::VectorXd> sample_temporal_noise(const Eigen::MatrixXd& D,
                                                   const Eigen::MatrixXd& Sigma, int count,
                                                   std::uint64_t seed);

// ---------------------------------------------------------------------------
// Region-specific structural link for explained confounders
// ---------------------------------------------------------------------------

/// Named analytic vector-valued function applied coordinate-wise and
/// concatenated, so the output dimension is a fixed multiple of the input's.
struct GFunction {
    std::string kind = "poly-sine"; // "identity" (x), "poly2" (x, x^2), "poly-sine" (x, x^2, sin x)
    int input_dim = 1;

    int output_dim() const;
    Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;
};

struct ConfounderLink {
    std::vector<Eigen::MatrixXd> Gamma; // per-region coefficient matrices, dim(C2) x q
    GFunction G;
};

/// Gamma_i * G(x_c1) + u_c2.
Eigen::VectorXd confounder_link_apply(const ConfounderLink& link, int region,
                                      const Eigen::VectorXd& x_c1, const Eigen::VectorXd& u_c2);

// ---------------------------------------------------------------------------
// Panel data
// ---------------------------------------------------------------------------

/// Values indexed by (region i, time j, node k), 0-based i and j internally,
/// node ids 1-based. Optionally carries raw functional curves and the
/// exogenous draws behind every node so counterfactual ground truth is exact.
struct PanelDataset {
    int n = 0, J = 0, K = 0;
    std::vector<int> dims;               // d_k, index k-1
    std::vector<Eigen::VectorXd> values; // [(i*J + j)*K + (k-1)]

    struct CurveSet {
        std::string name;             // e.g. "Y1"
        std::vector<int> coeff_nodes; // nodes holding the expansion coefficients
        Eigen::VectorXd grid;
        std::vector<Eigen::VectorXd> curves; // per unit i*J + j
    };
    std::vector<CurveSet> curves;

    // stored exogenous draws, [unit][k-1]; empty vector when a node has none
    std::vector<std::vector<Eigen::VectorXd>> exogenous;

    int unit(int i, int j) const { return i * J + j; }
    const Eigen::VectorXd& value(int i, int j, int k) const;
    Eigen::VectorXd& value(int i, int j, int k);
    bool has_exogenous() const { return !exogenous.empty(); }
};

// ---------------------------------------------------------------------------
// Ground-truth structural model
// ---------------------------------------------------------------------------

struct Term {
    enum class Kind { Linear, Quadratic, Sine };
    int parent = 0;
    Kind kind = Kind::Linear;
    double coeff = 0.0;
};

struct NodeEquation {
    enum class Type { Root, Coefficient, Anm, Link };
    Type type = Type::Root;
    // Root / Coefficient marginal
    double mean = 0.0, sd = 1.0;
    // Anm: intercept + sum of terms + noise_scale * u (strictly increasing in u)
    double intercept = 0.0;
    std::vector<Term> terms;
    double noise_scale = 1.0;
    // Link: confounder_link_apply over these inputs
    std::vector<int> link_inputs;
    // index of the CAR block supplying this node's noise, -1 for i.i.d.
    int car_block = -1;
};

struct CarBlock {
    std::vector<int> members; // node ids sharing one joint temporal draw
    CarSpec car;
    Eigen::MatrixXd Sigma; // between-variable covariance, default identity
    double scale = 1.0;
};

struct FunctionalGroup {
    std::string name;
    std::vector<int> coeff_nodes; // ascending ids, one per basis function
    Eigen::VectorXd coeff_mean;
    Eigen::VectorXd coeff_sd;
};

struct GroundTruthScm {
    std::string name;
    int n = 0, J = 0;
    CausalGraph graph;
    std::vector<NodeEquation> equations; // index k-1
    ConfounderLink link;
    std::vector<CarBlock> car_blocks;
    std::vector<FunctionalGroup> functional;
    BasisSystem basis; // shared by all functional groups
    std::vector<int> causes;   // intervention targets of interest
    std::vector<int> outcomes; // query targets of interest
};

struct BenchmarkConfig {
    std::string name = "pfst33";
    int n = 30;
    int J = 6;
    int K_n = 6;
    std::string basis_kind = "fourier";
};

std::vector<std::string> registered_benchmarks();

/// Builds the ground-truth model for a registered benchmark; region-specific
/// parameters (e.g. link coefficients) are drawn from seeded substreams so
/// the instance is fully determined by (config, seed).
GroundTruthScm instantiate_benchmark(const BenchmarkConfig& config, std::uint64_t seed);

/// Simulates one panel from the model. The evaluation order may be
/// overridden with any valid topological order; the output is identical
/// because exogenous draws are keyed by node, not by visitation step.
PanelDataset simulate_panel(const GroundTruthScm& scm, std::uint64_t seed,
                            const std::vector<int>& eval_order = {});

std::pair<PanelDataset, GroundTruthScm> generate_benchmark(const BenchmarkConfig& config,
                                                           std::uint64_t seed);

/// One full record of node values (all nodes, observed and latent).
using Record = std::map<int, Eigen::VectorXd>;

/// Simulates the true equations with intervened nodes clamped and fresh
/// exogenous draws; each sample picks a region/time uniformly.
std::vector<Record> oracle_interventional(const GroundTruthScm& scm, const Record& interventions,
                                          int count, std::uint64_t seed);

/// Re-evaluates the equations for unit (i, j) with interventions clamped and
/// the stored exogenous values.
Record oracle_counterfactual(const GroundTruthScm& scm, const PanelDataset& dataset, int i, int j,
                             const Record& interventions);

// ---------------------------------------------------------------------------
// Dataset files: <prefix>.csv, <prefix>_curves.csv, <prefix>.json sidecar
// ---------------------------------------------------------------------------

void save_dataset(const PanelDataset& dataset, const GroundTruthScm& scm, std::uint64_t seed,
                  const std::string& prefix);

struct LoadedDataset {
    PanelDataset dataset;
    CausalGraph graph;
    std::string benchmark;
    std::uint64_t seed = 0;
};

LoadedDataset load_dataset(const std::string& prefix);

/// Projects every raw curve set onto the basis and writes the coefficients
/// into its declared coefficient nodes, so externally supplied curve files
/// feed the same pipeline as generated ones.
void expand_curves(PanelDataset& dataset, const BasisSystem& basis);

} // namespace diffscm

#endif
