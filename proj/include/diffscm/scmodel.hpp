#ifndef DIFFSCM_SCMODEL_HPP
#define DIFFSCM_SCMODEL_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "diffscm/diffusion.hpp"
#include "diffscm/graph.hpp"
#include "diffscm/net.hpp"
#include "diffscm/stdyn.hpp"

namespace diffscm {

/// Backdoor mode conditions each node's denoiser on its recorded adjustment
/// set; parents-only mode conditions on the node's observed parents.
enum class ConditioningMode { Backdoor, ParentsOnly };

std::string to_string(ConditioningMode mode);
ConditioningMode conditioning_mode_from_string(const std::string& s);

struct FitHyper {
    int T = 200;
    double beta_min = 1e-4;
    double beta_max = 0.09;
    std::vector<int> hidden = {64, 64};
    int embed_dim = 16;
    double lr = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int epochs = 200;
    int batch = 64;

    void validate() const; // throws InvalidHyper
};

using FactualRecord = Record;
using Intervention = Record;

struct NodeModel {
    DenoiserNet net;
    std::vector<int> cond; // conditioning node ids, ascending
    double final_loss = 0.0;
};

/// Per-coordinate standardization statistics.
struct Standardization {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
};

struct ReconstructionSummary {
    double mean_abs = 0.0; // mean over units of the max-abs coordinate error
    double max_abs = 0.0;
    int count = 0;
};

/// A causal graph plus one trained conditional denoiser per observed
/// non-root node, with empirical marginals for root nodes. Query operations
/// are read-only and safe for concurrent use.
class CausalDiffusionModel {
public:
    CausalDiffusionModel() = default;
    CausalDiffusionModel(CausalGraph graph, ConditioningMode mode, NoiseSchedule schedule,
                         FitHyper hyper, std::map<int, NodeModel> node_models,
                         std::map<int, std::vector<Eigen::VectorXd>> root_empirical,
                         std::map<int, Standardization> stats, std::uint64_t seed);

    static CausalDiffusionModel fit(const PanelDataset& dataset, const CausalGraph& graph,
                                    ConditioningMode mode, const FitHyper& hyper,
                                    std::uint64_t seed, int workers = 1);

    std::vector<Record> sample_observational(int count, std::uint64_t seed) const;
    std::vector<Record> sample_interventional(const Intervention& intervention, int count,
                                              std::uint64_t seed) const;
    Record counterfactual(const FactualRecord& factual, const Intervention& intervention) const;

    std::map<int, ReconstructionSummary> reconstruction_error(const PanelDataset& dataset) const;

    /// Diagnostic: max absolute Pearson correlation between encoded latent
    /// coordinates and conditioning coordinates, per modeled node.
    std::map<int, double> abduction_backdoor_correlation(const PanelDataset& dataset) const;

    const CausalGraph& graph() const { return graph_; }
    ConditioningMode mode() const { return mode_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    const FitHyper& hyper() const { return hyper_; }
    const std::map<int, NodeModel>& node_models() const { return node_models_; }
    const std::map<int, std::vector<Eigen::VectorXd>>& root_empirical() const { return root_empirical_; }
    const std::map<int, Standardization>& stats() const { return stats_; }
    const std::vector<int>& topological_order() const { return topo_; }
    std::uint64_t seed() const { return seed_; }
    bool fitted() const { return !topo_.empty(); }

    /// Conditioning ids for a node under the active mode (ascending).
    std::vector<int> conditioning_set(int id) const;

    nlohmann::json to_json() const;
    static CausalDiffusionModel from_json(const nlohmann::json& j);
    void save_file(const std::string& path) const;
    static CausalDiffusionModel load_file(const std::string& path);

private:
    Eigen::VectorXd standardize(int id, const Eigen::VectorXd& v) const;
    Eigen::VectorXd destandardize(int id, const Eigen::VectorXd& v) const;
    Eigen::VectorXd gather_cond(const std::vector<int>& ids, const Record& values) const;
    void require_fitted() const;

    CausalGraph graph_;
    ConditioningMode mode_ = ConditioningMode::Backdoor;
    NoiseSchedule schedule_;
    FitHyper hyper_;
    std::map<int, NodeModel> node_models_;
    std::map<int, std::vector<Eigen::VectorXd>> root_empirical_;
    std::map<int, Standardization> stats_;
    std::vector<int> topo_;
    std::uint64_t seed_ = 0;
};

} // namespace diffscm

#endif
