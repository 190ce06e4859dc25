#ifndef DIFFSCM_EVAL_HPP
#define DIFFSCM_EVAL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "diffscm/scmodel.hpp"
#include "diffscm/stdyn.hpp"

namespace diffscm {

/// Gaussian-kernel squared maximum mean discrepancy, biased (V-statistic)
/// estimator. bandwidth <= 0 selects the median pairwise distance over the
/// pooled sample.
struct MmdSpec {
    double bandwidth = 0.0;
};

double mmd2(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const MmdSpec& spec = {});

/// Mean squared deviation over all units and coordinates.
double mse(const std::vector<Eigen::VectorXd>& pred, const std::vector<Eigen::VectorXd>& truth);

struct ExperimentConfig {
    BenchmarkConfig benchmark;                     // name, J, K_n (n taken from n_list)
    std::vector<int> n_list = {30, 80, 200};
    std::vector<std::string> methods = {"bdcm", "dcm"}; // plus bdcm-nf / dcm-nf ablations
    FitHyper hyper;
    int sample_count = 1000;  // samples per side for the MMD estimates
    int cf_units_cap = 200;   // at most this many factual units per run
    double gamma_sd_shift = 1.0; // do(X_l := mean_l + shift * sd_l)
    bool densities = false;   // collect per-outcome kernel-density grids
};

struct ExperimentRow {
    std::uint64_t seed = 0;
    int n = 0;
    std::string method;
    std::string query; // "obs" | "int" | "cf"
    double value = 0.0;
    double seconds = 0.0;
};

struct AggregateRow {
    int n = 0;
    std::string method;
    std::string query;
    double mean = 0.0;
    double sd = 0.0;
    double time_mean = 0.0;
};

struct DensityGrid {
    int n = 0;
    std::string method;
    int node = 0;
    std::vector<double> x, model_density, oracle_density;
};

struct ExperimentReport {
    nlohmann::json config_echo;
    std::vector<std::uint64_t> seeds;
    std::vector<ExperimentRow> rows;
    std::vector<AggregateRow> aggregate; // recomputable from rows
    std::vector<DensityGrid> densities;  // first seed only, when requested

    nlohmann::json to_json() const;
};

ExperimentReport run_experiment(const ExperimentConfig& config,
                                const std::vector<std::uint64_t>& seeds, int workers = 1);

void write_report_csv(const ExperimentReport& report, const std::string& path);
void write_density_csv(const ExperimentReport& report, const std::string& path);

} // namespace diffscm

#endif
