#ifndef DIFFSCM_CLI_HPP
#define DIFFSCM_CLI_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "diffscm/eval.hpp"
#include "diffscm/scmodel.hpp"
#include "diffscm/stdyn.hpp"

namespace diffscm {

// Exit codes: 0 success, 1 validation/config failure, 2 runtime failure.

struct GenerateOptions {
    BenchmarkConfig benchmark;
    std::uint64_t seed = 7;
    std::string out_prefix = "dataset";
};

struct FitOptions {
    std::string dataset_prefix;
    std::string graph_path; // optional override; default: sidecar graph
    std::string mode = "backdoor";
    FitHyper hyper;
    std::uint64_t seed = 7;
    int workers = 1;
    std::string checkpoint_out = "checkpoint.json";
};

struct QueryOptions {
    std::string checkpoint;
    std::string do_expr; // "X1=0.5,X2=-1"
    bool counterfactual = false;
    std::string factual_csv; // node,component,value
    int count = 1000;
    std::uint64_t seed = 7;
    std::string out_csv = "query.csv";
};

struct EvaluateOptions {
    ExperimentConfig config;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    int workers = 1;
    std::string out_prefix = "report";
};

int cmd_generate(const GenerateOptions& opts);
int cmd_fit(const FitOptions& opts);
int cmd_query(const QueryOptions& opts);
int cmd_evaluate(const EvaluateOptions& opts);

/// Parses "X1=0.5,X2=-1" (ids may be written with or without the X prefix).
Record parse_do_expression(const std::string& expr, const CausalGraph& graph);

/// Factual record file: CSV with header node,component,value.
Record load_record_csv(const std::string& path);
void save_record_csv(const Record& rec, const std::string& path);

} // namespace diffscm

#endif
