#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "diffscm/cli.hpp"

namespace {

std::string default_out_dir() {
    const char* env = std::getenv("DIFFSCM_OUT");
    return env ? std::string(env) : std::string(".");
}

std::string join_dir(const std::string& dir, const std::string& name) {
    if (name.find('/') != std::string::npos) return name; // explicit path wins
    return dir.empty() || dir == "." ? name : dir + "/" + name;
}

nlohmann::json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw diffscm::IoError("cannot read config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw diffscm::ParseError(path + ": " + e.what());
    }
    return j;
}

void apply_hyper(const nlohmann::json& j, diffscm::FitHyper& hyper) {
    hyper.T = j.value("T", hyper.T);
    hyper.beta_min = j.value("beta_min", hyper.beta_min);
    hyper.beta_max = j.value("beta_max", hyper.beta_max);
    hyper.hidden = j.value("hidden", hyper.hidden);
    hyper.embed_dim = j.value("embed_dim", hyper.embed_dim);
    hyper.lr = j.value("lr", hyper.lr);
    hyper.epochs = j.value("epochs", hyper.epochs);
    hyper.batch = j.value("batch", hyper.batch);
}

void add_hyper_flags(CLI::App* cmd, diffscm::FitHyper& hyper) {
    cmd->add_option("--T", hyper.T, "diffusion steps");
    cmd->add_option("--beta-min", hyper.beta_min, "schedule lower noise level");
    cmd->add_option("--beta-max", hyper.beta_max, "schedule upper noise level");
    cmd->add_option("--hidden", hyper.hidden, "hidden layer widths");
    cmd->add_option("--embed-dim", hyper.embed_dim, "step embedding width");
    cmd->add_option("--lr", hyper.lr, "learning rate");
    cmd->add_option("--epochs", hyper.epochs, "training epochs per node");
    cmd->add_option("--batch", hyper.batch, "batch size");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional-diffusion causal inference engine"};
    app.require_subcommand(1);
    const std::string out_dir = default_out_dir();

    // config file applied as defaults before flag parsing
    std::string config_path;
    for (int a = 1; a + 1 < argc; ++a)
        if (std::string(argv[a]) == "--config") config_path = argv[a + 1];
    nlohmann::json cfg;
    if (!config_path.empty()) {
        try {
            cfg = load_config_file(config_path);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return 1;
        }
    }

    diffscm::GenerateOptions gen;
    diffscm::FitOptions fit;
    diffscm::QueryOptions query;
    diffscm::EvaluateOptions eval;
    gen.out_prefix = join_dir(out_dir, "dataset");
    fit.checkpoint_out = join_dir(out_dir, "checkpoint.json");
    query.out_csv = join_dir(out_dir, "query.csv");
    eval.out_prefix = join_dir(out_dir, "report");
    if (!cfg.is_null()) {
        gen.benchmark.name = cfg.value("benchmark", gen.benchmark.name);
        gen.benchmark.n = cfg.value("n", gen.benchmark.n);
        gen.benchmark.J = cfg.value("J", gen.benchmark.J);
        gen.benchmark.K_n = cfg.value("K_n", gen.benchmark.K_n);
        gen.benchmark.basis_kind = cfg.value("basis", gen.benchmark.basis_kind);
        gen.seed = cfg.value("seed", gen.seed);
        fit.mode = cfg.value("mode", fit.mode);
        fit.seed = cfg.value("seed", fit.seed);
        fit.workers = cfg.value("workers", fit.workers);
        apply_hyper(cfg, fit.hyper);
        eval.config.benchmark = gen.benchmark;
        eval.config.n_list = cfg.value("n_list", eval.config.n_list);
        eval.config.methods = cfg.value("methods", eval.config.methods);
        eval.config.sample_count = cfg.value("sample_count", eval.config.sample_count);
        eval.config.cf_units_cap = cfg.value("cf_units", eval.config.cf_units_cap);
        eval.config.gamma_sd_shift = cfg.value("gamma_sd_shift", eval.config.gamma_sd_shift);
        eval.config.densities = cfg.value("densities", eval.config.densities);
        eval.seeds = cfg.value("seeds", eval.seeds);
        eval.workers = cfg.value("workers", eval.workers);
        apply_hyper(cfg, eval.config.hyper);
    }

    std::string ignored_config; // --config is pre-scanned; register it so CLI11 accepts it

    auto* cgen = app.add_subcommand("generate", "simulate a benchmark panel dataset");
    cgen->add_option("--config", ignored_config, "JSON config file");
    cgen->add_option("--benchmark", gen.benchmark.name, "registered benchmark name");
    cgen->add_option("--n", gen.benchmark.n, "regions");
    cgen->add_option("--J", gen.benchmark.J, "time points");
    cgen->add_option("--K-n", gen.benchmark.K_n, "basis functions per functional node");
    cgen->add_option("--basis", gen.benchmark.basis_kind, "basis family (fourier|poly)");
    cgen->add_option("--seed", gen.seed, "top-level seed");
    cgen->add_option("--out", gen.out_prefix, "output file prefix");

    auto* cfit = app.add_subcommand("fit", "train per-node conditional denoisers");
    cfit->add_option("--config", ignored_config, "JSON config file");
    cfit->add_option("--dataset", fit.dataset_prefix, "dataset file prefix")->required();
    cfit->add_option("--graph", fit.graph_path, "graph JSON override");
    cfit->add_option("--mode", fit.mode, "conditioning mode (backdoor|parents, aliases bdcm|dcm)");
    cfit->add_option("--seed", fit.seed, "top-level seed");
    cfit->add_option("--workers", fit.workers, "concurrent node-training jobs");
    cfit->add_option("--checkpoint", fit.checkpoint_out, "checkpoint output path");
    add_hyper_flags(cfit, fit.hyper);

    auto* cquery = app.add_subcommand("query", "sample or answer counterfactuals from a checkpoint");
    cquery->add_option("--config", ignored_config, "JSON config file");
    cquery->add_option("--checkpoint", query.checkpoint, "checkpoint path")->required();
    cquery->add_option("--do", query.do_expr, "interventions, e.g. \"X1=0.5,X2=-1\"");
    cquery->add_flag("--counterfactual", query.counterfactual, "answer a counterfactual query");
    cquery->add_option("--factual", query.factual_csv, "factual record CSV (node,component,value)");
    cquery->add_option("--count", query.count, "sample count");
    cquery->add_option("--seed", query.seed, "sampling seed");
    cquery->add_option("--out", query.out_csv, "output CSV");

    auto* ceval = app.add_subcommand("evaluate", "run the benchmark experiment protocol");
    ceval->add_option("--config", ignored_config, "JSON config file");
    ceval->add_option("--benchmark", eval.config.benchmark.name, "registered benchmark name");
    ceval->add_option("--J", eval.config.benchmark.J, "time points");
    ceval->add_option("--n-list", eval.config.n_list, "region counts to sweep");
    ceval->add_option("--methods", eval.config.methods, "methods (bdcm dcm bdcm-nf dcm-nf)");
    ceval->add_option("--seeds", eval.seeds, "seeds to average over");
    ceval->add_option("--sample-count", eval.config.sample_count, "MMD sample count per side");
    ceval->add_option("--cf-units", eval.config.cf_units_cap, "counterfactual units cap");
    ceval->add_flag("--densities", eval.config.densities, "emit kernel-density grids");
    ceval->add_option("--workers", eval.workers, "concurrent seed runs");
    ceval->add_option("--out", eval.out_prefix, "report file prefix");
    add_hyper_flags(ceval, eval.config.hyper);

    CLI11_PARSE(app, argc, argv);

    if (cgen->parsed()) return diffscm::cmd_generate(gen);
    if (cfit->parsed()) return diffscm::cmd_fit(fit);
    if (cquery->parsed()) return diffscm::cmd_query(query);
    if (ceval->parsed()) return diffscm::cmd_evaluate(eval);
    return 1;
}
