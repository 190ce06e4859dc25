#include "diffscm/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "diffscm/rng.hpp"

namespace diffscm {

double mmd2(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const MmdSpec& spec) {
    const Eigen::Index m = A.rows(), n = B.rows();
    if (m == 0 || n == 0) throw EmptySampleSet("mmd2 requires non-empty sample sets");
    if (A.cols() != B.cols()) throw DimensionMismatch("mmd2 sample dimensions differ");

    double h = spec.bandwidth;
    if (h <= 0.0) {
        Eigen::MatrixXd pooled(m + n, A.cols());
        pooled << A, B;
        std::vector<double> dists;
        dists.reserve(static_cast<std::size_t>((m + n) * (m + n - 1) / 2));
        for (Eigen::Index i = 0; i < pooled.rows(); ++i)
            for (Eigen::Index j = i + 1; j < pooled.rows(); ++j)
                dists.push_back((pooled.row(i) - pooled.row(j)).norm());
        if (dists.empty()) return 0.0;
        const std::size_t mid = dists.size() / 2;
        std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
        h = dists[mid];
        if (h <= 0.0) h = 1.0;
    }
    const double gamma = 1.0 / (2.0 * h * h);

    // full double loops so identical inputs cancel exactly
    const auto block_sum = [&](const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            for (Eigen::Index j = 0; j < Y.rows(); ++j)
                s += std::exp(-gamma * (X.row(i) - Y.row(j)).squaredNorm());
        return s;
    };
    const double maa = block_sum(A, A) / (static_cast<double>(m) * m);
    const double mbb = block_sum(B, B) / (static_cast<double>(n) * n);
    const double mab = block_sum(A, B) / (static_cast<double>(m) * n);
    return maa + mbb - 2.0 * mab;
}

double mse(const std::vector<Eigen::VectorXd>& pred, const std::vector<Eigen::VectorXd>& truth) {
    if (pred.size() != truth.size()) throw LengthMismatch("mse inputs have different lengths");
    if (pred.empty()) throw LengthMismatch("mse inputs are empty");
    double acc = 0.0;
    std::size_t coords = 0;
    for (std::size_t u = 0; u < pred.size(); ++u) {
        if (pred[u].size() != truth[u].size())
            throw DimensionMismatch("mse records have different dimensions");
        acc += (pred[u] - truth[u]).squaredNorm();
        coords += static_cast<std::size_t>(pred[u].size());
    }
    return acc / static_cast<double>(coords);
}

namespace {

Eigen::MatrixXd stack_node(const std::vector<Record>& records, int node) {
    if (records.empty()) throw EmptySampleSet("no records for node " + std::to_string(node));
    const Eigen::Index d = records.front().at(node).size();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(records.size()), d);
    for (std::size_t r = 0; r < records.size(); ++r)
        out.row(static_cast<Eigen::Index>(r)) = records[r].at(node).transpose();
    return out;
}

/// Non-functional ablation: coefficient nodes stay in the graph as inert
/// roots but stop informing other nodes (edges and backdoor references to
/// them are removed), so node ids remain comparable across methods.
CausalGraph strip_functional(const CausalGraph& g) {
    std::vector<NodeSpec> nodes = g.nodes();
    std::vector<std::pair<int, int>> edges;
    const auto is_coeff = [&](int id) {
        return g.node(id).kind == NodeKind::FunctionalCoefficient;
    };
    for (auto& n : nodes)
        n.backdoor.erase(std::remove_if(n.backdoor.begin(), n.backdoor.end(), is_coeff),
                         n.backdoor.end());
    for (const auto& [u, v] : g.edges())
        if (!is_coeff(u) && !is_coeff(v)) edges.emplace_back(u, v);
    return CausalGraph(std::move(nodes), std::move(edges));
}

struct MethodSpec {
    ConditioningMode mode;
    bool functional;
};

MethodSpec parse_method(const std::string& name) {
    if (name == "bdcm") return {ConditioningMode::Backdoor, true};
    if (name == "dcm") return {ConditioningMode::ParentsOnly, true};
    if (name == "bdcm-nf") return {ConditioningMode::Backdoor, false};
    if (name == "dcm-nf") return {ConditioningMode::ParentsOnly, false};
    throw ConfigError("unknown method '" + name + "' (use bdcm, dcm, bdcm-nf, dcm-nf)");
}

double kde_at(const std::vector<double>& sample, double bw, double x) {
    double acc = 0.0;
    for (const double s : sample) {
        const double z = (x - s) / bw;
        acc += std::exp(-0.5 * z * z);
    }
    return acc / (sample.size() * bw * std::sqrt(2.0 * 3.14159265358979323846));
}

std::vector<double> column(const std::vector<Record>& records, int node) {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.at(node)[0]);
    return out;
}

double elapsed(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

ExperimentReport run_experiment(const ExperimentConfig& config,
                                const std::vector<std::uint64_t>& seeds, int workers) {
    config.hyper.validate();
    for (const auto& m : config.methods) parse_method(m);
    if (seeds.empty()) throw ConfigError("need at least one seed");

    struct SeedResult {
        std::vector<ExperimentRow> rows;
        std::vector<DensityGrid> densities;
    };
    std::vector<SeedResult> results(seeds.size());

    const auto run_seed = [&](std::size_t sidx) {
        const std::uint64_t seed = seeds[sidx];
        SeedResult res;
        for (const int n : config.n_list) {
            BenchmarkConfig bc = config.benchmark;
            bc.n = n;
            auto [dataset, scm] = generate_benchmark(bc, seed);
            const int units = dataset.n * dataset.J;

            // interventional targets: one sd above the mean of each cause
            Record gammas;
            for (const int cause : scm.causes) {
                double mean = 0.0, sq = 0.0;
                for (int i = 0; i < dataset.n; ++i)
                    for (int j = 0; j < dataset.J; ++j) mean += dataset.value(i, j, cause)[0];
                mean /= units;
                for (int i = 0; i < dataset.n; ++i)
                    for (int j = 0; j < dataset.J; ++j)
                        sq += std::pow(dataset.value(i, j, cause)[0] - mean, 2);
                const double sd = std::sqrt(sq / units);
                Eigen::VectorXd g(1);
                g[0] = mean + config.gamma_sd_shift * sd;
                gammas[cause] = g;
            }

            // oracle reference samples are shared across methods
            const auto oracle_obs =
                oracle_interventional(scm, {}, config.sample_count, derive_seed(seed, "oracle-obs"));
            std::map<int, std::vector<Record>> oracle_int;
            for (const int cause : scm.causes)
                oracle_int[cause] = oracle_interventional(
                    scm, {{cause, gammas.at(cause)}}, config.sample_count,
                    derive_seed(seed, "oracle-q", static_cast<std::uint64_t>(cause)));

            std::vector<int> cf_units;
            {
                const int take = std::min(config.cf_units_cap, units);
                for (int t = 0; t < take; ++t)
                    cf_units.push_back(static_cast<int>(static_cast<long long>(t) * units / take));
            }

            for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
                const auto& mname = config.methods[mi];
                const MethodSpec ms = parse_method(mname);
                const CausalGraph graph = ms.functional ? scm.graph : strip_functional(scm.graph);
                const auto model = CausalDiffusionModel::fit(
                    dataset, graph, ms.mode, config.hyper, derive_seed(seed, "fit", mi));

                // observational
                auto t0 = std::chrono::steady_clock::now();
                const auto obs = model.sample_observational(config.sample_count,
                                                            derive_seed(seed, "q-obs", mi));
                double acc = 0.0;
                for (const int out : scm.outcomes)
                    acc += mmd2(stack_node(obs, out), stack_node(oracle_obs, out));
                res.rows.push_back({seed, n, mname, "obs", acc / scm.outcomes.size(), elapsed(t0)});

                if (config.densities && sidx == 0) {
                    for (const int out : scm.outcomes) {
                        const auto mcol = column(obs, out);
                        const auto ocol = column(oracle_obs, out);
                        const double lo = std::min(*std::min_element(mcol.begin(), mcol.end()),
                                                   *std::min_element(ocol.begin(), ocol.end()));
                        const double hi = std::max(*std::max_element(mcol.begin(), mcol.end()),
                                                   *std::max_element(ocol.begin(), ocol.end()));
                        double sd = 0.0, mean = 0.0;
                        for (const double v : ocol) mean += v;
                        mean /= ocol.size();
                        for (const double v : ocol) sd += (v - mean) * (v - mean);
                        sd = std::sqrt(sd / ocol.size());
                        const double bw = std::max(1e-6, 1.06 * sd * std::pow(double(ocol.size()), -0.2));
                        DensityGrid grid;
                        grid.n = n;
                        grid.method = mname;
                        grid.node = out;
                        for (int gpt = 0; gpt <= 128; ++gpt) {
                            const double x = lo - 3 * bw + (hi - lo + 6 * bw) * gpt / 128.0;
                            grid.x.push_back(x);
                            grid.model_density.push_back(kde_at(mcol, bw, x));
                            grid.oracle_density.push_back(kde_at(ocol, bw, x));
                        }
                        res.densities.push_back(std::move(grid));
                    }
                }

                // interventional
                t0 = std::chrono::steady_clock::now();
                acc = 0.0;
                for (const int cause : scm.causes) {
                    const auto ints = model.sample_interventional(
                        {{cause, gammas.at(cause)}}, config.sample_count,
                        derive_seed(seed, "q-int", mi * 1000 + static_cast<std::uint64_t>(cause)));
                    for (const int out : scm.outcomes)
                        acc += mmd2(stack_node(ints, out), stack_node(oracle_int.at(cause), out));
                }
                res.rows.push_back({seed, n, mname, "int",
                                    acc / (scm.causes.size() * scm.outcomes.size()), elapsed(t0)});

                // counterfactual
                t0 = std::chrono::steady_clock::now();
                std::vector<Eigen::VectorXd> pred, truth;
                for (const int cause : scm.causes) {
                    const Intervention iv{{cause, gammas.at(cause)}};
                    for (const int u : cf_units) {
                        const int i = u / dataset.J, j = u % dataset.J;
                        FactualRecord factual;
                        for (const auto& nd : graph.nodes())
                            if (nd.observed) factual[nd.id] = dataset.value(i, j, nd.id);
                        const Record cf = model.counterfactual(factual, iv);
                        const Record oracle_cf = oracle_counterfactual(scm, dataset, i, j, iv);
                        for (const int out : scm.outcomes) {
                            pred.push_back(cf.at(out));
                            truth.push_back(oracle_cf.at(out));
                        }
                    }
                }
                res.rows.push_back({seed, n, mname, "cf", mse(pred, truth), elapsed(t0)});
            }
        }
        results[sidx] = std::move(res);
    };

    if (workers <= 1 || seeds.size() <= 1) {
        for (std::size_t s = 0; s < seeds.size(); ++s) run_seed(s);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const int count = std::min<int>(workers, static_cast<int>(seeds.size()));
        for (int w = 0; w < count; ++w)
            pool.emplace_back([&] {
                for (std::size_t s = next.fetch_add(1); s < seeds.size(); s = next.fetch_add(1))
                    run_seed(s);
            });
        for (auto& t : pool) t.join();
    }

    ExperimentReport report;
    report.seeds = seeds;
    report.config_echo = {{"benchmark", config.benchmark.name},
                          {"J", config.benchmark.J},
                          {"K_n", config.benchmark.K_n},
                          {"n_list", config.n_list},
                          {"methods", config.methods},
                          {"sample_count", config.sample_count},
                          {"cf_units_cap", config.cf_units_cap},
                          {"gamma_sd_shift", config.gamma_sd_shift},
                          {"hyper",
                           {{"T", config.hyper.T},
                            {"beta_min", config.hyper.beta_min},
                            {"beta_max", config.hyper.beta_max},
                            {"hidden", config.hyper.hidden},
                            {"embed_dim", config.hyper.embed_dim},
                            {"lr", config.hyper.lr},
                            {"epochs", config.hyper.epochs},
                            {"batch", config.hyper.batch}}}};
    for (auto& r : results) {
        report.rows.insert(report.rows.end(), r.rows.begin(), r.rows.end());
        report.densities.insert(report.densities.end(), r.densities.begin(), r.densities.end());
    }

    // aggregate mean +- sd per (n, method, query), recomputable from rows
    for (const int n : config.n_list)
        for (const auto& mname : config.methods)
            for (const std::string query : {"obs", "int", "cf"}) {
                AggregateRow agg;
                agg.n = n;
                agg.method = mname;
                agg.query = query;
                std::vector<double> vals, times;
                for (const auto& row : report.rows)
                    if (row.n == n && row.method == mname && row.query == query) {
                        vals.push_back(row.value);
                        times.push_back(row.seconds);
                    }
                if (vals.empty()) continue;
                for (const double v : vals) agg.mean += v;
                agg.mean /= vals.size();
                for (const double v : vals) agg.sd += (v - agg.mean) * (v - agg.mean);
                agg.sd = vals.size() > 1 ? std::sqrt(agg.sd / (vals.size() - 1)) : 0.0;
                for (const double t : times) agg.time_mean += t;
                agg.time_mean /= times.size();
                report.aggregate.push_back(std::move(agg));
            }
    return report;
}

nlohmann::json ExperimentReport::to_json() const {
    nlohmann::json j;
    j["config"] = config_echo;
    j["seeds"] = seeds;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows)
        j["rows"].push_back({{"seed", r.seed},
                             {"n", r.n},
                             {"method", r.method},
                             {"query", r.query},
                             {"value", r.value},
                             {"seconds", r.seconds}});
    j["aggregate"] = nlohmann::json::array();
    for (const auto& a : aggregate)
        j["aggregate"].push_back({{"n", a.n},
                                  {"method", a.method},
                                  {"query", a.query},
                                  {"mean", a.mean},
                                  {"sd", a.sd},
                                  {"time_mean", a.time_mean}});
    return j;
}

void write_report_csv(const ExperimentReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "seed,n,method,query,value,seconds\n";
    char buf[64];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g", r.value, r.seconds);
        out << r.seed << ',' << r.n << ',' << r.method << ',' << r.query << ',' << buf << '\n';
    }
}

void write_density_csv(const ExperimentReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "n,method,node,x,model_density,oracle_density\n";
    char buf[96];
    for (const auto& g : report.densities)
        for (std::size_t i = 0; i < g.x.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g", g.x[i], g.model_density[i],
                          g.oracle_density[i]);
            out << g.n << ',' << g.method << ',' << g.node << ',' << buf << '\n';
        }
}

} // namespace diffscm
