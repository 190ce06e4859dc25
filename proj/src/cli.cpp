#include "diffscm/cli.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "diffscm/rng.hpp"

namespace diffscm {

namespace {

// exit codes: 0 success, 1 validation failure, 2 runtime failure
int guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const IoError& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    } catch (const NotFitted& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    } catch (const MissingExogenous& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    } catch (const SingularMatrix& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    } catch (const NotPositiveDefinite& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
}

std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

Record parse_do_expression(const std::string& expr, const CausalGraph& graph) {
    Record out;
    std::stringstream ss(expr);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        const auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw ParseError("do-expression token '" + tok + "' has no '='");
        std::string name = tok.substr(0, eq);
        const std::string value = tok.substr(eq + 1);
        if (!name.empty() && (name[0] == 'X' || name[0] == 'x')) name = name.substr(1);
        int id = 0;
        try {
            std::size_t used = 0;
            id = std::stoi(name, &used);
            if (used != name.size()) throw std::invalid_argument(name);
        } catch (const std::exception&) {
            throw ParseError("do-expression token '" + tok + "': bad node name '" +
                             tok.substr(0, eq) + "'");
        }
        const auto& node = graph.node(id); // throws UnknownNode
        Eigen::VectorXd v(node.dim);
        std::stringstream vs(value);
        std::string comp;
        Eigen::Index c = 0;
        while (std::getline(vs, comp, ';')) {
            if (c >= v.size())
                throw ParseError("do-expression token '" + tok + "': too many components");
            try {
                std::size_t used = 0;
                v[c++] = std::stod(comp, &used);
                if (used != comp.size()) throw std::invalid_argument(comp);
            } catch (const std::exception&) {
                throw ParseError("do-expression token '" + tok + "': bad value '" + comp + "'");
            }
        }
        if (c != v.size())
            throw ParseError("do-expression token '" + tok + "': expected " +
                             std::to_string(node.dim) + " components");
        out[id] = std::move(v);
    }
    if (out.empty()) throw ParseError("empty do-expression");
    return out;
}

Record load_record_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || line != "node,component,value")
        throw ParseError(path + ": expected header node,component,value");
    std::map<int, std::map<int, double>> staging;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        int node, comp;
        double value;
        char comma;
        if (!(ss >> node >> comma >> comp >> comma >> value))
            throw ParseError(path + ":" + std::to_string(lineno) + ": malformed row");
        staging[node][comp] = value;
    }
    Record out;
    for (const auto& [node, comps] : staging) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(comps.size()));
        for (const auto& [c, val] : comps) {
            if (c < 0 || c >= v.size())
                throw ParseError(path + ": node " + std::to_string(node) +
                                 " has non-contiguous components");
            v[c] = val;
        }
        out[node] = std::move(v);
    }
    return out;
}

void save_record_csv(const Record& rec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "node,component,value\n";
    for (const auto& [node, v] : rec)
        for (Eigen::Index c = 0; c < v.size(); ++c)
            out << node << ',' << c << ',' << fmt_full(v[c]) << '\n';
}

int cmd_generate(const GenerateOptions& opts) {
    return guarded([&] {
        auto [dataset, scm] = generate_benchmark(opts.benchmark, opts.seed);
        save_dataset(dataset, scm, opts.seed, opts.out_prefix);
        std::printf("wrote %s.csv (%d regions x %d times x %d nodes)%s\n", opts.out_prefix.c_str(),
                    dataset.n, dataset.J, dataset.K,
                    dataset.curves.empty() ? "" : (" and " + opts.out_prefix + "_curves.csv").c_str());
        const auto failures = scm.graph.validate_backdoor_sets(scm.causes, scm.outcomes);
        for (const auto& f : failures)
            std::printf("warning: backdoor set of node %d fails for outcome %d\n", f.cause, f.outcome);
    });
}

int cmd_fit(const FitOptions& opts) {
    return guarded([&] {
        LoadedDataset ld = load_dataset(opts.dataset_prefix);
        CausalGraph graph =
            opts.graph_path.empty() ? ld.graph : CausalGraph::load_file(opts.graph_path);
        const auto mode = conditioning_mode_from_string(opts.mode);
        const auto model = CausalDiffusionModel::fit(ld.dataset, graph, mode, opts.hyper, opts.seed,
                                                     opts.workers);
        model.save_file(opts.checkpoint_out);
        std::printf("mode=%s, %zu trained nodes, %zu empirical roots\n", to_string(mode).c_str(),
                    model.node_models().size(), model.root_empirical().size());
        for (const auto& [id, nm] : model.node_models())
            std::printf("node %d: cond_dim=%d final_loss=%.6f\n", id, nm.net.cond_dim(),
                        nm.final_loss);
        const auto corr = model.abduction_backdoor_correlation(ld.dataset);
        for (const auto& [id, rho] : corr)
            std::printf("node %d: max |corr(Z, cond)| = %.4f\n", id, rho);
        std::printf("wrote %s\n", opts.checkpoint_out.c_str());
    });
}

int cmd_query(const QueryOptions& opts) {
    return guarded([&] {
        const auto model = CausalDiffusionModel::load_file(opts.checkpoint);
        const Record dos =
            opts.do_expr.empty() ? Record{} : parse_do_expression(opts.do_expr, model.graph());
        if (opts.counterfactual) {
            if (opts.factual_csv.empty())
                throw ConfigError("counterfactual queries need --factual <csv>");
            const Record factual = load_record_csv(opts.factual_csv);
            const Record cf = model.counterfactual(factual, dos);
            save_record_csv(cf, opts.out_csv);
            std::printf("wrote %s (1 record, %zu nodes)\n", opts.out_csv.c_str(), cf.size());
            return;
        }
        const auto samples = dos.empty() ? model.sample_observational(opts.count, opts.seed)
                                         : model.sample_interventional(dos, opts.count, opts.seed);
        std::ofstream out(opts.out_csv);
        if (!out) throw IoError("cannot write " + opts.out_csv);
        out << "sample,node,component,value\n";
        for (std::size_t s = 0; s < samples.size(); ++s)
            for (const auto& [node, v] : samples[s])
                for (Eigen::Index c = 0; c < v.size(); ++c)
                    out << s << ',' << node << ',' << c << ',' << fmt_full(v[c]) << '\n';
        std::printf("wrote %s (%zu samples)\n", opts.out_csv.c_str(), samples.size());
    });
}

int cmd_evaluate(const EvaluateOptions& opts) {
    return guarded([&] {
        const auto report = run_experiment(opts.config, opts.seeds, opts.workers);
        {
            std::ofstream out(opts.out_prefix + ".json");
            if (!out) throw IoError("cannot write " + opts.out_prefix + ".json");
            out << report.to_json().dump(2) << "\n";
        }
        write_report_csv(report, opts.out_prefix + ".csv");
        if (opts.config.densities)
            write_density_csv(report, opts.out_prefix + "_densities.csv");
        std::printf("wrote %s.json and %s.csv\n", opts.out_prefix.c_str(), opts.out_prefix.c_str());
        for (const auto& a : report.aggregate)
            std::printf("n=%d %s %s: %.6g +- %.6g (%.2fs)\n", a.n, a.method.c_str(),
                        a.query.c_str(), a.mean, a.sd, a.time_mean);
    });
}

} // namespace diffscm
