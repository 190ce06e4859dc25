#include <algorithm>
#include <cmath>
#include <functional>

#include "diffscm/rng.hpp"
#include "diffscm/stdyn.hpp"

namespace diffscm {

namespace {

using Getter = std::function<const Eigen::VectorXd&(int)>;

Eigen::VectorXd eval_equation(const GroundTruthScm& scm, int k, int region, const Getter& get,
                              const Eigen::VectorXd& noise) {
    const NodeEquation& eq = scm.equations[static_cast<std::size_t>(k - 1)];
    switch (eq.type) {
        case NodeEquation::Type::Root:
        case NodeEquation::Type::Coefficient:
            return noise; // exogenous draw is the value itself
        case NodeEquation::Type::Anm: {
            double acc = eq.intercept;
            for (const auto& t : eq.terms) {
                const double v = get(t.parent)[0];
                switch (t.kind) {
                    case Term::Kind::Linear: acc += t.coeff * v; break;
                    case Term::Kind::Quadratic: acc += t.coeff * v * v; break;
                    case Term::Kind::Sine: acc += t.coeff * std::sin(v); break;
                }
            }
            Eigen::VectorXd out(1);
            out[0] = acc + noise[0];
            return out;
        }
        case NodeEquation::Type::Link: {
            Eigen::VectorXd x_in(eq.link_inputs.size());
            for (std::size_t c = 0; c < eq.link_inputs.size(); ++c)
                x_in[static_cast<Eigen::Index>(c)] = get(eq.link_inputs[c])[0];
            return confounder_link_apply(scm.link, region, x_in, noise);
        }
    }
    throw Error("unreachable equation type");
}

NodeSpec make_node(int id, NodeKind kind, std::vector<int> backdoor, bool observed) {
    NodeSpec n;
    n.id = id;
    n.dim = 1;
    n.kind = kind;
    n.backdoor = std::move(backdoor);
    n.observed = observed;
    return n;
}

// The published figure names the node roles but not the full edge list; the
// wiring below is this registry's reconstruction. Latent confounding runs
// root -> explanatory pair -> explained node -> outcomes, so the observed
// roots block every backdoor path, and X33 is kept free of the latent chain
// as a clean additive-noise target for bound checks.
GroundTruthScm build_pfst33(const BenchmarkConfig& cfg, std::uint64_t seed) {
    if (cfg.K_n != 6)
        throw InvalidSize("pfst33 has 18 coefficient nodes and requires K_n = 6");
    GroundTruthScm scm;
    scm.name = "pfst33";
    scm.n = cfg.n;
    scm.J = cfg.J;
    scm.causes = {1, 2, 3};
    scm.outcomes = {31, 32, 33};

    std::vector<NodeSpec> nodes;
    // causes
    nodes.push_back(make_node(1, NodeKind::Endogenous, {22, 23}, true));
    nodes.push_back(make_node(2, NodeKind::Endogenous, {24, 25}, true));
    nodes.push_back(make_node(3, NodeKind::Endogenous, {26, 27}, true));
    // coefficient nodes of the three functional covariates
    for (int id = 4; id <= 21; ++id)
        nodes.push_back(make_node(id, NodeKind::FunctionalCoefficient, {}, true));
    // observed backdoor roots
    for (int id = 22; id <= 27; ++id)
        nodes.push_back(make_node(id, NodeKind::Root, {}, true));
    // latent confounder chain
    nodes.push_back(make_node(28, NodeKind::UnobservedExplanatory, {}, false));
    nodes.push_back(make_node(29, NodeKind::UnobservedExplanatory, {}, false));
    nodes.push_back(make_node(30, NodeKind::UnobservedExplained, {}, false));
    // outcomes
    nodes.push_back(make_node(31, NodeKind::Endogenous, {1, 4, 5, 22, 23}, true));
    nodes.push_back(make_node(32, NodeKind::Endogenous, {2, 10, 11, 24, 25}, true));
    nodes.push_back(make_node(33, NodeKind::Endogenous, {3, 16, 17, 26, 27}, true));

    std::vector<std::pair<int, int>> edges = {
        // roots into the latent explanatory pair, and into the causes
        {22, 28}, {23, 28}, {24, 29}, {25, 29},
        {22, 1}, {23, 1}, {24, 2}, {25, 2}, {26, 3}, {27, 3},
        // latent chain and its reach into the outcomes
        {28, 30}, {29, 30}, {30, 31}, {30, 32},
        // outcome parents
        {1, 31}, {4, 31}, {5, 31},
        {2, 32}, {10, 32}, {11, 32},
        {3, 33}, {16, 33}, {17, 33}, {26, 33}, {27, 33},
    };
    scm.graph = CausalGraph(std::move(nodes), std::move(edges));
    validate_dag(scm.graph);

    scm.equations.resize(33);
    const auto anm = [&](int id, double intercept, std::vector<Term> terms, double scale,
                         int car = -1) {
        NodeEquation& eq = scm.equations[static_cast<std::size_t>(id - 1)];
        eq.type = NodeEquation::Type::Anm;
        eq.intercept = intercept;
        eq.terms = std::move(terms);
        eq.noise_scale = scale;
        eq.car_block = car;
    };
    const auto root = [&](int id, double mean, double sd) {
        NodeEquation& eq = scm.equations[static_cast<std::size_t>(id - 1)];
        eq.type = NodeEquation::Type::Root;
        eq.mean = mean;
        eq.sd = sd;
    };

    const double root_mean[6] = {0.5, -0.3, 0.2, 0.8, -0.5, 0.4};
    const double root_sd[6] = {1.0, 0.8, 1.1, 0.9, 1.0, 0.7};
    for (int b = 0; b < 6; ++b) root(22 + b, root_mean[b], root_sd[b]);

    anm(1, 0.2, {{22, Term::Kind::Linear, 0.9}, {23, Term::Kind::Sine, 0.8}}, 0.5);
    anm(2, -0.1, {{24, Term::Kind::Linear, 0.7}, {25, Term::Kind::Quadratic, 0.25}}, 0.5);
    anm(3, 0.3, {{26, Term::Kind::Linear, 0.8}, {27, Term::Kind::Sine, 0.7}}, 0.5);

    // latent explanatory pair shares one CAR block; the explained node gets
    // its own, weaker one
    anm(28, 0.0, {{22, Term::Kind::Linear, 0.8}, {23, Term::Kind::Sine, 0.7}}, 1.0, 0);
    anm(29, 0.0, {{24, Term::Kind::Linear, 0.6}, {25, Term::Kind::Sine, 0.7}}, 1.0, 0);
    {
        NodeEquation& eq = scm.equations[30 - 1];
        eq.type = NodeEquation::Type::Link;
        eq.link_inputs = {28, 29};
        eq.noise_scale = 1.0;
        eq.car_block = 1;
    }
    CarBlock explanatory;
    explanatory.members = {28, 29};
    explanatory.car = {cfg.J, 0.4, path_adjacency(cfg.J)};
    explanatory.Sigma = Eigen::MatrixXd::Identity(2, 2);
    explanatory.scale = 0.6;
    CarBlock explained;
    explained.members = {30};
    explained.car = {cfg.J, 0.3, path_adjacency(cfg.J)};
    explained.Sigma = Eigen::MatrixXd::Identity(1, 1);
    explained.scale = 0.5;
    scm.car_blocks = {std::move(explanatory), std::move(explained)};

    scm.link.G = GFunction{"poly-sine", 2};
    Rng gamma_rng(derive_seed(seed, "gamma"));
    scm.link.Gamma.reserve(static_cast<std::size_t>(cfg.n));
    for (int i = 0; i < cfg.n; ++i) {
        Eigen::MatrixXd Gi(1, scm.link.G.output_dim());
        for (Eigen::Index q = 0; q < Gi.cols(); ++q) Gi(0, q) = gamma_rng.uniform(0.5, 1.5);
        scm.link.Gamma.push_back(std::move(Gi));
    }

    anm(31, 0.3,
        {{1, Term::Kind::Linear, 0.8},
         {4, Term::Kind::Linear, 0.5},
         {5, Term::Kind::Linear, 0.4},
         {30, Term::Kind::Linear, 0.4}},
        0.5);
    anm(32, -0.2,
        {{2, Term::Kind::Linear, 0.9},
         {10, Term::Kind::Linear, 0.45},
         {11, Term::Kind::Linear, 0.35},
         {30, Term::Kind::Linear, 0.4}},
        0.5);
    // X33 is a pure additive-noise node with observed parents only, kept free
    // of the latent chain so reconstruction-bound checks have an exact target
    anm(33, 0.1,
        {{3, Term::Kind::Linear, 0.85},
         {16, Term::Kind::Linear, 0.5},
         {17, Term::Kind::Linear, 0.4},
         {26, Term::Kind::Sine, 0.6},
         {27, Term::Kind::Linear, 0.45}},
        0.5);

    // functional covariates: smooth curves whose expansion coefficients are
    // the nodes X4..X21
    Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(48, 0.0, 1.0);
    scm.basis = build_basis(cfg.basis_kind, cfg.K_n, grid);
    const double fmean[3][6] = {{1.2, 0.8, -0.5, 0.4, -0.3, 0.2},
                                {-0.6, 0.5, 0.7, -0.4, 0.3, -0.2},
                                {0.9, -0.7, 0.4, 0.3, -0.25, 0.15}};
    const double fsd[3][6] = {{0.8, 0.7, 0.6, 0.5, 0.45, 0.4},
                              {0.9, 0.65, 0.6, 0.5, 0.4, 0.35},
                              {0.85, 0.7, 0.55, 0.5, 0.45, 0.35}};
    for (int g = 0; g < 3; ++g) {
        FunctionalGroup fg;
        fg.name = "Y" + std::to_string(g + 1);
        fg.coeff_mean.resize(6);
        fg.coeff_sd.resize(6);
        for (int m = 0; m < 6; ++m) {
            fg.coeff_nodes.push_back(4 + 6 * g + m);
            fg.coeff_mean[m] = fmean[g][m];
            fg.coeff_sd[m] = fsd[g][m];
        }
        for (const int id : fg.coeff_nodes) {
            NodeEquation& eq = scm.equations[static_cast<std::size_t>(id - 1)];
            eq.type = NodeEquation::Type::Coefficient;
        }
        scm.functional.push_back(std::move(fg));
    }
    return scm;
}

GroundTruthScm build_triangle(const BenchmarkConfig& cfg, bool hidden) {
    GroundTruthScm scm;
    scm.name = hidden ? "triangle_hidden" : "triangle";
    scm.n = cfg.n;
    scm.J = cfg.J;
    scm.causes = {2};
    scm.outcomes = {3};
    std::vector<NodeSpec> nodes;
    if (hidden)
        nodes.push_back(make_node(1, NodeKind::UnobservedExplanatory, {}, false));
    else
        nodes.push_back(make_node(1, NodeKind::Root, {}, true));
    nodes.push_back(make_node(2, NodeKind::Endogenous, hidden ? std::vector<int>{} : std::vector<int>{1}, true));
    nodes.push_back(make_node(3, NodeKind::Endogenous, hidden ? std::vector<int>{2} : std::vector<int>{1, 2}, true));
    scm.graph = CausalGraph(std::move(nodes), {{1, 2}, {1, 3}, {2, 3}});
    validate_dag(scm.graph);
    scm.equations.resize(3);
    scm.equations[0].type = NodeEquation::Type::Root;
    scm.equations[0].mean = 0.0;
    scm.equations[0].sd = 1.0;
    scm.equations[1].type = NodeEquation::Type::Anm;
    scm.equations[1].terms = {{1, Term::Kind::Linear, 0.8}};
    scm.equations[1].noise_scale = 0.6;
    scm.equations[2].type = NodeEquation::Type::Anm;
    scm.equations[2].terms = {{2, Term::Kind::Linear, 1.0}, {1, Term::Kind::Linear, 1.0}};
    scm.equations[2].noise_scale = 0.5;
    return scm;
}

GroundTruthScm build_pair(const BenchmarkConfig& cfg) {
    GroundTruthScm scm;
    scm.name = "pair";
    scm.n = cfg.n;
    scm.J = cfg.J;
    scm.causes = {1};
    scm.outcomes = {2};
    std::vector<NodeSpec> nodes;
    nodes.push_back(make_node(1, NodeKind::Root, {}, true));
    nodes.push_back(make_node(2, NodeKind::Endogenous, {1}, true));
    scm.graph = CausalGraph(std::move(nodes), {{1, 2}});
    validate_dag(scm.graph);
    scm.equations.resize(2);
    scm.equations[0].type = NodeEquation::Type::Root;
    scm.equations[1].type = NodeEquation::Type::Anm;
    scm.equations[1].terms = {{1, Term::Kind::Linear, 2.0}};
    scm.equations[1].noise_scale = 0.5;
    return scm;
}

GroundTruthScm build_chain3(const BenchmarkConfig& cfg) {
    GroundTruthScm scm;
    scm.name = "chain3";
    scm.n = cfg.n;
    scm.J = cfg.J;
    scm.causes = {1};
    scm.outcomes = {3};
    std::vector<NodeSpec> nodes;
    nodes.push_back(make_node(1, NodeKind::Root, {}, true));
    nodes.push_back(make_node(2, NodeKind::Endogenous, {1}, true));
    nodes.push_back(make_node(3, NodeKind::Endogenous, {2}, true));
    scm.graph = CausalGraph(std::move(nodes), {{1, 2}, {2, 3}});
    validate_dag(scm.graph);
    scm.equations.resize(3);
    scm.equations[0].type = NodeEquation::Type::Root;
    scm.equations[1].type = NodeEquation::Type::Anm;
    scm.equations[1].terms = {{1, Term::Kind::Linear, 1.2}};
    scm.equations[1].noise_scale = 0.5;
    scm.equations[2].type = NodeEquation::Type::Anm;
    scm.equations[2].terms = {{2, Term::Kind::Linear, 0.8}};
    scm.equations[2].noise_scale = 0.5;
    return scm;
}

} // namespace

std::vector<std::string> registered_benchmarks() {
    return {"pfst33", "triangle", "triangle_hidden", "pair", "chain3"};
}

GroundTruthScm instantiate_benchmark(const BenchmarkConfig& config, std::uint64_t seed) {
    if (config.n < 1 || config.J < 1)
        throw InvalidSize("benchmark sizes must satisfy n >= 1 and J >= 1");
    if (config.name == "pfst33") return build_pfst33(config, seed);
    if (config.name == "triangle") return build_triangle(config, false);
    if (config.name == "triangle_hidden") return build_triangle(config, true);
    if (config.name == "pair") return build_pair(config);
    if (config.name == "chain3") return build_chain3(config);
    std::string names;
    for (const auto& s : registered_benchmarks()) names += (names.empty() ? "" : ", ") + s;
    throw UnknownBenchmark("no benchmark named '" + config.name + "' (registered: " + names + ")");
}

namespace {

/// Per-block joint temporal draw for one region, flattened (time-major).
Eigen::MatrixXd car_block_chol_D(const CarBlock& block) {
    const Eigen::MatrixXd D = car_cov(block.car);
    return Eigen::LLT<Eigen::MatrixXd>(D).matrixL();
}

struct ExogenousDraws {
    // [unit][k-1]: the realized additive noise (roots: the value itself)
    std::vector<std::vector<Eigen::VectorXd>> per_unit;
    // curves per functional group, per unit
    std::vector<std::vector<Eigen::VectorXd>> curves;
};

ExogenousDraws draw_exogenous(const GroundTruthScm& scm, std::uint64_t seed) {
    const int K = scm.graph.node_count();
    const int units = scm.n * scm.J;
    ExogenousDraws out;
    out.per_unit.assign(static_cast<std::size_t>(units), std::vector<Eigen::VectorXd>(static_cast<std::size_t>(K)));

    std::vector<bool> handled(static_cast<std::size_t>(K) + 1, false);
    for (const auto& block : scm.car_blocks)
        for (const int id : block.members) handled[static_cast<std::size_t>(id)] = true;
    for (const auto& fg : scm.functional)
        for (const int id : fg.coeff_nodes) handled[static_cast<std::size_t>(id)] = true;

    // i.i.d. nodes: one stream per node, consumed unit-major
    for (int k = 1; k <= K; ++k) {
        if (handled[static_cast<std::size_t>(k)]) continue;
        const NodeEquation& eq = scm.equations[static_cast<std::size_t>(k - 1)];
        const int d = scm.graph.node(k).dim;
        Rng rng(derive_seed(seed, "exo", static_cast<std::uint64_t>(k)));
        for (int u = 0; u < units; ++u) {
            Eigen::VectorXd v(d);
            for (int c = 0; c < d; ++c) v[c] = rng.normal();
            if (eq.type == NodeEquation::Type::Root)
                v = (eq.mean + eq.sd * v.array()).matrix();
            else
                v *= eq.noise_scale;
            out.per_unit[static_cast<std::size_t>(u)][static_cast<std::size_t>(k - 1)] = std::move(v);
        }
    }

    // CAR blocks: one joint draw of shape (J, members) per region
    for (std::size_t b = 0; b < scm.car_blocks.size(); ++b) {
        const auto& block = scm.car_blocks[b];
        const Eigen::MatrixXd LD = car_block_chol_D(block);
        const Eigen::MatrixXd LS = Eigen::LLT<Eigen::MatrixXd>(block.Sigma).matrixL();
        const Eigen::Index m = block.Sigma.rows();
        Rng rng(derive_seed(seed, "car", b));
        Eigen::MatrixXd Z(scm.J, m);
        for (int i = 0; i < scm.n; ++i) {
            for (int j = 0; j < scm.J; ++j)
                for (Eigen::Index v = 0; v < m; ++v) Z(j, v) = rng.normal();
            const Eigen::MatrixXd E = LD * Z * LS.transpose();
            for (int j = 0; j < scm.J; ++j)
                for (std::size_t mi = 0; mi < block.members.size(); ++mi) {
                    Eigen::VectorXd v(1);
                    v[0] = block.scale * E(j, static_cast<Eigen::Index>(mi));
                    out.per_unit[static_cast<std::size_t>(i * scm.J + j)]
                                [static_cast<std::size_t>(block.members[mi] - 1)] = std::move(v);
                }
        }
    }

    // functional groups: coefficients drawn per unit, curve synthesized, then
    // re-expanded so coefficient node values flow through the basis pipeline
    out.curves.resize(scm.functional.size());
    for (std::size_t g = 0; g < scm.functional.size(); ++g) {
        const auto& fg = scm.functional[g];
        Rng rng(derive_seed(seed, "fda", g));
        out.curves[g].resize(static_cast<std::size_t>(units));
        for (int u = 0; u < units; ++u) {
            Eigen::VectorXd theta(fg.coeff_mean.size());
            for (Eigen::Index m = 0; m < theta.size(); ++m)
                theta[m] = fg.coeff_mean[m] + fg.coeff_sd[m] * rng.normal();
            const Curve curve = reconstruct(theta, scm.basis);
            const Eigen::VectorXd coeffs = expand(curve, scm.basis);
            out.curves[g][static_cast<std::size_t>(u)] = curve;
            for (std::size_t mi = 0; mi < fg.coeff_nodes.size(); ++mi) {
                Eigen::VectorXd v(1);
                v[0] = coeffs[static_cast<Eigen::Index>(mi)];
                out.per_unit[static_cast<std::size_t>(u)][static_cast<std::size_t>(fg.coeff_nodes[mi] - 1)] =
                    std::move(v);
            }
        }
    }
    return out;
}

} // namespace

PanelDataset simulate_panel(const GroundTruthScm& scm, std::uint64_t seed,
                            const std::vector<int>& eval_order) {
    const int K = scm.graph.node_count();
    std::vector<int> order = eval_order.empty() ? scm.graph.topological_order() : eval_order;
    if (static_cast<int>(order.size()) != K)
        throw InvalidSize("evaluation order must cover every node");

    PanelDataset ds;
    ds.n = scm.n;
    ds.J = scm.J;
    ds.K = K;
    ds.dims.resize(static_cast<std::size_t>(K));
    for (int k = 1; k <= K; ++k) ds.dims[static_cast<std::size_t>(k - 1)] = scm.graph.node(k).dim;
    ds.values.assign(static_cast<std::size_t>(ds.n) * ds.J * K, Eigen::VectorXd());

    ExogenousDraws exo = draw_exogenous(scm, seed);

    for (const int k : order) {
        for (int i = 0; i < ds.n; ++i)
            for (int j = 0; j < ds.J; ++j) {
                const Getter get = [&](int p) -> const Eigen::VectorXd& { return ds.value(i, j, p); };
                ds.value(i, j, k) = eval_equation(
                    scm, k, i, get,
                    exo.per_unit[static_cast<std::size_t>(ds.unit(i, j))][static_cast<std::size_t>(k - 1)]);
            }
    }

    for (std::size_t g = 0; g < scm.functional.size(); ++g) {
        PanelDataset::CurveSet cs;
        cs.name = scm.functional[g].name;
        cs.coeff_nodes = scm.functional[g].coeff_nodes;
        cs.grid = scm.basis.grid;
        cs.curves = std::move(exo.curves[g]);
        ds.curves.push_back(std::move(cs));
    }
    ds.exogenous = std::move(exo.per_unit);
    return ds;
}

std::pair<PanelDataset, GroundTruthScm> generate_benchmark(const BenchmarkConfig& config,
                                                           std::uint64_t seed) {
    GroundTruthScm scm = instantiate_benchmark(config, seed);
    PanelDataset ds = simulate_panel(scm, derive_seed(seed, "panel"));
    return {std::move(ds), std::move(scm)};
}

namespace {
void check_interventions(const GroundTruthScm& scm, const Record& interventions) {
    for (const auto& [id, v] : interventions) {
        if (id < 1 || id > scm.graph.node_count())
            throw UnknownNode("intervention on unknown node " + std::to_string(id));
        if (v.size() != scm.graph.node(id).dim)
            throw DimensionMismatch("intervention value dimension mismatch on node " + std::to_string(id));
    }
}
} // namespace

std::vector<Record> oracle_interventional(const GroundTruthScm& scm, const Record& interventions,
                                          int count, std::uint64_t seed) {
    check_interventions(scm, interventions);
    const int K = scm.graph.node_count();
    const auto order = scm.graph.topological_order();

    // Cholesky factors reused across samples
    std::vector<Eigen::MatrixXd> LD, LS;
    for (const auto& block : scm.car_blocks) {
        LD.push_back(car_block_chol_D(block));
        LS.push_back(Eigen::LLT<Eigen::MatrixXd>(block.Sigma).matrixL());
    }

    std::vector<Record> out(static_cast<std::size_t>(count));
    for (int s = 0; s < count; ++s) {
        Rng rng(derive_seed(seed, "oracle-int", static_cast<std::uint64_t>(s)));
        const int i = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(scm.n)));
        const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(scm.J)));

        // fresh exogenous draws in fixed node order
        std::vector<Eigen::VectorXd> noise(static_cast<std::size_t>(K));
        std::vector<bool> handled(static_cast<std::size_t>(K) + 1, false);
        for (std::size_t b = 0; b < scm.car_blocks.size(); ++b) {
            const auto& block = scm.car_blocks[b];
            const Eigen::Index m = block.Sigma.rows();
            Eigen::MatrixXd Z(scm.J, m);
            for (int jj = 0; jj < scm.J; ++jj)
                for (Eigen::Index v = 0; v < m; ++v) Z(jj, v) = rng.normal();
            const Eigen::MatrixXd E = LD[b] * Z * LS[b].transpose();
            for (std::size_t mi = 0; mi < block.members.size(); ++mi) {
                Eigen::VectorXd v(1);
                v[0] = block.scale * E(j, static_cast<Eigen::Index>(mi));
                noise[static_cast<std::size_t>(block.members[mi] - 1)] = std::move(v);
                handled[static_cast<std::size_t>(block.members[mi])] = true;
            }
        }
        for (const auto& fg : scm.functional)
            for (std::size_t mi = 0; mi < fg.coeff_nodes.size(); ++mi) {
                Eigen::VectorXd v(1);
                v[0] = fg.coeff_mean[static_cast<Eigen::Index>(mi)] +
                       fg.coeff_sd[static_cast<Eigen::Index>(mi)] * rng.normal();
                noise[static_cast<std::size_t>(fg.coeff_nodes[mi] - 1)] = std::move(v);
                handled[static_cast<std::size_t>(fg.coeff_nodes[mi])] = true;
            }
        for (int k = 1; k <= K; ++k) {
            if (handled[static_cast<std::size_t>(k)]) continue;
            const NodeEquation& eq = scm.equations[static_cast<std::size_t>(k - 1)];
            const int d = scm.graph.node(k).dim;
            Eigen::VectorXd v(d);
            for (int c = 0; c < d; ++c) v[c] = rng.normal();
            if (eq.type == NodeEquation::Type::Root)
                v = (eq.mean + eq.sd * v.array()).matrix();
            else
                v *= eq.noise_scale;
            noise[static_cast<std::size_t>(k - 1)] = std::move(v);
        }

        Record rec;
        const Getter get = [&](int p) -> const Eigen::VectorXd& { return rec.at(p); };
        for (const int k : order) {
            const auto it = interventions.find(k);
            if (it != interventions.end())
                rec[k] = it->second;
            else
                rec[k] = eval_equation(scm, k, i, get, noise[static_cast<std::size_t>(k - 1)]);
        }
        out[static_cast<std::size_t>(s)] = std::move(rec);
    }
    return out;
}

Record oracle_counterfactual(const GroundTruthScm& scm, const PanelDataset& dataset, int i, int j,
                             const Record& interventions) {
    check_interventions(scm, interventions);
    if (!dataset.has_exogenous())
        throw MissingExogenous("dataset carries no stored exogenous draws");
    if (i < 0 || i >= dataset.n || j < 0 || j >= dataset.J)
        throw InvalidSize("factual unit index out of range");
    const auto& noise = dataset.exogenous[static_cast<std::size_t>(dataset.unit(i, j))];
    Record rec;
    const Getter get = [&](int p) -> const Eigen::VectorXd& { return rec.at(p); };
    for (const int k : scm.graph.topological_order()) {
        const auto it = interventions.find(k);
        if (it != interventions.end())
            rec[k] = it->second;
        else
            rec[k] = eval_equation(scm, k, i, get, noise[static_cast<std::size_t>(k - 1)]);
    }
    return rec;
}

} // namespace diffscm
