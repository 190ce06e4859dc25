#include "diffscm/stdyn.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "diffscm/rng.hpp"

namespace diffscm {

Eigen::MatrixXd path_adjacency(int J) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(J, J);
    for (int j = 0; j + 1 < J; ++j) {
        H(j, j + 1) = 1.0;
        H(j + 1, j) = 1.0;
    }
    return H;
}

namespace {
void check_adjacency(const CarSpec& spec) {
    const auto& H = spec.H;
    if (H.rows() != spec.J || H.cols() != spec.J)
        throw InvalidAdjacency("H must be J x J");
    for (int a = 0; a < spec.J; ++a) {
        if (H(a, a) != 0.0) throw InvalidAdjacency("H must have zero diagonal");
        for (int b = 0; b < spec.J; ++b) {
            if (H(a, b) != 0.0 && H(a, b) != 1.0)
                throw InvalidAdjacency("H entries must be 0 or 1");
            if (H(a, b) != H(b, a)) throw InvalidAdjacency("H must be symmetric");
        }
    }
}
} // namespace

Eigen::MatrixXd car_cov(const CarSpec& spec) {
    if (spec.J < 1) throw InvalidAdjacency("J must be positive");
    check_adjacency(spec);
    const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(spec.J, spec.J) - spec.rho * spec.H;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(P);
    if (!lu.isInvertible())
        throw SingularMatrix("I - rho*H is singular (rho too large for this adjacency)");
    Eigen::MatrixXd D = lu.inverse();
    D = 0.5 * (D + D.transpose().eval()); // symmetrize fp residue
    Eigen::LLT<Eigen::MatrixXd> llt(D);
    if (llt.info() != Eigen::Success)
        throw SingularMatrix("I - rho*H is invertible but not positive definite");
    return D;
}

Eigen::MatrixXd kron_cov(const Eigen::MatrixXd& D, const Eigen::MatrixXd& Sigma) {
    if (D.rows() != D.cols() || Sigma.rows() != Sigma.cols())
        throw DimensionMismatch("kron_cov needs square factors");
    const Eigen::Index J = D.rows(), m = Sigma.rows();
    Eigen::MatrixXd out(J * m, J * m);
    for (Eigen::Index j = 0; j < J; ++j)
        for (Eigen::Index l = 0; l < J; ++l)
            out.block(j * m, l * m, m, m) = D(j, l) * Sigma;
    return out;
}

std::vector<Eigen::VectorXd> sample_temporal_noise(const Eigen::MatrixXd& D,
                                                   const Eigen::MatrixXd& Sigma, int count,
                                                   std::uint64_t seed) {
    if (D.rows() != D.cols() || Sigma.rows() != Sigma.cols())
        throw DimensionMismatch("covariance factors must be square");
    Eigen::LLT<Eigen::MatrixXd> lltD(D), lltS(Sigma);
    if (lltD.info() != Eigen::Success || lltS.info() != Eigen::Success)
        throw NotPositiveDefinite("Cholesky failed: factor not positive definite");
    const Eigen::MatrixXd LD = lltD.matrixL();
    const Eigen::MatrixXd LS = lltS.matrixL();
    const Eigen::Index J = D.rows(), m = Sigma.rows();

    Rng rng(seed);
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(count));
    Eigen::MatrixXd Z(J, m);
    for (int s = 0; s < count; ++s) {
        for (Eigen::Index j = 0; j < J; ++j)
            for (Eigen::Index v = 0; v < m; ++v) Z(j, v) = rng.normal();
        const Eigen::MatrixXd X = LD * Z * LS.transpose(); // Cov(vec) = D (x) Sigma
        Eigen::VectorXd flat(J * m);
        for (Eigen::Index j = 0; j < J; ++j)
            for (Eigen::Index v = 0; v < m; ++v) flat[j * m + v] = X(j, v);
        out.push_back(std::move(flat));
    }
    return out;
}

int GFunction::output_dim() const {
    if (kind == "identity") return input_dim;
    if (kind == "poly2") return 2 * input_dim;
    if (kind == "poly-sine") return 3 * input_dim;
    throw ConfigError("unknown G family: " + kind);
}

Eigen::VectorXd GFunction::operator()(const Eigen::VectorXd& x) const {
    if (x.size() != input_dim) throw DimensionMismatch("G input dimension mismatch");
    Eigen::VectorXd out(output_dim());
    for (int c = 0; c < input_dim; ++c) {
        const double v = x[c];
        if (kind == "identity") {
            out[c] = v;
        } else if (kind == "poly2") {
            out[2 * c] = v;
            out[2 * c + 1] = v * v;
        } else {
            out[3 * c] = v;
            out[3 * c + 1] = v * v;
            out[3 * c + 2] = std::sin(v);
        }
    }
    return out;
}

Eigen::VectorXd confounder_link_apply(const ConfounderLink& link, int region,
                                      const Eigen::VectorXd& x_c1, const Eigen::VectorXd& u_c2) {
    if (region < 0 || region >= static_cast<int>(link.Gamma.size()))
        throw DimensionMismatch("region index outside link coefficient table");
    const Eigen::MatrixXd& Gi = link.Gamma[static_cast<std::size_t>(region)];
    const Eigen::VectorXd g = link.G(x_c1);
    if (Gi.cols() != g.size() || Gi.rows() != u_c2.size())
        throw DimensionMismatch("link coefficient matrix does not match G output / u dimensions");
    return Gi * g + u_c2;
}

const Eigen::VectorXd& PanelDataset::value(int i, int j, int k) const {
    return values[static_cast<std::size_t>(unit(i, j)) * K + (k - 1)];
}

Eigen::VectorXd& PanelDataset::value(int i, int j, int k) {
    return values[static_cast<std::size_t>(unit(i, j)) * K + (k - 1)];
}

// ---------------------------------------------------------------------------
// Dataset files
// ---------------------------------------------------------------------------

namespace {
std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
} // namespace

void save_dataset(const PanelDataset& dataset, const GroundTruthScm& scm, std::uint64_t seed,
                  const std::string& prefix) {
    {
        std::ofstream out(prefix + ".csv");
        if (!out) throw IoError("cannot write " + prefix + ".csv");
        out << "region,time,node,component,value\n";
        for (int i = 0; i < dataset.n; ++i)
            for (int j = 0; j < dataset.J; ++j)
                for (int k = 1; k <= dataset.K; ++k) {
                    const auto& v = dataset.value(i, j, k);
                    for (Eigen::Index c = 0; c < v.size(); ++c)
                        out << (i + 1) << ',' << (j + 1) << ',' << k << ',' << c << ','
                            << fmt_full(v[c]) << '\n';
                }
    }
    if (!dataset.curves.empty()) {
        std::ofstream out(prefix + "_curves.csv");
        if (!out) throw IoError("cannot write " + prefix + "_curves.csv");
        out << "region,time,node,t,value\n";
        for (const auto& cs : dataset.curves)
            for (int i = 0; i < dataset.n; ++i)
                for (int j = 0; j < dataset.J; ++j) {
                    const auto& curve = cs.curves[static_cast<std::size_t>(dataset.unit(i, j))];
                    for (Eigen::Index g = 0; g < cs.grid.size(); ++g)
                        out << (i + 1) << ',' << (j + 1) << ',' << cs.name << ','
                            << fmt_full(cs.grid[g]) << ',' << fmt_full(curve[g]) << '\n';
                }
    }
    nlohmann::json side;
    side["benchmark"] = scm.name;
    side["n"] = dataset.n;
    side["J"] = dataset.J;
    side["K"] = dataset.K;
    side["seed"] = seed;
    side["graph"] = scm.graph.to_json();
    if (!dataset.curves.empty()) {
        side["functional"] = nlohmann::json::array();
        for (const auto& cs : dataset.curves)
            side["functional"].push_back({{"name", cs.name}, {"coeff_nodes", cs.coeff_nodes}});
    }
    if (dataset.has_exogenous()) {
        nlohmann::json exo = nlohmann::json::array();
        for (const auto& unit : dataset.exogenous) {
            nlohmann::json ju = nlohmann::json::array();
            for (const auto& v : unit)
                ju.push_back(std::vector<double>(v.data(), v.data() + v.size()));
            exo.push_back(std::move(ju));
        }
        side["exogenous"] = std::move(exo);
    }
    std::ofstream out(prefix + ".json");
    if (!out) throw IoError("cannot write " + prefix + ".json");
    out << side.dump() << "\n";
}

LoadedDataset load_dataset(const std::string& prefix) {
    LoadedDataset ld;
    nlohmann::json side;
    {
        std::ifstream in(prefix + ".json");
        if (!in) throw IoError("cannot read " + prefix + ".json");
        try {
            in >> side;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(prefix + ".json: " + e.what());
        }
    }
    ld.graph = CausalGraph::from_json(side.at("graph"));
    ld.benchmark = side.value("benchmark", std::string());
    ld.seed = side.value("seed", std::uint64_t{0});
    auto& ds = ld.dataset;
    ds.n = side.at("n").get<int>();
    ds.J = side.at("J").get<int>();
    ds.K = side.at("K").get<int>();
    ds.dims.resize(static_cast<std::size_t>(ds.K));
    for (int k = 1; k <= ds.K; ++k)
        ds.dims[static_cast<std::size_t>(k - 1)] = ld.graph.node(k).dim;
    ds.values.assign(static_cast<std::size_t>(ds.n) * ds.J * ds.K, Eigen::VectorXd());
    for (int i = 0; i < ds.n; ++i)
        for (int j = 0; j < ds.J; ++j)
            for (int k = 1; k <= ds.K; ++k)
                ds.value(i, j, k) = Eigen::VectorXd::Zero(ds.dims[static_cast<std::size_t>(k - 1)]);

    std::ifstream in(prefix + ".csv");
    if (!in) throw IoError("cannot read " + prefix + ".csv");
    std::string line;
    if (!std::getline(in, line) || line != "region,time,node,component,value")
        throw ParseError(prefix + ".csv: bad header");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        int i, j, k, c;
        double v;
        char comma;
        if (!(ss >> i >> comma >> j >> comma >> k >> comma >> c >> comma >> v))
            throw ParseError(prefix + ".csv:" + std::to_string(lineno) + ": malformed row");
        if (i < 1 || i > ds.n || j < 1 || j > ds.J || k < 1 || k > ds.K || c < 0 ||
            c >= ds.dims[static_cast<std::size_t>(k - 1)])
            throw ParseError(prefix + ".csv:" + std::to_string(lineno) + ": index out of range");
        ds.value(i - 1, j - 1, k)[c] = v;
    }

    if (side.contains("exogenous")) {
        const auto& exo = side.at("exogenous");
        ds.exogenous.resize(exo.size());
        for (std::size_t u = 0; u < exo.size(); ++u) {
            ds.exogenous[u].resize(exo[u].size());
            for (std::size_t k = 0; k < exo[u].size(); ++k) {
                const auto vals = exo[u][k].get<std::vector<double>>();
                ds.exogenous[u][k] =
                    Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
            }
        }
    }

    // raw functional observations, when present
    std::ifstream curves_in(prefix + "_curves.csv");
    if (curves_in) {
        std::map<std::string, std::vector<int>> mapping;
        if (side.contains("functional"))
            for (const auto& jf : side.at("functional"))
                mapping[jf.at("name").get<std::string>()] =
                    jf.at("coeff_nodes").get<std::vector<int>>();
        if (!std::getline(curves_in, line) || line != "region,time,node,t,value")
            throw ParseError(prefix + "_curves.csv: bad header");
        // rows arrive grid-point-major per (name, unit); collect then align
        std::map<std::string, std::map<int, std::vector<std::pair<double, double>>>> staged;
        lineno = 1;
        while (std::getline(curves_in, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::istringstream ss(line);
            std::string cell;
            std::vector<std::string> cells;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            if (cells.size() != 5)
                throw ParseError(prefix + "_curves.csv:" + std::to_string(lineno) + ": malformed row");
            const int i = std::stoi(cells[0]) - 1;
            const int j = std::stoi(cells[1]) - 1;
            if (i < 0 || i >= ds.n || j < 0 || j >= ds.J)
                throw ParseError(prefix + "_curves.csv:" + std::to_string(lineno) + ": unit out of range");
            staged[cells[2]][ds.unit(i, j)].emplace_back(std::stod(cells[3]), std::stod(cells[4]));
        }
        for (auto& [name, units] : staged) {
            PanelDataset::CurveSet cs;
            cs.name = name;
            if (mapping.count(name)) cs.coeff_nodes = mapping[name];
            const int total = ds.n * ds.J;
            cs.curves.resize(static_cast<std::size_t>(total));
            for (auto& [u, pts] : units) {
                if (cs.grid.size() == 0) {
                    cs.grid.resize(static_cast<Eigen::Index>(pts.size()));
                    for (std::size_t g = 0; g < pts.size(); ++g)
                        cs.grid[static_cast<Eigen::Index>(g)] = pts[g].first;
                }
                if (static_cast<Eigen::Index>(pts.size()) != cs.grid.size())
                    throw ParseError(prefix + "_curves.csv: curve " + name +
                                     " has inconsistent grid sizes");
                Eigen::VectorXd c(cs.grid.size());
                for (std::size_t g = 0; g < pts.size(); ++g)
                    c[static_cast<Eigen::Index>(g)] = pts[g].second;
                cs.curves[static_cast<std::size_t>(u)] = std::move(c);
            }
            ds.curves.push_back(std::move(cs));
        }
    }
    return ld;
}

void expand_curves(PanelDataset& dataset, const BasisSystem& basis) {
    for (const auto& cs : dataset.curves) {
        if (cs.coeff_nodes.empty()) continue;
        if (static_cast<int>(cs.coeff_nodes.size()) != basis.K_n)
            throw DimensionMismatch("curve set " + cs.name + " declares " +
                                    std::to_string(cs.coeff_nodes.size()) +
                                    " coefficient nodes for a K_n=" + std::to_string(basis.K_n) +
                                    " basis");
        for (int i = 0; i < dataset.n; ++i)
            for (int j = 0; j < dataset.J; ++j) {
                const auto& curve = cs.curves[static_cast<std::size_t>(dataset.unit(i, j))];
                if (curve.size() == 0)
                    throw GridMismatch("curve set " + cs.name + " is missing unit (" +
                                       std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
                const Eigen::VectorXd coeffs = expand(curve, basis);
                for (std::size_t m = 0; m < cs.coeff_nodes.size(); ++m)
                    dataset.value(i, j, cs.coeff_nodes[m]) =
                        Eigen::VectorXd::Constant(1, coeffs[static_cast<Eigen::Index>(m)]);
            }
    }
}

} // namespace diffscm
