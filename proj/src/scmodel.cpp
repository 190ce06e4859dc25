#include "diffscm/scmodel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <set>
#include <thread>

#include "diffscm/rng.hpp"

namespace diffscm {

std::string to_string(ConditioningMode mode) {
    return mode == ConditioningMode::Backdoor ? "backdoor" : "parents";
}

ConditioningMode conditioning_mode_from_string(const std::string& s) {
    if (s == "backdoor" || s == "bdcm") return ConditioningMode::Backdoor;
    if (s == "parents" || s == "parents-only" || s == "dcm") return ConditioningMode::ParentsOnly;
    throw ConfigError("unknown conditioning mode: " + s + " (use backdoor|parents)");
}

void FitHyper::validate() const {
    if (T < 2) throw InvalidHyper("T must be >= 2");
    if (!(beta_min > 0) || !(beta_min <= beta_max) || !(beta_max < 1))
        throw InvalidHyper("need 0 < beta_min <= beta_max < 1");
    for (const int h : hidden)
        if (h < 1) throw InvalidHyper("hidden widths must be positive");
    if (embed_dim < 2 || embed_dim % 2 != 0) throw InvalidHyper("embed_dim must be even and >= 2");
    if (!(lr > 0)) throw InvalidHyper("learning rate must be positive");
    if (epochs < 1) throw InvalidHyper("epochs must be >= 1");
    if (batch < 1) throw InvalidHyper("batch must be >= 1");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1) || !(adam_eps > 0))
        throw InvalidHyper("bad adaptive-moment parameters");
}

CausalDiffusionModel::CausalDiffusionModel(CausalGraph graph, ConditioningMode mode,
                                           NoiseSchedule schedule, FitHyper hyper,
                                           std::map<int, NodeModel> node_models,
                                           std::map<int, std::vector<Eigen::VectorXd>> root_empirical,
                                           std::map<int, Standardization> stats, std::uint64_t seed)
    : graph_(std::move(graph)), mode_(mode), schedule_(std::move(schedule)), hyper_(std::move(hyper)),
      node_models_(std::move(node_models)), root_empirical_(std::move(root_empirical)),
      stats_(std::move(stats)), seed_(seed) {
    topo_ = graph_.topological_order();
    for (const auto& [id, nm] : node_models_) {
        int cond_dim = 0;
        for (const int c : nm.cond) cond_dim += graph_.node(c).dim;
        if (nm.net.cond_dim() != cond_dim)
            throw ShapeMismatch("node " + std::to_string(id) +
                                ": net conditioning width does not match its conditioning set");
    }
}

std::vector<int> CausalDiffusionModel::conditioning_set(int id) const {
    std::vector<int> cond;
    if (mode_ == ConditioningMode::Backdoor) {
        cond = graph_.node(id).backdoor;
        for (const int c : cond)
            if (!graph_.node(c).observed)
                throw ConfigError("backdoor set of node " + std::to_string(id) +
                                  " contains unobserved node " + std::to_string(c));
    } else {
        cond = graph_.observed_parents(id);
    }
    std::sort(cond.begin(), cond.end());
    return cond;
}

Eigen::VectorXd CausalDiffusionModel::standardize(int id, const Eigen::VectorXd& v) const {
    const auto& st = stats_.at(id);
    return ((v - st.mean).array() / st.sd.array()).matrix();
}

Eigen::VectorXd CausalDiffusionModel::destandardize(int id, const Eigen::VectorXd& v) const {
    const auto& st = stats_.at(id);
    return (v.array() * st.sd.array() + st.mean.array()).matrix();
}

Eigen::VectorXd CausalDiffusionModel::gather_cond(const std::vector<int>& ids,
                                                  const Record& values) const {
    int dim = 0;
    for (const int c : ids) dim += graph_.node(c).dim;
    Eigen::VectorXd out(dim);
    int at = 0;
    for (const int c : ids) {
        const auto it = values.find(c);
        if (it == values.end())
            throw MissingFactualValue("conditioning value for node " + std::to_string(c) +
                                      " is not available");
        const Eigen::VectorXd s = standardize(c, it->second);
        out.segment(at, s.size()) = s;
        at += static_cast<int>(s.size());
    }
    return out;
}

void CausalDiffusionModel::require_fitted() const {
    if (!fitted()) throw NotFitted("model has not been fitted");
}

CausalDiffusionModel CausalDiffusionModel::fit(const PanelDataset& dataset, const CausalGraph& graph,
                                               ConditioningMode mode, const FitHyper& hyper,
                                               std::uint64_t seed, int workers) {
    hyper.validate();
    validate_dag(graph);
    const int units = dataset.n * dataset.J;
    if (units < 1) throw MissingNodeData("dataset has no units");

    for (const auto& n : graph.nodes()) {
        if (!n.observed) continue;
        if (n.id > dataset.K || dataset.dims[static_cast<std::size_t>(n.id - 1)] != n.dim)
            throw MissingNodeData("dataset is missing data for node " + std::to_string(n.id));
    }

    CausalDiffusionModel model;
    model.graph_ = graph;
    model.mode_ = mode;
    model.hyper_ = hyper;
    model.schedule_ = linear_schedule(hyper.T, hyper.beta_min, hyper.beta_max);
    model.seed_ = seed;
    model.topo_ = graph.topological_order();

    // standardization statistics for every observed node
    for (const auto& n : graph.nodes()) {
        if (!n.observed) continue;
        Standardization st;
        st.mean = Eigen::VectorXd::Zero(n.dim);
        st.sd = Eigen::VectorXd::Zero(n.dim);
        for (int i = 0; i < dataset.n; ++i)
            for (int j = 0; j < dataset.J; ++j) st.mean += dataset.value(i, j, n.id);
        st.mean /= static_cast<double>(units);
        for (int i = 0; i < dataset.n; ++i)
            for (int j = 0; j < dataset.J; ++j)
                st.sd += (dataset.value(i, j, n.id) - st.mean).array().square().matrix();
        st.sd = (st.sd / static_cast<double>(units)).array().sqrt().matrix();
        for (Eigen::Index c = 0; c < st.sd.size(); ++c)
            if (st.sd[c] < 1e-12) st.sd[c] = 1.0; // constant column: leave it unscaled
        model.stats_[n.id] = std::move(st);
    }

    // split observed nodes into empirical roots and trained nodes
    std::vector<int> train_ids;
    for (const auto& n : graph.nodes()) {
        if (!n.observed) continue;
        const auto cond = model.conditioning_set(n.id);
        const bool no_observed_parents = graph.observed_parents(n.id).empty();
        if (graph.parents(n.id).empty() || (cond.empty() && no_observed_parents)) {
            // true roots, and endogenous nodes with only latent parents and
            // no recorded blockers: empirical marginal resampling
            auto& rows = model.root_empirical_[n.id];
            rows.reserve(static_cast<std::size_t>(units));
            for (int i = 0; i < dataset.n; ++i)
                for (int j = 0; j < dataset.J; ++j) rows.push_back(dataset.value(i, j, n.id));
        } else {
            if (mode == ConditioningMode::Backdoor)
                for (const int p : graph.observed_parents(n.id))
                    if (std::find(cond.begin(), cond.end(), p) == cond.end())
                        throw ConfigError("backdoor set of node " + std::to_string(n.id) +
                                          " omits its observed parent " + std::to_string(p));
            train_ids.push_back(n.id);
        }
    }

    // per-node training jobs, independent and seeded per node
    std::vector<NodeModel> trained(train_ids.size());
    const auto train_one = [&](std::size_t idx) {
        const int id = train_ids[idx];
        const int d = graph.node(id).dim;
        const auto cond_ids = model.conditioning_set(id);
        int cond_dim = 0;
        for (const int c : cond_ids) cond_dim += graph.node(c).dim;

        std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> rows(static_cast<std::size_t>(units));
        for (int i = 0; i < dataset.n; ++i)
            for (int j = 0; j < dataset.J; ++j) {
                const int u = dataset.unit(i, j);
                Eigen::VectorXd x0 = model.standardize(id, dataset.value(i, j, id));
                Eigen::VectorXd cond(cond_dim);
                int at = 0;
                for (const int c : cond_ids) {
                    const Eigen::VectorXd s = model.standardize(c, dataset.value(i, j, c));
                    cond.segment(at, s.size()) = s;
                    at += static_cast<int>(s.size());
                }
                rows[static_cast<std::size_t>(u)] = {std::move(x0), std::move(cond)};
            }

        NodeModel nm;
        nm.cond = cond_ids;
        nm.net = DenoiserNet(d, cond_dim, hyper.embed_dim, hyper.hidden);
        nm.net.init(derive_seed(seed, "net-init", static_cast<std::uint64_t>(id)));
        AdamOptimizer opt(nm.net.param_count(), hyper.lr, hyper.adam_beta1, hyper.adam_beta2,
                          hyper.adam_eps);

        std::vector<std::size_t> perm(rows.size());
        for (std::size_t r = 0; r < perm.size(); ++r) perm[r] = r;
        std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> batch;
        for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
            Rng shuffle_rng(derive_seed(seed, "shuffle", static_cast<std::uint64_t>(id),
                                        static_cast<std::uint64_t>(epoch)));
            for (std::size_t r = perm.size(); r > 1; --r)
                std::swap(perm[r - 1], perm[shuffle_rng.uniform_int(r)]);
            double epoch_loss = 0.0;
            int batches = 0;
            for (std::size_t start = 0; start < perm.size(); start += static_cast<std::size_t>(hyper.batch)) {
                const std::size_t stop = std::min(perm.size(), start + static_cast<std::size_t>(hyper.batch));
                batch.clear();
                for (std::size_t r = start; r < stop; ++r) batch.push_back(rows[perm[r]]);
                const std::uint64_t bseed =
                    derive_seed(seed, "noise", static_cast<std::uint64_t>(id),
                                static_cast<std::uint64_t>(epoch) * 1000003ULL + batches);
                auto [loss, grad] = training_batch_loss(nm.net, batch, model.schedule_, bseed);
                opt.step(nm.net.params(), grad);
                epoch_loss += loss;
                ++batches;
            }
            nm.final_loss = epoch_loss / std::max(1, batches);
        }
        trained[idx] = std::move(nm);
    };

    if (workers <= 1 || train_ids.size() <= 1) {
        for (std::size_t idx = 0; idx < train_ids.size(); ++idx) train_one(idx);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const int count = std::min<int>(workers, static_cast<int>(train_ids.size()));
        pool.reserve(static_cast<std::size_t>(count));
        for (int w = 0; w < count; ++w)
            pool.emplace_back([&] {
                for (std::size_t idx = next.fetch_add(1); idx < train_ids.size();
                     idx = next.fetch_add(1))
                    train_one(idx);
            });
        for (auto& t : pool) t.join();
    }
    for (std::size_t idx = 0; idx < train_ids.size(); ++idx)
        model.node_models_[train_ids[idx]] = std::move(trained[idx]);
    return model;
}

std::vector<Record> CausalDiffusionModel::sample_observational(int count, std::uint64_t seed) const {
    return sample_interventional({}, count, seed);
}

std::vector<Record> CausalDiffusionModel::sample_interventional(const Intervention& intervention,
                                                                int count, std::uint64_t seed) const {
    require_fitted();
    for (const auto& [id, v] : intervention) {
        const auto& n = graph_.node(id); // throws UnknownNode
        if (!n.observed)
            throw UnknownNode("cannot intervene on unobserved node " + std::to_string(id));
        if (v.size() != n.dim)
            throw DimensionMismatch("intervention value dimension mismatch on node " + std::to_string(id));
    }
    std::vector<Record> out(static_cast<std::size_t>(count));
    for (int u = 0; u < count; ++u) {
        Rng rng(derive_seed(seed, "query", static_cast<std::uint64_t>(u)));
        Record rec;
        for (const int k : topo_) {
            if (!graph_.node(k).observed) continue;
            const auto iv = intervention.find(k);
            if (iv != intervention.end()) {
                rec[k] = iv->second;
                continue;
            }
            const auto root = root_empirical_.find(k);
            if (root != root_empirical_.end()) {
                rec[k] = root->second[rng.uniform_int(root->second.size())];
                continue;
            }
            const auto nm = node_models_.find(k);
            if (nm == node_models_.end())
                throw NotFitted("no model for node " + std::to_string(k));
            Eigen::VectorXd z(graph_.node(k).dim);
            for (Eigen::Index c = 0; c < z.size(); ++c) z[c] = rng.normal();
            const Eigen::VectorXd cond = gather_cond(nm->second.cond, rec);
            rec[k] = destandardize(k, ddim_decode(nm->second.net, z, cond, schedule_));
        }
        out[static_cast<std::size_t>(u)] = std::move(rec);
    }
    return out;
}

Record CausalDiffusionModel::counterfactual(const FactualRecord& factual,
                                            const Intervention& intervention) const {
    require_fitted();
    std::set<int> affected; // descendants of the intervened set
    for (const auto& [id, v] : intervention) {
        const auto& n = graph_.node(id);
        if (!n.observed)
            throw UnknownNode("cannot intervene on unobserved node " + std::to_string(id));
        if (v.size() != n.dim)
            throw DimensionMismatch("intervention value dimension mismatch on node " + std::to_string(id));
        for (const int d : graph_.descendants(id)) affected.insert(d);
    }
    const auto factual_value = [&](int k) -> const Eigen::VectorXd& {
        const auto it = factual.find(k);
        if (it == factual.end())
            throw MissingFactualValue("factual record lacks node " + std::to_string(k));
        return it->second;
    };

    Record rec;
    for (const int k : topo_) {
        if (!graph_.node(k).observed) continue;
        const auto iv = intervention.find(k);
        if (iv != intervention.end()) {
            rec[k] = iv->second;
            continue;
        }
        const auto nm = node_models_.find(k);
        if (nm == node_models_.end()) {
            // empirical nodes carry no abducted noise; they keep their
            // factual value (a perfect reconstructor would return it anyway)
            rec[k] = factual_value(k);
            continue;
        }
        if (!intervention.empty() && !affected.count(k)) {
            rec[k] = factual_value(k); // untouched by the action
            continue;
        }
        // abduction on factual conditioning, prediction on the updated one;
        // with an empty intervention this is exactly the reconstruction pass
        Record factual_conds;
        for (const int c : nm->second.cond) factual_conds[c] = factual_value(c);
        const Eigen::VectorXd cond_f = gather_cond(nm->second.cond, factual_conds);
        const Eigen::VectorXd cond_cf =
            intervention.empty() ? cond_f : gather_cond(nm->second.cond, rec);
        const Eigen::VectorXd z =
            ddim_encode(nm->second.net, standardize(k, factual_value(k)), cond_f, schedule_);
        rec[k] = destandardize(k, ddim_decode(nm->second.net, z, cond_cf, schedule_));
    }
    return rec;
}

std::map<int, ReconstructionSummary> CausalDiffusionModel::reconstruction_error(
    const PanelDataset& dataset) const {
    require_fitted();
    if (dataset.n * dataset.J < 1) throw MissingNodeData("dataset has no units");
    std::map<int, ReconstructionSummary> out;
    for (const auto& [id, nm] : node_models_) {
        ReconstructionSummary s;
        for (int i = 0; i < dataset.n; ++i)
            for (int j = 0; j < dataset.J; ++j) {
                Record vals;
                for (const int c : nm.cond) vals[c] = dataset.value(i, j, c);
                const Eigen::VectorXd cond = gather_cond(nm.cond, vals);
                const Eigen::VectorXd x = dataset.value(i, j, id);
                const Eigen::VectorXd z = ddim_encode(nm.net, standardize(id, x), cond, schedule_);
                const Eigen::VectorXd xhat = destandardize(id, ddim_decode(nm.net, z, cond, schedule_));
                const double err = (xhat - x).cwiseAbs().maxCoeff();
                s.mean_abs += err;
                s.max_abs = std::max(s.max_abs, err);
                ++s.count;
            }
        s.mean_abs /= std::max(1, s.count);
        out[id] = s;
    }
    return out;
}

std::map<int, double> CausalDiffusionModel::abduction_backdoor_correlation(
    const PanelDataset& dataset) const {
    require_fitted();
    std::map<int, double> out;
    const int units = dataset.n * dataset.J;
    for (const auto& [id, nm] : node_models_) {
        const int d = graph_.node(id).dim;
        Eigen::MatrixXd Z(units, d);
        Eigen::MatrixXd C(units, nm.net.cond_dim());
        int u = 0;
        for (int i = 0; i < dataset.n; ++i)
            for (int j = 0; j < dataset.J; ++j, ++u) {
                Record vals;
                for (const int c : nm.cond) vals[c] = dataset.value(i, j, c);
                const Eigen::VectorXd cond = gather_cond(nm.cond, vals);
                Z.row(u) = ddim_encode(nm.net, standardize(id, dataset.value(i, j, id)), cond, schedule_)
                               .transpose();
                C.row(u) = cond.transpose();
            }
        double worst = 0.0;
        for (Eigen::Index a = 0; a < Z.cols(); ++a)
            for (Eigen::Index b = 0; b < C.cols(); ++b) {
                const Eigen::ArrayXd za = Z.col(a).array() - Z.col(a).mean();
                const Eigen::ArrayXd cb = C.col(b).array() - C.col(b).mean();
                const double denom = std::sqrt(za.square().sum() * cb.square().sum());
                if (denom > 1e-12) worst = std::max(worst, std::abs((za * cb).sum() / denom));
            }
        out[id] = worst;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization
// ---------------------------------------------------------------------------

namespace {
std::vector<double> to_vec(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}
Eigen::VectorXd from_vec(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
} // namespace

nlohmann::json CausalDiffusionModel::to_json() const {
    require_fitted();
    nlohmann::json j;
    j["format"] = "diffscm-checkpoint";
    j["version"] = 1;
    j["library"] = "diffscm 0.1.0";
    j["seed"] = seed_;
    j["mode"] = to_string(mode_);
    j["graph"] = graph_.to_json();
    j["hyper"] = {{"T", hyper_.T},
                  {"beta_min", hyper_.beta_min},
                  {"beta_max", hyper_.beta_max},
                  {"hidden", hyper_.hidden},
                  {"embed_dim", hyper_.embed_dim},
                  {"lr", hyper_.lr},
                  {"adam_beta1", hyper_.adam_beta1},
                  {"adam_beta2", hyper_.adam_beta2},
                  {"adam_eps", hyper_.adam_eps},
                  {"epochs", hyper_.epochs},
                  {"batch", hyper_.batch}};
    j["stats"] = nlohmann::json::array();
    for (const auto& [id, st] : stats_)
        j["stats"].push_back({{"id", id}, {"mean", to_vec(st.mean)}, {"sd", to_vec(st.sd)}});
    j["nodes"] = nlohmann::json::array();
    for (const auto& [id, nm] : node_models_)
        j["nodes"].push_back({{"id", id},
                              {"cond", nm.cond},
                              {"hidden", nm.net.hidden()},
                              {"embed_dim", nm.net.embed_dim()},
                              {"params", to_vec(nm.net.params())},
                              {"final_loss", nm.final_loss}});
    j["roots"] = nlohmann::json::array();
    for (const auto& [id, rows] : root_empirical_) {
        nlohmann::json jr;
        jr["id"] = id;
        jr["samples"] = nlohmann::json::array();
        for (const auto& r : rows) jr["samples"].push_back(to_vec(r));
        j["roots"].push_back(std::move(jr));
    }
    return j;
}

CausalDiffusionModel CausalDiffusionModel::from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "diffscm-checkpoint")
            throw ParseError("not a checkpoint file");
        CausalGraph graph = CausalGraph::from_json(j.at("graph"));
        const ConditioningMode mode = conditioning_mode_from_string(j.at("mode").get<std::string>());
        FitHyper hyper;
        const auto& jh = j.at("hyper");
        hyper.T = jh.at("T").get<int>();
        hyper.beta_min = jh.at("beta_min").get<double>();
        hyper.beta_max = jh.at("beta_max").get<double>();
        hyper.hidden = jh.at("hidden").get<std::vector<int>>();
        hyper.embed_dim = jh.at("embed_dim").get<int>();
        hyper.lr = jh.at("lr").get<double>();
        hyper.adam_beta1 = jh.at("adam_beta1").get<double>();
        hyper.adam_beta2 = jh.at("adam_beta2").get<double>();
        hyper.adam_eps = jh.at("adam_eps").get<double>();
        hyper.epochs = jh.at("epochs").get<int>();
        hyper.batch = jh.at("batch").get<int>();
        NoiseSchedule schedule = linear_schedule(hyper.T, hyper.beta_min, hyper.beta_max);

        std::map<int, Standardization> stats;
        for (const auto& js : j.at("stats")) {
            Standardization st;
            st.mean = from_vec(js.at("mean").get<std::vector<double>>());
            st.sd = from_vec(js.at("sd").get<std::vector<double>>());
            stats[js.at("id").get<int>()] = std::move(st);
        }
        std::map<int, NodeModel> nodes;
        for (const auto& jn : j.at("nodes")) {
            NodeModel nm;
            const int id = jn.at("id").get<int>();
            nm.cond = jn.at("cond").get<std::vector<int>>();
            int cond_dim = 0;
            for (const int c : nm.cond) cond_dim += graph.node(c).dim;
            nm.net = DenoiserNet(graph.node(id).dim, cond_dim, jn.at("embed_dim").get<int>(),
                                 jn.at("hidden").get<std::vector<int>>());
            const auto params = jn.at("params").get<std::vector<double>>();
            if (static_cast<int>(params.size()) != nm.net.param_count())
                throw ParseError("checkpoint field nodes[].params: wrong length for node " +
                                 std::to_string(id));
            nm.net.params() = from_vec(params);
            nm.final_loss = jn.value("final_loss", 0.0);
            nodes[id] = std::move(nm);
        }
        std::map<int, std::vector<Eigen::VectorXd>> roots;
        for (const auto& jr : j.at("roots")) {
            std::vector<Eigen::VectorXd> rows;
            for (const auto& r : jr.at("samples"))
                rows.push_back(from_vec(r.get<std::vector<double>>()));
            roots[jr.at("id").get<int>()] = std::move(rows);
        }
        return CausalDiffusionModel(std::move(graph), mode, std::move(schedule), std::move(hyper),
                                    std::move(nodes), std::move(roots), std::move(stats),
                                    j.value("seed", std::uint64_t{0}));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
}

void CausalDiffusionModel::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << to_json().dump() << "\n";
}

CausalDiffusionModel CausalDiffusionModel::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return from_json(j);
}

} // namespace diffscm
