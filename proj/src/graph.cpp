#include "diffscm/graph.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

namespace diffscm {

std::string to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::Root: return "root";
        case NodeKind::Endogenous: return "endogenous";
        case NodeKind::UnobservedExplanatory: return "unobserved-explanatory";
        case NodeKind::UnobservedExplained: return "unobserved-explained";
        case NodeKind::FunctionalCoefficient: return "functional-coefficient";
    }
    return "root";
}

NodeKind node_kind_from_string(const std::string& s) {
    if (s == "root") return NodeKind::Root;
    if (s == "endogenous") return NodeKind::Endogenous;
    if (s == "unobserved-explanatory") return NodeKind::UnobservedExplanatory;
    if (s == "unobserved-explained") return NodeKind::UnobservedExplained;
    if (s == "functional-coefficient") return NodeKind::FunctionalCoefficient;
    throw ParseError("unknown node kind: " + s);
}

CausalGraph::CausalGraph(std::vector<NodeSpec> nodes, std::vector<std::pair<int, int>> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    const int k = node_count();
    if (k > 64) throw InvalidSize("graphs are limited to 64 nodes, got " + std::to_string(k));
    std::vector<bool> seen(static_cast<std::size_t>(k) + 1, false);
    for (const auto& n : nodes_) {
        if (n.id < 1 || n.id > k || seen[static_cast<std::size_t>(n.id)])
            throw UnknownNode("node ids must be unique, contiguous 1.." + std::to_string(k));
        seen[static_cast<std::size_t>(n.id)] = true;
    }
    std::sort(nodes_.begin(), nodes_.end(),
              [](const NodeSpec& a, const NodeSpec& b) { return a.id < b.id; });
    children_mask_.assign(static_cast<std::size_t>(k), 0);
    parents_mask_.assign(static_cast<std::size_t>(k), 0);
    for (const auto& [u, v] : edges_) {
        if (u < 1 || u > k || v < 1 || v > k)
            throw UnknownNode("edge (" + std::to_string(u) + "," + std::to_string(v) +
                              ") references an undeclared node");
        if (children_mask_[static_cast<std::size_t>(u - 1)] & (1ULL << (v - 1)))
            throw DuplicateEdge("duplicate edge (" + std::to_string(u) + "," + std::to_string(v) + ")");
        children_mask_[static_cast<std::size_t>(u - 1)] |= 1ULL << (v - 1);
        parents_mask_[static_cast<std::size_t>(v - 1)] |= 1ULL << (u - 1);
    }
}

void CausalGraph::check_id(int id) const {
    if (id < 1 || id > node_count())
        throw UnknownNode("node " + std::to_string(id) + " does not exist");
}

const NodeSpec& CausalGraph::node(int id) const {
    check_id(id);
    return nodes_[static_cast<std::size_t>(id - 1)];
}

bool CausalGraph::has_edge(int u, int v) const {
    check_id(u);
    check_id(v);
    return children_mask_[static_cast<std::size_t>(u - 1)] & (1ULL << (v - 1));
}

namespace {
std::vector<int> mask_to_ids(std::uint64_t mask) {
    std::vector<int> out;
    for (int id = 1; mask; ++id, mask >>= 1)
        if (mask & 1ULL) out.push_back(id);
    return out;
}
} // namespace

std::vector<int> CausalGraph::parents(int id) const {
    check_id(id);
    return mask_to_ids(parents_mask_[static_cast<std::size_t>(id - 1)]);
}

std::vector<int> CausalGraph::children(int id) const {
    check_id(id);
    return mask_to_ids(children_mask_[static_cast<std::size_t>(id - 1)]);
}

std::vector<int> CausalGraph::observed_parents(int id) const {
    std::vector<int> out;
    for (const int p : parents(id))
        if (node(p).observed) out.push_back(p);
    return out;
}

void validate_dag(const CausalGraph& graph) {
    // Kahn's algorithm; on failure, walk the residual graph to report a cycle.
    const int k = graph.node_count();
    std::vector<int> indeg(static_cast<std::size_t>(k) + 1, 0);
    for (const auto& [u, v] : graph.edges()) indeg[static_cast<std::size_t>(v)]++;
    std::set<int> ready;
    for (int id = 1; id <= k; ++id)
        if (indeg[static_cast<std::size_t>(id)] == 0) ready.insert(id);
    int emitted = 0;
    while (!ready.empty()) {
        const int id = *ready.begin();
        ready.erase(ready.begin());
        ++emitted;
        for (const int c : graph.children(id))
            if (--indeg[static_cast<std::size_t>(c)] == 0) ready.insert(c);
    }
    if (emitted == k) return;
    // Some node with indeg > 0 lies on or downstream of a cycle; follow
    // parents with positive residual in-degree until a node repeats.
    int start = 0;
    for (int id = 1; id <= k; ++id)
        if (indeg[static_cast<std::size_t>(id)] > 0) { start = id; break; }
    std::vector<int> trail;
    std::vector<int> pos(static_cast<std::size_t>(k) + 1, -1);
    int cur = start;
    while (pos[static_cast<std::size_t>(cur)] < 0) {
        pos[static_cast<std::size_t>(cur)] = static_cast<int>(trail.size());
        trail.push_back(cur);
        for (const int p : graph.parents(cur))
            if (indeg[static_cast<std::size_t>(p)] > 0) { cur = p; break; }
    }
    std::ostringstream msg;
    msg << "cycle detected: ";
    for (std::size_t i = static_cast<std::size_t>(pos[static_cast<std::size_t>(cur)]); i < trail.size(); ++i)
        msg << trail[i] << " <- ";
    msg << cur;
    throw CycleDetected(msg.str());
}

std::vector<int> CausalGraph::topological_order() const {
    const int k = node_count();
    std::vector<int> indeg(static_cast<std::size_t>(k) + 1, 0);
    for (const auto& [u, v] : edges_) {
        (void)u;
        indeg[static_cast<std::size_t>(v)]++;
    }
    std::set<int> ready; // ordered set gives ascending-id tie break
    for (int id = 1; id <= k; ++id)
        if (indeg[static_cast<std::size_t>(id)] == 0) ready.insert(id);
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(k));
    while (!ready.empty()) {
        const int id = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(id);
        for (const int c : children(id))
            if (--indeg[static_cast<std::size_t>(c)] == 0) ready.insert(c);
    }
    if (static_cast<int>(order.size()) != k) validate_dag(*this); // throws CycleDetected
    return order;
}

std::vector<int> CausalGraph::descendants(int id) const {
    check_id(id);
    std::uint64_t frontier = children_mask_[static_cast<std::size_t>(id - 1)];
    std::uint64_t closure = 0;
    while (frontier) {
        closure |= frontier;
        std::uint64_t next = 0;
        std::uint64_t f = frontier;
        for (int v = 1; f; ++v, f >>= 1)
            if (f & 1ULL) next |= children_mask_[static_cast<std::size_t>(v - 1)];
        frontier = next & ~closure;
    }
    return mask_to_ids(closure & ~(1ULL << (id - 1)));
}

bool CausalGraph::backdoor_check(int cause, int outcome, const std::vector<int>& candidate) const {
    check_id(cause);
    check_id(outcome);
    if (cause == outcome)
        throw UnknownNode("backdoor_check requires cause != outcome");
    std::uint64_t cond = 0;
    for (const int b : candidate) {
        check_id(b);
        cond |= 1ULL << (b - 1);
    }
    // (a) no candidate node may be a descendant of the cause
    std::uint64_t desc = 0;
    for (const int d : descendants(cause)) desc |= 1ULL << (d - 1);
    if (cond & desc) return false;

    // (b) with the edges out of `cause` removed, every remaining path from
    // cause starts with an arrow into it; require d-separation given the
    // candidate set on that reduced graph (Bayes-ball reachability).
    const std::size_t k = static_cast<std::size_t>(node_count());
    std::vector<std::uint64_t> ch(children_mask_), pa(parents_mask_);
    for (std::size_t v = 0; v < k; ++v) pa[v] &= ~(1ULL << (cause - 1));
    ch[static_cast<std::size_t>(cause - 1)] = 0;

    // ancestors of the conditioning set (including it) in the reduced graph
    std::uint64_t anc = cond;
    std::uint64_t frontier = cond;
    while (frontier) {
        std::uint64_t next = 0;
        std::uint64_t f = frontier;
        for (int v = 1; f; ++v, f >>= 1)
            if (f & 1ULL) next |= pa[static_cast<std::size_t>(v - 1)];
        frontier = next & ~anc;
        anc |= next;
    }

    // reachability over (node, approach-direction) states
    enum { FromChild = 0, FromParent = 1 };
    std::vector<std::array<bool, 2>> visited(k, {false, false});
    std::queue<std::pair<int, int>> q;
    q.emplace(cause, FromChild); // leaving the source acts like arriving from a child
    visited[static_cast<std::size_t>(cause - 1)][FromChild] = true;
    while (!q.empty()) {
        const auto [v, dir] = q.front();
        q.pop();
        if (v == outcome) return false; // active backdoor path found
        const bool in_cond = cond & (1ULL << (v - 1));
        const auto push = [&](std::uint64_t mask, int d) {
            for (int w = 1; mask; ++w, mask >>= 1)
                if ((mask & 1ULL) && !visited[static_cast<std::size_t>(w - 1)][static_cast<std::size_t>(d)]) {
                    visited[static_cast<std::size_t>(w - 1)][static_cast<std::size_t>(d)] = true;
                    q.emplace(w, d);
                }
        };
        if (dir == FromChild) {
            if (!in_cond) {
                push(pa[static_cast<std::size_t>(v - 1)], FromChild);
                push(ch[static_cast<std::size_t>(v - 1)], FromParent);
            }
        } else { // arrived from a parent
            if (!in_cond) push(ch[static_cast<std::size_t>(v - 1)], FromParent);
            if (anc & (1ULL << (v - 1))) push(pa[static_cast<std::size_t>(v - 1)], FromChild);
        }
    }
    return true;
}

std::vector<BackdoorFailure> CausalGraph::validate_backdoor_sets(const std::vector<int>& causes,
                                                                 const std::vector<int>& outcomes) const {
    std::vector<BackdoorFailure> failures;
    for (const auto& n : nodes_) {
        const auto desc = descendants(n.id);
        for (const int b : n.backdoor)
            if (std::find(desc.begin(), desc.end(), b) != desc.end())
                failures.push_back({n.id, b, "backdoor set contains a descendant of the node"});
        if (n.kind == NodeKind::Endogenous && n.observed) {
            // observed parents must be part of the recorded adjustment set;
            // latent parents cannot be conditioned on and are exempt
            for (const int p : observed_parents(n.id))
                if (std::find(n.backdoor.begin(), n.backdoor.end(), p) == n.backdoor.end())
                    failures.push_back({n.id, p, "observed parent missing from the backdoor set"});
        }
    }
    for (const int c : causes) {
        const auto& bset = node(c).backdoor;
        const auto desc = descendants(c);
        for (const int o : outcomes) {
            if (o == c) continue;
            if (std::find(desc.begin(), desc.end(), o) == desc.end()) continue;
            if (std::find(bset.begin(), bset.end(), o) != bset.end()) continue;
            if (!backdoor_check(c, o, bset))
                failures.push_back({c, o, "recorded set does not satisfy the backdoor criterion"});
        }
    }
    return failures;
}

nlohmann::json CausalGraph::to_json() const {
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : nodes_) {
        j["nodes"].push_back({{"id", n.id},
                              {"dim", n.dim},
                              {"kind", to_string(n.kind)},
                              {"backdoor", n.backdoor},
                              {"observed", n.observed}});
    }
    j["edges"] = nlohmann::json::array();
    for (const auto& [u, v] : edges_) j["edges"].push_back({u, v});
    return j;
}

CausalGraph CausalGraph::from_json(const nlohmann::json& j) {
    std::vector<NodeSpec> nodes;
    for (const auto& jn : j.at("nodes")) {
        NodeSpec n;
        n.id = jn.at("id").get<int>();
        n.dim = jn.value("dim", 1);
        n.kind = node_kind_from_string(jn.value("kind", std::string("root")));
        n.backdoor = jn.value("backdoor", std::vector<int>{});
        n.observed = jn.value("observed", true);
        nodes.push_back(std::move(n));
    }
    std::vector<std::pair<int, int>> edges;
    for (const auto& je : j.at("edges"))
        edges.emplace_back(je.at(0).get<int>(), je.at(1).get<int>());
    CausalGraph g(std::move(nodes), std::move(edges));
    validate_dag(g);
    return g;
}

void CausalGraph::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << to_json().dump(2) << "\n";
}

CausalGraph CausalGraph::load_file(const std::string& path) {
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
