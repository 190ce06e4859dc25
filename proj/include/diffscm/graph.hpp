#ifndef DIFFSCM_GRAPH_HPP
#define DIFFSCM_GRAPH_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "diffscm/errors.hpp"

namespace diffscm {

enum class NodeKind {
    Root,
    Endogenous,
    UnobservedExplanatory,
    UnobservedExplained,
    FunctionalCoefficient,
};

std::string to_string(NodeKind kind);
NodeKind node_kind_from_string(const std::string& s);

struct NodeSpec {
    int id = 0;                  // 1-based, contiguous
    int dim = 1;
    NodeKind kind = NodeKind::Root;
    std::vector<int> backdoor;   // adjustment set recorded for this node
    bool observed = true;
};

struct BackdoorFailure {
    int cause = 0;
    int outcome = 0;
    std::string reason;
};

/// Directed acyclic graph over nodes 1..K with dense adjacency. Immutable
/// after construction; safe to share across threads.
class CausalGraph {
public:
    CausalGraph() = default;
    CausalGraph(std::vector<NodeSpec> nodes, std::vector<std::pair<int, int>> edges);

    int node_count() const { return static_cast<int>(nodes_.size()); }
    const NodeSpec& node(int id) const;
    const std::vector<NodeSpec>& nodes() const { return nodes_; }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }

    bool has_edge(int u, int v) const;
    std::vector<int> parents(int id) const;
    std::vector<int> children(int id) const;
    std::vector<int> observed_parents(int id) const;
    bool is_root(int id) const { return parents(id).empty(); }

    /// Node ids sorted so parents precede children; ties broken by ascending
    /// id so downstream sampling is reproducible.
    std::vector<int> topological_order() const;

    /// Proper descendants (transitive closure via children, excluding id).
    std::vector<int> descendants(int id) const;

    /// Backdoor criterion for (cause, outcome): no candidate is a descendant
    /// of cause, and the candidate set d-separates cause from outcome once
    /// the edges out of cause are removed.
    bool backdoor_check(int cause, int outcome, const std::vector<int>& candidate) const;

    /// Validates each cause node's recorded backdoor set against every
    /// declared outcome among its descendants. Failures are reported, not
    /// thrown.
    std::vector<BackdoorFailure> validate_backdoor_sets(const std::vector<int>& causes,
                                                        const std::vector<int>& outcomes) const;

    nlohmann::json to_json() const;
    static CausalGraph from_json(const nlohmann::json& j);
    void save_file(const std::string& path) const;
    static CausalGraph load_file(const std::string& path);

private:
    void check_id(int id) const;
    std::vector<NodeSpec> nodes_;
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::uint64_t> children_mask_;
    std::vector<std::uint64_t> parents_mask_;
};

/// Throws CycleDetected (message lists one cycle), UnknownNode, or
/// DuplicateEdge when the declared edges do not form a simple DAG over the
/// declared node ids.
void validate_dag(const CausalGraph& graph);

} // namespace diffscm

#endif
