#pragma once

#include <compare>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "netfunnel/errors.hpp"

namespace netfunnel {

using NodeId = int;

/// Directed edge: `from` sends information to `to`.
struct DirectedEdge {
    NodeId from = -1;
    NodeId to = -1;
    auto operator<=>(const DirectedEdge&) const = default;
};

/// Undirected edge key, normalized so that a <= b.
struct EdgeKey {
    NodeId a = -1;
    NodeId b = -1;
    EdgeKey() = default;
    EdgeKey(NodeId i, NodeId j) : a(i < j ? i : j), b(i < j ? j : i) {}
    auto operator<=>(const EdgeKey&) const = default;
    [[nodiscard]] std::string str() const { return std::to_string(a) + "-" + std::to_string(b); }
};

/// Finite directed graph without self-edges. Immutable after construction.
class DirectedGraph {
public:
    DirectedGraph() = default;
    DirectedGraph(std::vector<NodeId> nodes, std::vector<DirectedEdge> edges);

    [[nodiscard]] const std::vector<NodeId>& nodes() const { return nodes_; }
    [[nodiscard]] const std::vector<DirectedEdge>& edges() const { return edges_; }
    [[nodiscard]] bool has_node(NodeId n) const;
    [[nodiscard]] int node_index(NodeId n) const;

    /// Nodes j with an edge (j, n): the senders feeding n.
    [[nodiscard]] const std::vector<NodeId>& in_neighbors(NodeId n) const;
    /// Nodes i with an edge (n, i).
    [[nodiscard]] const std::vector<NodeId>& out_neighbors(NodeId n) const;
    [[nodiscard]] int out_degree(NodeId n) const;
    [[nodiscard]] int in_degree(NodeId n) const;

private:
    std::vector<NodeId> nodes_;
    std::vector<DirectedEdge> edges_;
    std::map<NodeId, std::vector<NodeId>> in_adj_, out_adj_;
};

/// Undirected communication graph; no self-edges. Immutable after
/// construction. Every edge has a stable index usable as an attribute slot
/// by the network layers built on top.
class UndirectedNetwork {
public:
    UndirectedNetwork() = default;
    UndirectedNetwork(std::vector<NodeId> nodes, std::vector<EdgeKey> edges);

    [[nodiscard]] const std::vector<NodeId>& nodes() const { return nodes_; }
    [[nodiscard]] const std::vector<EdgeKey>& edges() const { return edges_; }
    [[nodiscard]] bool has_node(NodeId n) const;
    [[nodiscard]] bool has_edge(NodeId i, NodeId j) const;
    [[nodiscard]] int edge_index(NodeId i, NodeId j) const;
    [[nodiscard]] const std::vector<NodeId>& neighbors(NodeId n) const;

    /// Both directions of every undirected edge, per the convention that an
    /// undirected graph is a directed graph closed under edge reversal.
    [[nodiscard]] DirectedGraph as_directed() const;

private:
    std::vector<NodeId> nodes_;
    std::vector<EdgeKey> edges_;
    std::map<EdgeKey, int> edge_index_;
    std::map<NodeId, std::vector<NodeId>> adj_;
};

/// Layer potential: chi[j] - chi[i] >= 1 for every edge (j, i); sources sit
/// at chi = 0.
using PotentialVector = std::map<NodeId, int>;

/// Positive edge weights with flow conservation at interior nodes.
/// `exact` holds reduced fractions "num/den" when computed in rational mode
/// (node count <= 64); `weight` is always populated.
struct FlowWeights {
    std::map<std::pair<NodeId, NodeId>, double> weight;       // (from,to) -> xi
    std::map<std::pair<NodeId, NodeId>, std::string> exact;   // (from,to) -> "num/den"
    bool exact_mode = false;
};

[[nodiscard]] bool is_connected(const UndirectedNetwork& g);
[[nodiscard]] std::vector<std::vector<NodeId>> connected_components(const UndirectedNetwork& g);

/// Graph diameter d_G: the maximum length among shortest paths.
/// Throws DisconnectedGraph.
[[nodiscard]] int diameter(const UndirectedNetwork& g);

/// True iff an elementary path with equal endpoints exists. A pair
/// {(i,j),(j,i)} counts as the loop (i,j,i).
[[nodiscard]] bool has_loop(const DirectedGraph& g);

/// Layering construction: chi_i := -k where k is the maximal path length
/// from any source to i. Throws LoopDetected.
[[nodiscard]] PotentialVector compute_potential(const DirectedGraph& g);

/// Flow construction: each source emits flow 1 split evenly over its
/// outgoing edges; interior nodes split their incoming flow evenly.
/// Throws LoopDetected, EmptyEdgeSet.
[[nodiscard]] FlowWeights compute_flow_weights(const DirectedGraph& g);

/// |LHS - RHS| of the telescoping identity
///   sum_E xi_ij (sigma_j - sigma_i)
///     = sum_{E_up} xi_ij sigma_j - sum_{E_down} xi_ij sigma_i.
/// `sigma` is aligned with g.nodes(). Throws DimensionMismatch.
[[nodiscard]] double flow_identity_residual(const DirectedGraph& g, const FlowWeights& w,
                                            std::span<const double> sigma);

/// Sources have no incoming edge, sinks no outgoing edge; isolated nodes are
/// classified as sources.
[[nodiscard]] std::pair<std::set<NodeId>, std::set<NodeId>> sources_and_sinks(
    const DirectedGraph& g);

}  // namespace netfunnel
