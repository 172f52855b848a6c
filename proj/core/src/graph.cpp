#include "netfunnel/graph.hpp"

#include <algorithm>
#include <deque>
#include <limits>

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/rational.hpp>

namespace netfunnel {

namespace {
using Rational = boost::rational<boost::multiprecision::cpp_int>;

const std::vector<NodeId> kNoNeighbors{};
}  // namespace

// --- DirectedGraph ------------------------------------------------------

DirectedGraph::DirectedGraph(std::vector<NodeId> nodes, std::vector<DirectedEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    std::sort(nodes_.begin(), nodes_.end());
    nodes_.erase(std::unique(nodes_.begin(), nodes_.end()), nodes_.end());
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    for (const auto& e : edges_) {
        if (e.from == e.to) throw Error("self-edge on node " + std::to_string(e.from));
        if (!has_node(e.from) || !has_node(e.to))
            throw Error("edge endpoint not a declared node: " + std::to_string(e.from) + "->" +
                        std::to_string(e.to));
        out_adj_[e.from].push_back(e.to);
        in_adj_[e.to].push_back(e.from);
    }
}

bool DirectedGraph::has_node(NodeId n) const {
    return std::binary_search(nodes_.begin(), nodes_.end(), n);
}

int DirectedGraph::node_index(NodeId n) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), n);
    if (it == nodes_.end() || *it != n) throw UnknownNode(n);
    return static_cast<int>(it - nodes_.begin());
}

const std::vector<NodeId>& DirectedGraph::in_neighbors(NodeId n) const {
    auto it = in_adj_.find(n);
    return it == in_adj_.end() ? kNoNeighbors : it->second;
}

const std::vector<NodeId>& DirectedGraph::out_neighbors(NodeId n) const {
    auto it = out_adj_.find(n);
    return it == out_adj_.end() ? kNoNeighbors : it->second;
}

int DirectedGraph::out_degree(NodeId n) const {
    return static_cast<int>(out_neighbors(n).size());
}

int DirectedGraph::in_degree(NodeId n) const {
    return static_cast<int>(in_neighbors(n).size());
}

// --- UndirectedNetwork ----------------------------------------------------

UndirectedNetwork::UndirectedNetwork(std::vector<NodeId> nodes, std::vector<EdgeKey> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    std::sort(nodes_.begin(), nodes_.end());
    nodes_.erase(std::unique(nodes_.begin(), nodes_.end()), nodes_.end());
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    for (std::size_t k = 0; k < edges_.size(); ++k) {
        const auto& e = edges_[k];
        if (e.a == e.b) throw Error("self-edge on node " + std::to_string(e.a));
        if (!has_node(e.a) || !has_node(e.b))
            throw Error("edge endpoint not a declared node: " + e.str());
        edge_index_[e] = static_cast<int>(k);
        adj_[e.a].push_back(e.b);
        adj_[e.b].push_back(e.a);
    }
    for (auto& [n, nb] : adj_) std::sort(nb.begin(), nb.end());
}

bool UndirectedNetwork::has_node(NodeId n) const {
    return std::binary_search(nodes_.begin(), nodes_.end(), n);
}

bool UndirectedNetwork::has_edge(NodeId i, NodeId j) const {
    return edge_index_.count(EdgeKey(i, j)) > 0;
}

int UndirectedNetwork::edge_index(NodeId i, NodeId j) const {
    auto it = edge_index_.find(EdgeKey(i, j));
    if (it == edge_index_.end()) throw Error("no edge " + EdgeKey(i, j).str());
    return it->second;
}

const std::vector<NodeId>& UndirectedNetwork::neighbors(NodeId n) const {
    auto it = adj_.find(n);
    return it == adj_.end() ? kNoNeighbors : it->second;
}

DirectedGraph UndirectedNetwork::as_directed() const {
    std::vector<DirectedEdge> de;
    de.reserve(2 * edges_.size());
    for (const auto& e : edges_) {
        de.push_back({e.a, e.b});
        de.push_back({e.b, e.a});
    }
    return DirectedGraph(nodes_, std::move(de));
}

// --- connectivity ---------------------------------------------------------

std::vector<std::vector<NodeId>> connected_components(const UndirectedNetwork& g) {
    std::vector<std::vector<NodeId>> parts;
    std::set<NodeId> seen;
    for (NodeId start : g.nodes()) {
        if (seen.count(start)) continue;
        std::vector<NodeId> part;
        std::deque<NodeId> queue{start};
        seen.insert(start);
        while (!queue.empty()) {
            NodeId n = queue.front();
            queue.pop_front();
            part.push_back(n);
            for (NodeId nb : g.neighbors(n))
                if (seen.insert(nb).second) queue.push_back(nb);
        }
        std::sort(part.begin(), part.end());
        parts.push_back(std::move(part));
    }
    return parts;
}

bool is_connected(const UndirectedNetwork& g) {
    if (g.nodes().empty()) throw Error("is_connected requires at least one node");
    return connected_components(g).size() == 1;
}

namespace {
// Single-source BFS distances; unreachable nodes keep -1.
std::map<NodeId, int> bfs_distances(const UndirectedNetwork& g, NodeId start) {
    std::map<NodeId, int> dist;
    dist[start] = 0;
    std::deque<NodeId> queue{start};
    while (!queue.empty()) {
        NodeId n = queue.front();
        queue.pop_front();
        for (NodeId nb : g.neighbors(n)) {
            if (!dist.count(nb)) {
                dist[nb] = dist[n] + 1;
                queue.push_back(nb);
            }
        }
    }
    return dist;
}
}  // namespace

int diameter(const UndirectedNetwork& g) {
    if (!is_connected(g)) throw DisconnectedGraph("diameter requires a connected graph");
    int d = 0;
    for (NodeId n : g.nodes()) {
        auto dist = bfs_distances(g, n);
        for (const auto& [node, len] : dist) d = std::max(d, len);
    }
    return d;
}

// --- loops and layering -----------------------------------------------------

namespace {
enum class Color { White, Gray, Black };

bool dfs_finds_cycle(const DirectedGraph& g, NodeId n, std::map<NodeId, Color>& color) {
    color[n] = Color::Gray;
    for (NodeId nb : g.out_neighbors(n)) {
        if (color[nb] == Color::Gray) return true;
        if (color[nb] == Color::White && dfs_finds_cycle(g, nb, color)) return true;
    }
    color[n] = Color::Black;
    return false;
}
}  // namespace

bool has_loop(const DirectedGraph& g) {
    std::map<NodeId, Color> color;
    for (NodeId n : g.nodes()) color[n] = Color::White;
    for (NodeId n : g.nodes())
        if (color[n] == Color::White && dfs_finds_cycle(g, n, color)) return true;
    return false;
}

namespace {
// Longest-path-from-a-source layer per node, via Kahn ordering.
std::map<NodeId, int> layering(const DirectedGraph& g) {
    std::map<NodeId, int> indeg, layer;
    for (NodeId n : g.nodes()) {
        indeg[n] = g.in_degree(n);
        layer[n] = 0;
    }
    std::deque<NodeId> ready;
    for (NodeId n : g.nodes())
        if (indeg[n] == 0) ready.push_back(n);
    std::size_t processed = 0;
    while (!ready.empty()) {
        NodeId n = ready.front();
        ready.pop_front();
        ++processed;
        for (NodeId nb : g.out_neighbors(n)) {
            layer[nb] = std::max(layer[nb], layer[n] + 1);
            if (--indeg[nb] == 0) ready.push_back(nb);
        }
    }
    if (processed != g.nodes().size()) throw LoopDetected("graph has a loop; no layering exists");
    return layer;
}
}  // namespace

PotentialVector compute_potential(const DirectedGraph& g) {
    if (has_loop(g)) throw LoopDetected("graph has a loop; no potential exists");
    PotentialVector chi;
    for (const auto& [n, k] : layering(g)) chi[n] = -k;
    return chi;
}

FlowWeights compute_flow_weights(const DirectedGraph& g) {
    if (g.edges().empty()) throw EmptyEdgeSet("flow weights require a non-empty edge set");
    if (has_loop(g)) throw LoopDetected("graph has a loop; no flow weights exist");

    auto layer = layering(g);
    std::vector<NodeId> order = g.nodes();
    std::sort(order.begin(), order.end(),
              [&](NodeId a, NodeId b) { return layer[a] != layer[b] ? layer[a] < layer[b] : a < b; });

    FlowWeights out;
    out.exact_mode = g.nodes().size() <= 64;

    if (out.exact_mode) {
        std::map<std::pair<NodeId, NodeId>, Rational> xi;
        for (NodeId j : order) {
            int d = g.out_degree(j);
            if (d == 0) continue;
            Rational incoming = 0;
            for (NodeId l : g.in_neighbors(j)) incoming += xi.at({l, j});
            if (g.in_degree(j) == 0) incoming = 1;  // source emits unit flow
            Rational share = incoming / d;
            for (NodeId i : g.out_neighbors(j)) xi[{j, i}] = share;
        }
        for (const auto& [e, r] : xi) {
            out.weight[e] = static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
            out.exact[e] = r.numerator().str() + "/" + r.denominator().str();
        }
    } else {
        std::map<std::pair<NodeId, NodeId>, double> xi;
        for (NodeId j : order) {
            int d = g.out_degree(j);
            if (d == 0) continue;
            double incoming = 0;
            for (NodeId l : g.in_neighbors(j)) incoming += xi.at({l, j});
            if (g.in_degree(j) == 0) incoming = 1;
            double share = incoming / d;
            for (NodeId i : g.out_neighbors(j)) xi[{j, i}] = share;
        }
        out.weight = std::move(xi);
    }
    return out;
}

double flow_identity_residual(const DirectedGraph& g, const FlowWeights& w,
                              std::span<const double> sigma) {
    if (sigma.size() != g.nodes().size())
        throw DimensionMismatch("sigma length " + std::to_string(sigma.size()) +
                                " != node count " + std::to_string(g.nodes().size()));
    auto sig = [&](NodeId n) { return sigma[static_cast<std::size_t>(g.node_index(n))]; };

    auto [sources, sinks] = sources_and_sinks(g);
    double lhs = 0, rhs = 0;
    for (const auto& e : g.edges()) {
        double xi = w.weight.at({e.from, e.to});
        lhs += xi * (sig(e.from) - sig(e.to));
        if (sources.count(e.from)) rhs += xi * sig(e.from);
        if (sinks.count(e.to)) rhs -= xi * sig(e.to);
    }
    return std::abs(lhs - rhs);
}

std::pair<std::set<NodeId>, std::set<NodeId>> sources_and_sinks(const DirectedGraph& g) {
    std::set<NodeId> sources, sinks;
    for (NodeId n : g.nodes()) {
        bool no_in = g.in_degree(n) == 0;
        bool no_out = g.out_degree(n) == 0;
        if (no_in && no_out) {
            sources.insert(n);  // isolated node counts as a source
        } else {
            if (no_in) sources.insert(n);
            if (no_out) sinks.insert(n);
        }
    }
    return {sources, sinks};
}

}  // namespace netfunnel
