#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "netfunnel/graph.hpp"

namespace netfunnel {

/// Time-sampled record of a closed-loop run. Column layout is fixed by the
/// sorted agent and edge lists; inactive entries hold NaN and a cleared
/// active flag. `coupling` (Gamma_i u_i) and `gamma_inv_norm` are in-memory
/// extras that do not appear in the CSV serialization.
struct TrajectoryLog {
    int m = 1;
    std::vector<NodeId> agents;            // sorted, all agents ever declared
    std::map<NodeId, int> internal_dims;   // n_i
    std::vector<EdgeKey> edges;            // sorted union of all edges ever active

    std::vector<double> times;
    std::vector<double> y;          // rows x (N*m)
    std::vector<double> z;          // rows x sum(n_i)
    std::vector<double> u;          // rows x (N*m)
    std::vector<double> coupling;   // rows x (N*m)
    std::vector<double> ratio;      // rows x (E*m)
    std::vector<double> psi;        // rows x (E*m)
    std::vector<double> gamma_inv_norm;   // rows x N
    std::vector<std::uint8_t> agent_active;  // rows x N
    std::vector<std::uint8_t> edge_active;   // rows x E

    struct EventMarker {
        double t;
        std::string kind;  // "join" | "leave"
        NodeId node;
    };
    std::vector<EventMarker> events;

    struct Segment {
        double t_begin, t_end;
        std::vector<std::vector<NodeId>> components;
    };
    std::vector<Segment> segments;

    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t rows() const { return times.size(); }
    [[nodiscard]] int agent_count() const { return static_cast<int>(agents.size()); }
    [[nodiscard]] int edge_count() const { return static_cast<int>(edges.size()); }
    [[nodiscard]] int agent_index(NodeId id) const;
    [[nodiscard]] int edge_index(const EdgeKey& e) const;
    [[nodiscard]] int z_width() const;
    [[nodiscard]] int z_offset(int agent_idx) const;  // into a z row

    [[nodiscard]] double y_at(std::size_t row, int agent_idx, int p) const {
        return y[row * static_cast<std::size_t>(agent_count() * m) +
                 static_cast<std::size_t>(agent_idx * m + p)];
    }
    [[nodiscard]] double u_at(std::size_t row, int agent_idx, int p) const {
        return u[row * static_cast<std::size_t>(agent_count() * m) +
                 static_cast<std::size_t>(agent_idx * m + p)];
    }
    [[nodiscard]] double z_at(std::size_t row, int agent_idx, int k) const {
        return z[row * static_cast<std::size_t>(z_width()) +
                 static_cast<std::size_t>(z_offset(agent_idx) + k)];
    }
    [[nodiscard]] double ratio_at(std::size_t row, int edge_idx, int p) const {
        return ratio[row * static_cast<std::size_t>(edge_count() * m) +
                     static_cast<std::size_t>(edge_idx * m + p)];
    }
    [[nodiscard]] double psi_at(std::size_t row, int edge_idx, int p) const {
        return psi[row * static_cast<std::size_t>(edge_count() * m) +
                   static_cast<std::size_t>(edge_idx * m + p)];
    }
    [[nodiscard]] bool is_agent_active(std::size_t row, int agent_idx) const {
        return agent_active[row * static_cast<std::size_t>(agent_count()) +
                            static_cast<std::size_t>(agent_idx)] != 0;
    }
    [[nodiscard]] bool is_edge_active(std::size_t row, int edge_idx) const {
        return edge_active[row * static_cast<std::size_t>(edge_count()) +
                           static_cast<std::size_t>(edge_idx)] != 0;
    }

    /// 17-significant-digit CSV with header
    /// t,y{i}_{p},z{i}_{k},u{i}_{p},ratio_{i}_{j}_{p},psi_{i}_{j}_{p}.
    /// Inactive cells are empty. Byte-stable for identical logs.
    void write_csv(const std::string& path) const;

    /// Inverse of write_csv for the serialized subset; segment and coupling
    /// data must be reconstructed by the caller. Throws SchemaMismatch.
    static TrajectoryLog read_csv(const std::string& path);
};

}  // namespace netfunnel
