#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "netfunnel/expr.hpp"
#include "netfunnel/funnel.hpp"
#include "netfunnel/graph.hpp"

namespace netfunnel {

/// Relative-degree-one agent
///   y' = F(t, y, z) + Gamma(t, w) u,   z' = Z(t, z, y),   w = W(y, z)
/// with expressions over the variables t, y1..ym, z1..zn, w1..wk.
struct AgentModel {
    int m = 1;   // output dimension, shared network-wide
    int n = 0;   // internal dimension
    int mi = 0;  // introspective dimension

    std::vector<Expr> F;                // m expressions over (t, y, z)
    std::vector<Expr> Z;                // n expressions over (t, z, y)
    std::vector<Expr> W;                // mi expressions over (y, z)
    std::vector<std::vector<Expr>> Gamma;  // m x m expressions over (t, w)
    double M_Gamma = 0.0;               // declared sup ||Gamma^-1||_inf; 0 = undeclared
    std::vector<double> y0, z0;

    /// Validates dimensions and compiles all expressions. Must be called
    /// before the model is evaluated.
    void finalize();

    [[nodiscard]] bool finalized() const { return !Fc.empty() || m == 0; }

    std::vector<CompiledExpr> Fc, Zc, Wc;
    std::vector<CompiledExpr> Gc;  // row-major m*m
};

/// True iff the internal dynamics are structurally identical: same n and
/// equal Z expression trees.
[[nodiscard]] bool same_internal_dynamics(const AgentModel& a, const AgentModel& b);

struct AgentState {
    std::vector<double> y, z;
};
using NetworkState = std::map<NodeId, AgentState>;

struct NetworkModel {
    std::map<NodeId, AgentModel> agents;
    UndirectedNetwork graph;
    std::map<EdgeKey, EdgeFunnel> funnels;
    int m = 1;

    /// Checks graph nodes == agent keys, shared m, and a funnel of matching
    /// dimension on every edge.
    void validate() const;
};

/// Inverse of a gain matrix plus its induced infinity norm.
struct GainInverse {
    std::vector<double> inv;  // row-major m x m
    double inf_norm = 0.0;
};

/// Throws SingularGain when the matrix is singular or the condition estimate
/// ||G|| * ||G^-1|| exceeds 1e12.
[[nodiscard]] GainInverse invert_gain(std::span<const double> gamma_row_major, int m);

/// Scratch buffers for allocation-free right-hand-side evaluation; owned by
/// the caller (one per thread).
struct EvalWorkspace {
    std::vector<double> slots, wslots, gslots, gamma, gamma_inv, mu_buf;
    std::vector<long double> acc;
};

struct RhsDiagnostics {
    std::map<NodeId, std::vector<double>> u;         // u_i = Gamma^-1 sum_j u_ij
    std::map<NodeId, std::vector<double>> coupling;  // Gamma_i u_i
    std::map<NodeId, double> gamma_inv_norm;
    double max_abs_ratio = 0.0;
};

/// Closed-loop right-hand side of the whole network at one instant. Strict:
/// any ratio with |nu/psi| >= 1 raises RatioOutOfFunnel.
[[nodiscard]] NetworkState eval_rhs(const NetworkModel& model, double t,
                                    const NetworkState& state, RhsDiagnostics* diag = nullptr);

/// A connected set of agents packed into one flat state vector
/// [y_i (m), z_i (n_i)] per agent in sorted id order. This is the evaluation
/// core shared by eval_rhs and the integrator.
class PackedComponent {
public:
    PackedComponent(const NetworkModel& model, std::vector<NodeId> agents);

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] int m() const { return m_; }
    [[nodiscard]] const std::vector<NodeId>& agents() const { return agents_; }
    [[nodiscard]] int y_offset(int agent_idx) const { return y_off_[static_cast<std::size_t>(agent_idx)]; }
    [[nodiscard]] int z_offset(int agent_idx) const { return z_off_[static_cast<std::size_t>(agent_idx)]; }
    [[nodiscard]] int internal_dim(int agent_idx) const;

    struct EdgeRef {
        EdgeKey key;
        int ia, ib;  // agent indices, ia < ib; ratio sign follows y_b - y_a
        const EdgeFunnel* funnel;
    };
    [[nodiscard]] const std::vector<EdgeRef>& edge_refs() const { return edges_; }

    struct Diag {
        std::vector<double> u;         // N*m
        std::vector<double> coupling;  // N*m, Gamma_i u_i
        std::vector<double> gamma_inv_norm;  // N
        double max_abs_ratio = 0.0;
    };

    /// clamp=true uses the trial-stage coupling evaluation (ratios clamped to
    /// +-(1 - 1e-12)); clamp=false throws RatioOutOfFunnel at |s| >= 1.
    void rhs(double t, std::span<const double> x, std::span<double> dx, EvalWorkspace& ws,
             bool clamp, Diag* diag = nullptr) const;

    /// max over edges and components of |nu/psi|; also reports the argmax.
    [[nodiscard]] double max_abs_ratio(double t, std::span<const double> x, EdgeKey* arg_edge = nullptr,
                                       int* arg_p = nullptr) const;

    /// Per-edge ratios and psi values in edge_refs() order (m per edge).
    void edge_ratios(double t, std::span<const double> x, std::span<double> ratios,
                     std::span<double> psis) const;

    void pack(const NetworkState& s, std::span<double> x) const;
    void unpack(std::span<const double> x, NetworkState& s) const;

private:
    const NetworkModel* model_;
    std::vector<NodeId> agents_;
    std::vector<const AgentModel*> am_;
    std::vector<int> y_off_, z_off_;
    std::vector<EdgeRef> edges_;
    int dim_ = 0;
    int m_ = 1;
};

/// Per-agent input signal writing m values into `out`.
using InputSignal = std::function<void(double t, std::span<double> out)>;

/// Averaged system [s (m), z_1 (n_1), .., z_N (n_N)]:
///   s' = (1/N) sum_i F_i(t, s + e_i, z_i),   z_i' = Z_i(t, z_i, s + e_i).
/// With all e_i absent (or zero) this is the blended dynamics; with inputs it
/// is the perturbed blended dynamics.
class BlendedModel {
public:
    BlendedModel(const NetworkModel& model, std::vector<NodeId> component,
                 std::vector<InputSignal> inputs);

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] int m() const { return m_; }
    [[nodiscard]] const std::vector<NodeId>& agents() const { return agents_; }
    [[nodiscard]] int z_offset(int agent_idx) const { return z_off_[static_cast<std::size_t>(agent_idx)]; }
    [[nodiscard]] int internal_dim(int agent_idx) const;

    /// e_flat, when non-null, holds N*m stacked per-agent inputs and
    /// overrides the stored signals.
    void rhs(double t, std::span<const double> x, std::span<double> dx, EvalWorkspace& ws,
             const double* e_flat = nullptr) const;

    /// Initial condition convention: s(t0) = mean of y_i(t0), z_i copied.
    [[nodiscard]] std::vector<double> initial_state(const NetworkState& net) const;

private:
    std::vector<NodeId> agents_;
    std::vector<const AgentModel*> am_;
    std::vector<InputSignal> inputs_;
    std::vector<int> z_off_;
    int dim_ = 0;
    int m_ = 1;
};

/// Reduced-order variant [s (m), z (n)] available when all internal dynamics
/// are structurally identical:
///   s' = (1/N) sum_i F_i(t, s + e_i, z + d_i),   z' = Z(t, z, s + e_0).
class ReducedBlendedModel {
public:
    struct Inputs {
        InputSignal e0;                  // m
        std::vector<InputSignal> e;      // per agent, m
        std::vector<InputSignal> d;      // per agent, n
    };

    ReducedBlendedModel(const NetworkModel& model, std::vector<NodeId> component,
                        std::optional<Inputs> inputs);

    [[nodiscard]] int dim() const { return m_ + n_; }
    [[nodiscard]] int m() const { return m_; }
    [[nodiscard]] int n() const { return n_; }
    [[nodiscard]] const std::vector<NodeId>& agents() const { return agents_; }

    void rhs(double t, std::span<const double> x, std::span<double> dx, EvalWorkspace& ws) const;

    /// Convention: s(t0) = mean y_i(t0) and z(t0) = mean z_i(t0).
    [[nodiscard]] std::vector<double> initial_state(const NetworkState& net) const;

private:
    std::vector<NodeId> agents_;
    std::vector<const AgentModel*> am_;
    std::optional<Inputs> inputs_;
    int m_ = 1, n_ = 0;
};

/// Throws DisconnectedComponent if `component` is not connected in
/// model.graph.
[[nodiscard]] BlendedModel build_blended(const NetworkModel& model,
                                         const std::vector<NodeId>& component,
                                         std::vector<InputSignal> inputs = {});

/// Additionally throws HeterogeneousInternalDynamics unless all Z_i in the
/// component are structurally identical.
[[nodiscard]] ReducedBlendedModel build_reduced_blended(
    const NetworkModel& model, const std::vector<NodeId>& component,
    std::optional<ReducedBlendedModel::Inputs> inputs = std::nullopt);

}  // namespace netfunnel
