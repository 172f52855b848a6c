#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "netfunnel/errors.hpp"
#include "netfunnel/graph.hpp"

namespace netfunnel {

/// Positive, bounded performance envelope psi(t) with bounded derivative.
class PerformanceFunction {
public:
    enum class Kind { Exponential, Constant, Tabulated };

    /// psi(t) = (B - eta) exp(-lambda (t - t_k)) + eta, defined for t >= t_k.
    static PerformanceFunction exponential(double B, double eta, double lambda, double t_k = 0.0);
    static PerformanceFunction constant(double level);
    /// Piecewise-linear table of (t, psi) samples; psi > 0 everywhere,
    /// extended by the boundary values outside the sampled range.
    static PerformanceFunction tabulated(std::vector<std::pair<double, double>> samples);

    /// Throws EvaluatedBeforeActivation for the exponential kind when t < t_k.
    [[nodiscard]] double value(double t) const;
    [[nodiscard]] double derivative(double t) const;

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] double level_B() const { return B_; }
    [[nodiscard]] double level_eta() const { return eta_; }
    [[nodiscard]] double rate_lambda() const { return lambda_; }
    [[nodiscard]] double activation_time() const { return t_k_; }
    [[nodiscard]] const std::vector<std::pair<double, double>>& table() const { return table_; }

private:
    PerformanceFunction() = default;
    Kind kind_ = Kind::Constant;
    double B_ = 1.0, eta_ = 1.0, lambda_ = 0.0, t_k_ = 0.0;
    std::vector<std::pair<double, double>> table_;
};

/// Coupling gain mu : (-1, 1) -> R, diverging at +-1; built-in kinds are odd.
class CouplingFunction {
public:
    enum class Kind { Tan, Rational, Custom };

    /// mu(s) = scale * tan(pi s / 2)
    static CouplingFunction tan_type(double scale = 1.0);
    /// mu(s) = scale * s / (1 - |s|)
    static CouplingFunction rational_type(double scale = 1.0);
    static CouplingFunction custom(std::function<double(double)> fn);

    /// Throws RatioOutOfFunnel when |s| >= 1.
    [[nodiscard]] double value(double s) const;
    /// Trial-stage variant: clamps s to +-(1 - 1e-12) instead of throwing.
    [[nodiscard]] double value_clamped(double s) const;

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] double scale() const { return scale_; }

private:
    CouplingFunction() = default;
    Kind kind_ = Kind::Tan;
    double scale_ = 1.0;
    std::function<double(double)> fn_;
};

/// One (psi, mu) pair per output component; stored once per undirected edge
/// and shared by both directions, which makes the symmetry requirements
/// structural.
struct ComponentFunnel {
    PerformanceFunction psi;
    CouplingFunction mu;
};

struct EdgeFunnel {
    std::vector<ComponentFunnel> components;
    [[nodiscard]] int m() const { return static_cast<int>(components.size()); }
};

struct NeighborOutput {
    NodeId j = -1;
    std::span<const double> y_j;
    const EdgeFunnel* funnel = nullptr;
};

struct CouplingInput {
    std::vector<double> u_i;  // length m
    std::vector<std::pair<NodeId, std::vector<double>>> per_edge;  // u_ij terms
};

/// Edge-wise coupling law: u_i = Gamma_inv * sum_j mu(nu_ij / psi_ij) with
/// nu_ij = y_j - y_i. Throws RatioOutOfFunnel, DimensionMismatch.
[[nodiscard]] CouplingInput compute_coupling_input(NodeId i, double t, std::span<const double> y_i,
                                                   std::span<const NeighborOutput> neighbors,
                                                   std::span<const double> gamma_inv_row_major);

/// True iff psi is direction-symmetric (structural here) and mu is odd on the
/// sample grid. Guards custom kinds.
[[nodiscard]] bool check_symmetry(const EdgeFunnel& e, std::span<const double> s_grid);

/// Edge-creation handshake: exponential funnels activated at t_k with
/// B^p = max(eta, (1 + margin) |y_i^p - y_j^p|) + eta, so psi(t_k) > |nu(t_k)|.
[[nodiscard]] EdgeFunnel handshake(std::span<const double> y_i, std::span<const double> y_j,
                                   double t_k, double eta, double lambda, double margin,
                                   const CouplingFunction& mu);

}  // namespace netfunnel
