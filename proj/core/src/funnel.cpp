#include "netfunnel/funnel.hpp"

#include <algorithm>
#include <cmath>

namespace netfunnel {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kClamp = 1.0 - 1e-12;
}  // namespace

// --- PerformanceFunction ----------------------------------------------------

PerformanceFunction PerformanceFunction::exponential(double B, double eta, double lambda,
                                                     double t_k) {
    if (!(eta > 0)) throw Error("performance function requires eta > 0");
    if (!(B >= eta)) throw Error("performance function requires B >= eta");
    if (!(lambda > 0)) throw Error("performance function requires lambda > 0");
    PerformanceFunction p;
    p.kind_ = Kind::Exponential;
    p.B_ = B;
    p.eta_ = eta;
    p.lambda_ = lambda;
    p.t_k_ = t_k;
    return p;
}

PerformanceFunction PerformanceFunction::constant(double level) {
    if (!(level > 0)) throw Error("performance function must be positive");
    PerformanceFunction p;
    p.kind_ = Kind::Constant;
    p.B_ = p.eta_ = level;
    return p;
}

PerformanceFunction PerformanceFunction::tabulated(std::vector<std::pair<double, double>> samples) {
    if (samples.size() < 2) throw Error("tabulated performance function needs >= 2 samples");
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (!(samples[k].second > 0)) throw Error("performance function must be positive");
        if (k > 0 && !(samples[k].first > samples[k - 1].first))
            throw Error("tabulated performance function needs increasing times");
    }
    PerformanceFunction p;
    p.kind_ = Kind::Tabulated;
    p.t_k_ = samples.front().first;
    p.table_ = std::move(samples);
    return p;
}

double PerformanceFunction::value(double t) const {
    switch (kind_) {
        case Kind::Constant: return eta_;
        case Kind::Exponential:
            if (t < t_k_)
                throw EvaluatedBeforeActivation("psi evaluated at t = " + std::to_string(t) +
                                                " before activation t_k = " + std::to_string(t_k_));
            return (B_ - eta_) * std::exp(-lambda_ * (t - t_k_)) + eta_;
        case Kind::Tabulated: {
            if (t <= table_.front().first) return table_.front().second;
            if (t >= table_.back().first) return table_.back().second;
            auto it = std::upper_bound(table_.begin(), table_.end(), t,
                                       [](double v, const auto& s) { return v < s.first; });
            auto lo = *(it - 1);
            auto hi = *it;
            double f = (t - lo.first) / (hi.first - lo.first);
            return lo.second + f * (hi.second - lo.second);
        }
    }
    throw Error("corrupt performance function");
}

double PerformanceFunction::derivative(double t) const {
    switch (kind_) {
        case Kind::Constant: return 0.0;
        case Kind::Exponential:
            if (t < t_k_)
                throw EvaluatedBeforeActivation("psi' evaluated at t = " + std::to_string(t) +
                                                " before activation t_k = " + std::to_string(t_k_));
            return -lambda_ * (B_ - eta_) * std::exp(-lambda_ * (t - t_k_));
        case Kind::Tabulated: {
            if (t <= table_.front().first || t >= table_.back().first) return 0.0;
            auto it = std::upper_bound(table_.begin(), table_.end(), t,
                                       [](double v, const auto& s) { return v < s.first; });
            auto lo = *(it - 1);
            auto hi = *it;
            return (hi.second - lo.second) / (hi.first - lo.first);
        }
    }
    throw Error("corrupt performance function");
}

// --- CouplingFunction -------------------------------------------------------

CouplingFunction CouplingFunction::tan_type(double scale) {
    if (!(scale > 0)) throw Error("coupling scale must be positive");
    CouplingFunction c;
    c.kind_ = Kind::Tan;
    c.scale_ = scale;
    return c;
}

CouplingFunction CouplingFunction::rational_type(double scale) {
    if (!(scale > 0)) throw Error("coupling scale must be positive");
    CouplingFunction c;
    c.kind_ = Kind::Rational;
    c.scale_ = scale;
    return c;
}

CouplingFunction CouplingFunction::custom(std::function<double(double)> fn) {
    CouplingFunction c;
    c.kind_ = Kind::Custom;
    c.fn_ = std::move(fn);
    return c;
}

double CouplingFunction::value(double s) const {
    if (!(std::fabs(s) < 1.0)) throw RatioOutOfFunnel(s);
    switch (kind_) {
        case Kind::Tan: return scale_ * std::tan(kPi / 2.0 * s);
        case Kind::Rational: return scale_ * s / (1.0 - std::fabs(s));
        case Kind::Custom: return fn_(s);
    }
    throw Error("corrupt coupling function");
}

double CouplingFunction::value_clamped(double s) const {
    s = std::clamp(s, -kClamp, kClamp);
    switch (kind_) {
        case Kind::Tan: return scale_ * std::tan(kPi / 2.0 * s);
        case Kind::Rational: return scale_ * s / (1.0 - std::fabs(s));
        case Kind::Custom: return fn_(s);
    }
    throw Error("corrupt coupling function");
}

// --- operations -------------------------------------------------------------

CouplingInput compute_coupling_input(NodeId i, double t, std::span<const double> y_i,
                                     std::span<const NeighborOutput> neighbors,
                                     std::span<const double> gamma_inv_row_major) {
    const int m = static_cast<int>(y_i.size());
    if (gamma_inv_row_major.size() != static_cast<std::size_t>(m) * static_cast<std::size_t>(m))
        throw DimensionMismatch("Gamma_inv is not m x m");

    CouplingInput out;
    out.u_i.assign(static_cast<std::size_t>(m), 0.0);
    std::vector<long double> acc(static_cast<std::size_t>(m), 0.0L);

    for (const NeighborOutput& nb : neighbors) {
        if (static_cast<int>(nb.y_j.size()) != m || nb.funnel == nullptr ||
            nb.funnel->m() != m)
            throw DimensionMismatch("neighbor output of node " + std::to_string(nb.j) +
                                    " does not match m");
        std::vector<double> u_ij(static_cast<std::size_t>(m));
        for (int p = 0; p < m; ++p) {
            const ComponentFunnel& cf = nb.funnel->components[static_cast<std::size_t>(p)];
            double nu = nb.y_j[static_cast<std::size_t>(p)] - y_i[static_cast<std::size_t>(p)];
            double mu = cf.mu.value(nu / cf.psi.value(t));
            u_ij[static_cast<std::size_t>(p)] = mu;
            acc[static_cast<std::size_t>(p)] += mu;
        }
        out.per_edge.emplace_back(nb.j, std::move(u_ij));
    }

    for (int p = 0; p < m; ++p) {
        long double v = 0.0L;
        for (int q = 0; q < m; ++q)
            v += static_cast<long double>(
                     gamma_inv_row_major[static_cast<std::size_t>(p * m + q)]) *
                 acc[static_cast<std::size_t>(q)];
        out.u_i[static_cast<std::size_t>(p)] = static_cast<double>(v);
    }
    return out;
}

bool check_symmetry(const EdgeFunnel& e, std::span<const double> s_grid) {
    for (const ComponentFunnel& cf : e.components) {
        for (double s : s_grid) {
            if (!(std::fabs(s) < 1.0)) return false;
            double sum = cf.mu.value(-s) + cf.mu.value(s);
            double mag = std::max(1.0, std::fabs(cf.mu.value(s)));
            if (std::fabs(sum) > 1e-12 * mag) return false;
        }
    }
    return true;
}

EdgeFunnel handshake(std::span<const double> y_i, std::span<const double> y_j, double t_k,
                     double eta, double lambda, double margin, const CouplingFunction& mu) {
    if (!(margin > 0)) throw Error("handshake margin must be positive");
    if (!(eta > 0)) throw Error("handshake eta must be positive");
    if (y_i.size() != y_j.size()) throw DimensionMismatch("handshake outputs differ in length");

    EdgeFunnel out;
    for (std::size_t p = 0; p < y_i.size(); ++p) {
        double nu = std::fabs(y_i[p] - y_j[p]);
        double B = std::max(eta, (1.0 + margin) * nu) + eta;
        out.components.push_back({PerformanceFunction::exponential(B, eta, lambda, t_k), mu});
    }
    return out;
}

}  // namespace netfunnel
