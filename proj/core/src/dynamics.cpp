#include "netfunnel/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include <Eigen/Dense>

namespace netfunnel {

namespace {

std::vector<std::string> state_layout(int m, int n) {
    std::vector<std::string> names;
    names.emplace_back("t");
    for (int p = 1; p <= m; ++p) names.push_back("y" + std::to_string(p));
    for (int k = 1; k <= n; ++k) names.push_back("z" + std::to_string(k));
    return names;
}

std::vector<std::string> introspective_layout(int m, int n) {
    std::vector<std::string> names;
    for (int p = 1; p <= m; ++p) names.push_back("y" + std::to_string(p));
    for (int k = 1; k <= n; ++k) names.push_back("z" + std::to_string(k));
    return names;
}

std::vector<std::string> gain_layout(int mi) {
    std::vector<std::string> names;
    names.emplace_back("t");
    for (int k = 1; k <= mi; ++k) names.push_back("w" + std::to_string(k));
    return names;
}

}  // namespace

// --- AgentModel -------------------------------------------------------------

void AgentModel::finalize() {
    if (static_cast<int>(F.size()) != m) throw DimensionMismatch("agent needs m F expressions");
    if (static_cast<int>(Z.size()) != n) throw DimensionMismatch("agent needs n Z expressions");
    if (static_cast<int>(W.size()) != mi) throw DimensionMismatch("agent needs mi W expressions");
    if (static_cast<int>(Gamma.size()) != m) throw DimensionMismatch("Gamma must be m x m");
    for (const auto& row : Gamma)
        if (static_cast<int>(row.size()) != m) throw DimensionMismatch("Gamma must be m x m");
    if (static_cast<int>(y0.size()) != m) throw DimensionMismatch("y0 must have length m");
    if (static_cast<int>(z0.size()) != n) throw DimensionMismatch("z0 must have length n");

    auto fz_layout = state_layout(m, n);
    auto w_layout = introspective_layout(m, n);
    auto g_layout = gain_layout(mi);

    Fc.clear();
    Zc.clear();
    Wc.clear();
    Gc.clear();
    for (const Expr& e : F) Fc.push_back(CompiledExpr::compile(e, fz_layout));
    for (const Expr& e : Z) Zc.push_back(CompiledExpr::compile(e, fz_layout));
    for (const Expr& e : W) Wc.push_back(CompiledExpr::compile(e, w_layout));
    for (const auto& row : Gamma)
        for (const Expr& e : row) Gc.push_back(CompiledExpr::compile(e, g_layout));
}

bool same_internal_dynamics(const AgentModel& a, const AgentModel& b) {
    if (a.n != b.n || a.Z.size() != b.Z.size()) return false;
    for (std::size_t k = 0; k < a.Z.size(); ++k)
        if (!a.Z[k].equals(b.Z[k])) return false;
    return true;
}

// --- NetworkModel -------------------------------------------------------------

void NetworkModel::validate() const {
    std::vector<NodeId> keys;
    for (const auto& [id, agent] : agents) {
        keys.push_back(id);
        if (agent.m != m)
            throw DimensionMismatch("agent " + std::to_string(id) + " has m = " +
                                    std::to_string(agent.m) + ", network m = " + std::to_string(m));
    }
    if (keys != graph.nodes()) throw Error("graph nodes must match the agent set");
    for (const EdgeKey& e : graph.edges()) {
        auto it = funnels.find(e);
        if (it == funnels.end()) throw Error("edge " + e.str() + " has no funnel");
        if (it->second.m() != m) throw DimensionMismatch("funnel on " + e.str() + " has wrong m");
    }
    for (const auto& [key, f] : funnels)
        if (!graph.has_edge(key.a, key.b)) throw Error("funnel on non-edge " + key.str());
}

// --- gain inversion -----------------------------------------------------------

GainInverse invert_gain(std::span<const double> gamma, int m) {
    if (gamma.size() != static_cast<std::size_t>(m) * static_cast<std::size_t>(m))
        throw DimensionMismatch("gain matrix is not m x m");

    GainInverse out;
    out.inv.resize(gamma.size());

    if (m == 1) {
        double g = gamma[0];
        if (g == 0.0 || !std::isfinite(g) || std::fabs(g) < 1e-300)
            throw SingularGain("scalar gain is zero");
        out.inv[0] = 1.0 / g;
        out.inf_norm = std::fabs(out.inv[0]);
        if (std::fabs(g) * out.inf_norm > 1e12) throw SingularGain("gain condition exceeds 1e12");
        return out;
    }

    Eigen::MatrixXd G(m, m);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) G(r, c) = gamma[static_cast<std::size_t>(r * m + c)];
    Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
    if (!lu.isInvertible()) throw SingularGain("gain matrix is singular");
    Eigen::MatrixXd inv = lu.inverse();

    double norm_g = G.cwiseAbs().rowwise().sum().maxCoeff();
    double norm_inv = inv.cwiseAbs().rowwise().sum().maxCoeff();
    if (norm_g * norm_inv > 1e12) throw SingularGain("gain condition exceeds 1e12");

    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) out.inv[static_cast<std::size_t>(r * m + c)] = inv(r, c);
    out.inf_norm = norm_inv;
    return out;
}

// --- PackedComponent ------------------------------------------------------------

PackedComponent::PackedComponent(const NetworkModel& model, std::vector<NodeId> agents)
    : model_(&model), agents_(std::move(agents)), m_(model.m) {
    std::sort(agents_.begin(), agents_.end());
    int off = 0;
    for (NodeId id : agents_) {
        auto it = model.agents.find(id);
        if (it == model.agents.end()) throw UnknownNode(id);
        const AgentModel& am = it->second;
        if (!am.finalized()) throw Error("agent " + std::to_string(id) + " not finalized");
        am_.push_back(&am);
        y_off_.push_back(off);
        z_off_.push_back(off + m_);
        off += m_ + am.n;
    }
    dim_ = off;

    auto idx_of = [&](NodeId id) {
        auto it = std::lower_bound(agents_.begin(), agents_.end(), id);
        return it != agents_.end() && *it == id ? static_cast<int>(it - agents_.begin()) : -1;
    };
    for (const EdgeKey& e : model.graph.edges()) {
        int ia = idx_of(e.a), ib = idx_of(e.b);
        if (ia < 0 || ib < 0) continue;  // edge leaves the component
        edges_.push_back({e, ia, ib, &model.funnels.at(e)});
    }
}

int PackedComponent::internal_dim(int agent_idx) const {
    return am_[static_cast<std::size_t>(agent_idx)]->n;
}

void PackedComponent::rhs(double t, std::span<const double> x, std::span<double> dx,
                          EvalWorkspace& ws, bool clamp, Diag* diag) const {
    const int N = static_cast<int>(agents_.size());
    ws.acc.assign(static_cast<std::size_t>(N) * static_cast<std::size_t>(m_), 0.0L);
    double max_ratio = 0.0;

    // Edge terms: both directions of each undirected edge evaluated through
    // the one shared funnel.
    for (const EdgeRef& e : edges_) {
        for (int p = 0; p < m_; ++p) {
            const ComponentFunnel& cf = e.funnel->components[static_cast<std::size_t>(p)];
            double nu = x[static_cast<std::size_t>(y_off_[static_cast<std::size_t>(e.ib)] + p)] -
                        x[static_cast<std::size_t>(y_off_[static_cast<std::size_t>(e.ia)] + p)];
            double s = nu / cf.psi.value(t);
            max_ratio = std::max(max_ratio, std::fabs(s));
            double mu_ab = clamp ? cf.mu.value_clamped(s) : cf.mu.value(s);
            double mu_ba = clamp ? cf.mu.value_clamped(-s) : cf.mu.value(-s);
            ws.acc[static_cast<std::size_t>(e.ia * m_ + p)] += mu_ab;
            ws.acc[static_cast<std::size_t>(e.ib * m_ + p)] += mu_ba;
        }
    }

    if (diag) {
        diag->u.assign(static_cast<std::size_t>(N) * static_cast<std::size_t>(m_), 0.0);
        diag->coupling.assign(static_cast<std::size_t>(N) * static_cast<std::size_t>(m_), 0.0);
        diag->gamma_inv_norm.assign(static_cast<std::size_t>(N), 0.0);
        diag->max_abs_ratio = max_ratio;
    }

    const std::size_t mm = static_cast<std::size_t>(m_) * static_cast<std::size_t>(m_);
    for (int k = 0; k < N; ++k) {
        const AgentModel& am = *am_[static_cast<std::size_t>(k)];
        const double* y = x.data() + y_off_[static_cast<std::size_t>(k)];
        const double* z = x.data() + z_off_[static_cast<std::size_t>(k)];

        // introspective output
        ws.wslots.assign(static_cast<std::size_t>(am.m + am.n), 0.0);
        std::copy(y, y + am.m, ws.wslots.begin());
        std::copy(z, z + am.n, ws.wslots.begin() + am.m);
        ws.gslots.assign(static_cast<std::size_t>(1 + am.mi), 0.0);
        ws.gslots[0] = t;
        for (int q = 0; q < am.mi; ++q)
            ws.gslots[static_cast<std::size_t>(1 + q)] =
                am.Wc[static_cast<std::size_t>(q)].eval(ws.wslots);

        // gain and its inverse
        ws.gamma.assign(mm, 0.0);
        for (std::size_t q = 0; q < mm; ++q) ws.gamma[q] = am.Gc[q].eval(ws.gslots);
        GainInverse gi = invert_gain(ws.gamma, m_);

        // u_i = Gamma^-1 * acc,  coupling force = Gamma * u_i
        ws.mu_buf.assign(static_cast<std::size_t>(2 * m_), 0.0);
        double* u_i = ws.mu_buf.data();
        double* force = ws.mu_buf.data() + m_;
        for (int p = 0; p < m_; ++p) {
            long double v = 0.0L;
            for (int q = 0; q < m_; ++q)
                v += static_cast<long double>(gi.inv[static_cast<std::size_t>(p * m_ + q)]) *
                     ws.acc[static_cast<std::size_t>(k * m_ + q)];
            u_i[p] = static_cast<double>(v);
        }
        for (int p = 0; p < m_; ++p) {
            long double v = 0.0L;
            for (int q = 0; q < m_; ++q)
                v += static_cast<long double>(ws.gamma[static_cast<std::size_t>(p * m_ + q)]) *
                     static_cast<long double>(u_i[q]);
            force[p] = static_cast<double>(v);
        }

        // state slots [t, y, z]
        ws.slots.assign(static_cast<std::size_t>(1 + am.m + am.n), 0.0);
        ws.slots[0] = t;
        std::copy(y, y + am.m, ws.slots.begin() + 1);
        std::copy(z, z + am.n, ws.slots.begin() + 1 + am.m);

        for (int p = 0; p < m_; ++p)
            dx[static_cast<std::size_t>(y_off_[static_cast<std::size_t>(k)] + p)] =
                am.Fc[static_cast<std::size_t>(p)].eval(ws.slots) + force[p];
        for (int q = 0; q < am.n; ++q)
            dx[static_cast<std::size_t>(z_off_[static_cast<std::size_t>(k)] + q)] =
                am.Zc[static_cast<std::size_t>(q)].eval(ws.slots);

        if (diag) {
            std::copy(u_i, u_i + m_, diag->u.begin() + k * m_);
            std::copy(force, force + m_, diag->coupling.begin() + k * m_);
            diag->gamma_inv_norm[static_cast<std::size_t>(k)] = gi.inf_norm;
        }
    }
}

double PackedComponent::max_abs_ratio(double t, std::span<const double> x, EdgeKey* arg_edge,
                                      int* arg_p) const {
    double best = 0.0;
    for (const EdgeRef& e : edges_) {
        for (int p = 0; p < m_; ++p) {
            const ComponentFunnel& cf = e.funnel->components[static_cast<std::size_t>(p)];
            double nu = x[static_cast<std::size_t>(y_off_[static_cast<std::size_t>(e.ib)] + p)] -
                        x[static_cast<std::size_t>(y_off_[static_cast<std::size_t>(e.ia)] + p)];
            double s = std::fabs(nu / cf.psi.value(t));
            if (s > best) {
                best = s;
                if (arg_edge) *arg_edge = e.key;
                if (arg_p) *arg_p = p + 1;
            }
        }
    }
    return best;
}

void PackedComponent::edge_ratios(double t, std::span<const double> x, std::span<double> ratios,
                                  std::span<double> psis) const {
    std::size_t idx = 0;
    for (const EdgeRef& e : edges_) {
        for (int p = 0; p < m_; ++p, ++idx) {
            const ComponentFunnel& cf = e.funnel->components[static_cast<std::size_t>(p)];
            double psi = cf.psi.value(t);
            double nu = x[static_cast<std::size_t>(y_off_[static_cast<std::size_t>(e.ib)] + p)] -
                        x[static_cast<std::size_t>(y_off_[static_cast<std::size_t>(e.ia)] + p)];
            ratios[idx] = nu / psi;
            psis[idx] = psi;
        }
    }
}

void PackedComponent::pack(const NetworkState& s, std::span<double> x) const {
    for (std::size_t k = 0; k < agents_.size(); ++k) {
        const AgentState& a = s.at(agents_[k]);
        std::copy(a.y.begin(), a.y.end(), x.begin() + y_off_[k]);
        std::copy(a.z.begin(), a.z.end(), x.begin() + z_off_[k]);
    }
}

void PackedComponent::unpack(std::span<const double> x, NetworkState& s) const {
    for (std::size_t k = 0; k < agents_.size(); ++k) {
        AgentState& a = s[agents_[k]];
        a.y.assign(x.begin() + y_off_[k], x.begin() + y_off_[k] + m_);
        a.z.assign(x.begin() + z_off_[k], x.begin() + z_off_[k] + am_[k]->n);
    }
}

// --- eval_rhs ----------------------------------------------------------------

NetworkState eval_rhs(const NetworkModel& model, double t, const NetworkState& state,
                      RhsDiagnostics* diag) {
    std::vector<NodeId> agents;
    for (const auto& [id, a] : state) agents.push_back(id);
    PackedComponent sys(model, agents);

    std::vector<double> x(static_cast<std::size_t>(sys.dim())), dx(static_cast<std::size_t>(sys.dim()));
    sys.pack(state, x);

    EvalWorkspace ws;
    PackedComponent::Diag d;
    sys.rhs(t, x, dx, ws, /*clamp=*/false, diag ? &d : nullptr);

    NetworkState out;
    sys.unpack(dx, out);
    if (diag) {
        diag->max_abs_ratio = d.max_abs_ratio;
        for (std::size_t k = 0; k < sys.agents().size(); ++k) {
            NodeId id = sys.agents()[k];
            diag->u[id].assign(d.u.begin() + k * model.m, d.u.begin() + (k + 1) * model.m);
            diag->coupling[id].assign(d.coupling.begin() + k * model.m,
                                      d.coupling.begin() + (k + 1) * model.m);
            diag->gamma_inv_norm[id] = d.gamma_inv_norm[k];
        }
    }
    return out;
}

// --- blended models ------------------------------------------------------------

namespace {
void require_connected(const NetworkModel& model, const std::vector<NodeId>& component) {
    if (component.empty()) throw DisconnectedComponent("empty component");
    std::set<NodeId> want(component.begin(), component.end());
    std::set<NodeId> seen{*want.begin()};
    std::deque<NodeId> queue{*want.begin()};
    while (!queue.empty()) {
        NodeId n = queue.front();
        queue.pop_front();
        for (NodeId nb : model.graph.neighbors(n)) {
            if (want.count(nb) && seen.insert(nb).second) queue.push_back(nb);
        }
    }
    if (seen.size() != want.size())
        throw DisconnectedComponent("component is not connected in the network graph");
}
}  // namespace

BlendedModel::BlendedModel(const NetworkModel& model, std::vector<NodeId> component,
                           std::vector<InputSignal> inputs)
    : agents_(std::move(component)), inputs_(std::move(inputs)), m_(model.m) {
    std::sort(agents_.begin(), agents_.end());
    if (!inputs_.empty() && inputs_.size() != agents_.size())
        throw DimensionMismatch("one input signal per agent required");
    int off = m_;
    for (NodeId id : agents_) {
        const AgentModel& am = model.agents.at(id);
        if (!am.finalized()) throw Error("agent " + std::to_string(id) + " not finalized");
        am_.push_back(&am);
        z_off_.push_back(off);
        off += am.n;
    }
    dim_ = off;
}

int BlendedModel::internal_dim(int agent_idx) const {
    return am_[static_cast<std::size_t>(agent_idx)]->n;
}

void BlendedModel::rhs(double t, std::span<const double> x, std::span<double> dx,
                       EvalWorkspace& ws, const double* e_flat) const {
    const int N = static_cast<int>(agents_.size());
    std::vector<long double> s_dot(static_cast<std::size_t>(m_), 0.0L);

    ws.mu_buf.assign(static_cast<std::size_t>(m_), 0.0);
    for (int k = 0; k < N; ++k) {
        const AgentModel& am = *am_[static_cast<std::size_t>(k)];

        // effective output argument s + e_k
        std::span<double> e(ws.mu_buf);
        std::fill(e.begin(), e.end(), 0.0);
        if (e_flat) {
            std::copy(e_flat + k * m_, e_flat + (k + 1) * m_, e.begin());
        } else if (!inputs_.empty() && inputs_[static_cast<std::size_t>(k)]) {
            inputs_[static_cast<std::size_t>(k)](t, e);
        }

        ws.slots.assign(static_cast<std::size_t>(1 + m_ + am.n), 0.0);
        ws.slots[0] = t;
        for (int p = 0; p < m_; ++p)
            ws.slots[static_cast<std::size_t>(1 + p)] = x[static_cast<std::size_t>(p)] + e[static_cast<std::size_t>(p)];
        for (int q = 0; q < am.n; ++q)
            ws.slots[static_cast<std::size_t>(1 + m_ + q)] =
                x[static_cast<std::size_t>(z_off_[static_cast<std::size_t>(k)] + q)];

        for (int p = 0; p < m_; ++p)
            s_dot[static_cast<std::size_t>(p)] += am.Fc[static_cast<std::size_t>(p)].eval(ws.slots);
        for (int q = 0; q < am.n; ++q)
            dx[static_cast<std::size_t>(z_off_[static_cast<std::size_t>(k)] + q)] =
                am.Zc[static_cast<std::size_t>(q)].eval(ws.slots);
    }
    for (int p = 0; p < m_; ++p)
        dx[static_cast<std::size_t>(p)] = static_cast<double>(s_dot[static_cast<std::size_t>(p)] / N);
}

std::vector<double> BlendedModel::initial_state(const NetworkState& net) const {
    std::vector<double> x(static_cast<std::size_t>(dim_), 0.0);
    const int N = static_cast<int>(agents_.size());
    for (int k = 0; k < N; ++k) {
        const AgentState& a = net.at(agents_[static_cast<std::size_t>(k)]);
        for (int p = 0; p < m_; ++p) x[static_cast<std::size_t>(p)] += a.y[static_cast<std::size_t>(p)] / N;
        std::copy(a.z.begin(), a.z.end(), x.begin() + z_off_[static_cast<std::size_t>(k)]);
    }
    return x;
}

ReducedBlendedModel::ReducedBlendedModel(const NetworkModel& model, std::vector<NodeId> component,
                                         std::optional<Inputs> inputs)
    : agents_(std::move(component)), inputs_(std::move(inputs)), m_(model.m) {
    std::sort(agents_.begin(), agents_.end());
    const AgentModel* first = nullptr;
    for (NodeId id : agents_) {
        const AgentModel& am = model.agents.at(id);
        if (!am.finalized()) throw Error("agent " + std::to_string(id) + " not finalized");
        if (!first) {
            first = &am;
        } else if (!same_internal_dynamics(*first, am)) {
            throw HeterogeneousInternalDynamics(
                "reduced blended dynamics require identical internal dynamics");
        }
        am_.push_back(&am);
    }
    n_ = first ? first->n : 0;
}

void ReducedBlendedModel::rhs(double t, std::span<const double> x, std::span<double> dx,
                              EvalWorkspace& ws) const {
    const int N = static_cast<int>(agents_.size());
    std::vector<long double> s_dot(static_cast<std::size_t>(m_), 0.0L);
    ws.mu_buf.assign(static_cast<std::size_t>(m_ + n_), 0.0);

    for (int k = 0; k < N; ++k) {
        const AgentModel& am = *am_[static_cast<std::size_t>(k)];
        std::span<double> e(ws.mu_buf.data(), static_cast<std::size_t>(m_));
        std::span<double> d(ws.mu_buf.data() + m_, static_cast<std::size_t>(n_));
        std::fill(e.begin(), e.end(), 0.0);
        std::fill(d.begin(), d.end(), 0.0);
        if (inputs_) {
            if (!inputs_->e.empty() && inputs_->e[static_cast<std::size_t>(k)])
                inputs_->e[static_cast<std::size_t>(k)](t, e);
            if (!inputs_->d.empty() && inputs_->d[static_cast<std::size_t>(k)])
                inputs_->d[static_cast<std::size_t>(k)](t, d);
        }
        ws.slots.assign(static_cast<std::size_t>(1 + m_ + n_), 0.0);
        ws.slots[0] = t;
        for (int p = 0; p < m_; ++p)
            ws.slots[static_cast<std::size_t>(1 + p)] =
                x[static_cast<std::size_t>(p)] + e[static_cast<std::size_t>(p)];
        for (int q = 0; q < n_; ++q)
            ws.slots[static_cast<std::size_t>(1 + m_ + q)] =
                x[static_cast<std::size_t>(m_ + q)] + d[static_cast<std::size_t>(q)];
        for (int p = 0; p < m_; ++p)
            s_dot[static_cast<std::size_t>(p)] += am.Fc[static_cast<std::size_t>(p)].eval(ws.slots);
    }
    for (int p = 0; p < m_; ++p)
        dx[static_cast<std::size_t>(p)] = static_cast<double>(s_dot[static_cast<std::size_t>(p)] / N);

    // internal state driven by s + e_0
    const AgentModel& am = *am_[0];
    ws.slots.assign(static_cast<std::size_t>(1 + m_ + n_), 0.0);
    ws.slots[0] = t;
    std::span<double> e0(ws.mu_buf.data(), static_cast<std::size_t>(m_));
    std::fill(e0.begin(), e0.end(), 0.0);
    if (inputs_ && inputs_->e0) inputs_->e0(t, e0);
    for (int p = 0; p < m_; ++p)
        ws.slots[static_cast<std::size_t>(1 + p)] =
            x[static_cast<std::size_t>(p)] + e0[static_cast<std::size_t>(p)];
    for (int q = 0; q < n_; ++q)
        ws.slots[static_cast<std::size_t>(1 + m_ + q)] = x[static_cast<std::size_t>(m_ + q)];
    for (int q = 0; q < n_; ++q)
        dx[static_cast<std::size_t>(m_ + q)] = am.Zc[static_cast<std::size_t>(q)].eval(ws.slots);
}

std::vector<double> ReducedBlendedModel::initial_state(const NetworkState& net) const {
    std::vector<double> x(static_cast<std::size_t>(m_ + n_), 0.0);
    const int N = static_cast<int>(agents_.size());
    for (NodeId id : agents_) {
        const AgentState& a = net.at(id);
        for (int p = 0; p < m_; ++p) x[static_cast<std::size_t>(p)] += a.y[static_cast<std::size_t>(p)] / N;
        for (int q = 0; q < n_; ++q)
            x[static_cast<std::size_t>(m_ + q)] += a.z[static_cast<std::size_t>(q)] / N;
    }
    return x;
}

BlendedModel build_blended(const NetworkModel& model, const std::vector<NodeId>& component,
                           std::vector<InputSignal> inputs) {
    require_connected(model, component);
    return BlendedModel(model, component, std::move(inputs));
}

ReducedBlendedModel build_reduced_blended(const NetworkModel& model,
                                          const std::vector<NodeId>& component,
                                          std::optional<ReducedBlendedModel::Inputs> inputs) {
    require_connected(model, component);
    return ReducedBlendedModel(model, component, std::move(inputs));
}

}  // namespace netfunnel
