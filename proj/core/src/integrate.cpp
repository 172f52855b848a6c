#include "netfunnel/integrate.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace netfunnel {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                 A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784,
                 B6 = 11.0 / 84;
constexpr double E1 = 35.0 / 384 - 5179.0 / 57600, E3 = 500.0 / 1113 - 7571.0 / 16695,
                 E4 = 125.0 / 192 - 393.0 / 640, E5 = -2187.0 / 6784 + 92097.0 / 339200,
                 E6 = 11.0 / 84 - 187.0 / 2100, E7 = -1.0 / 40;
constexpr double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9;

// Rosenbrock 4(3) (Shampine parameter set).
constexpr double GAM = 0.5;
constexpr double RA21 = 2.0;
constexpr double RA31 = 48.0 / 25, RA32 = 6.0 / 25;
constexpr double RC21 = -8.0;
constexpr double RC31 = 372.0 / 25, RC32 = 12.0 / 5;
constexpr double RC41 = -112.0 / 125, RC42 = -54.0 / 125, RC43 = -2.0 / 5;
constexpr double RB1 = 19.0 / 9, RB2 = 1.0 / 2, RB3 = 25.0 / 108, RB4 = 125.0 / 108;
constexpr double RE1 = 17.0 / 54, RE2 = 7.0 / 36, RE3 = 0.0, RE4 = 125.0 / 108;
constexpr double RC1X = 1.0 / 2, RC2X = -3.0 / 2, RC3X = 121.0 / 50, RC4X = 29.0 / 250;
constexpr double RA2X = 1.0, RA3X = 3.0 / 5;

}  // namespace

Integrator::Integrator(int dim, const IntegrateOptions& opts) : dim_(dim), opts_(opts) {
    k_.assign(8, std::vector<double>(static_cast<std::size_t>(dim), 0.0));
    x_stage_.assign(static_cast<std::size_t>(dim), 0.0);
    x_new_.assign(static_cast<std::size_t>(dim), 0.0);
    x_err_.assign(static_cast<std::size_t>(dim), 0.0);
    if (opts.method == StepMethod::Rosenbrock4) {
        jac_.assign(static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim), 0.0);
        f0_.assign(static_cast<std::size_t>(dim), 0.0);
        ft_.assign(static_cast<std::size_t>(dim), 0.0);
        rhs_buf_.assign(static_cast<std::size_t>(dim), 0.0);
    }
}

double Integrator::error_norm(std::span<const double> x_old) const {
    double sum = 0.0;
    for (int i = 0; i < dim_; ++i) {
        double scale = opts_.atol + opts_.rtol * std::max(std::fabs(x_old[static_cast<std::size_t>(i)]),
                                                          std::fabs(x_new_[static_cast<std::size_t>(i)]));
        double e = x_err_[static_cast<std::size_t>(i)] / scale;
        sum += e * e;
    }
    return std::sqrt(sum / dim_);
}

Integrator::Attempt Integrator::try_dopri(const RhsFn& f, const GuardFn& guard, double t,
                                          double dt, std::span<const double> x) {
    const double guard_lim = 1.0 - opts_.boundary_guard;
    auto stage_ok = [&](double ts, std::span<const double> xs) {
        return !guard || guard(ts, xs) < guard_lim;
    };

    auto& k1 = k_[0];
    auto& k2 = k_[1];
    auto& k3 = k_[2];
    auto& k4 = k_[3];
    auto& k5 = k_[4];
    auto& k6 = k_[5];
    auto& k7 = k_[6];

    f(t, x, k1);
    auto form_stage = [&](std::initializer_list<std::pair<const std::vector<double>*, double>> terms) {
        for (int i = 0; i < dim_; ++i) {
            double acc = x[static_cast<std::size_t>(i)];
            for (const auto& [kv, c] : terms) acc += dt * c * (*kv)[static_cast<std::size_t>(i)];
            x_stage_[static_cast<std::size_t>(i)] = acc;
        }
    };

    form_stage({{&k1, A21}});
    if (!stage_ok(t + C2 * dt, x_stage_)) return {false, true, 0.0};
    f(t + C2 * dt, x_stage_, k2);

    form_stage({{&k1, A31}, {&k2, A32}});
    if (!stage_ok(t + C3 * dt, x_stage_)) return {false, true, 0.0};
    f(t + C3 * dt, x_stage_, k3);

    form_stage({{&k1, A41}, {&k2, A42}, {&k3, A43}});
    if (!stage_ok(t + C4 * dt, x_stage_)) return {false, true, 0.0};
    f(t + C4 * dt, x_stage_, k4);

    form_stage({{&k1, A51}, {&k2, A52}, {&k3, A53}, {&k4, A54}});
    if (!stage_ok(t + C5 * dt, x_stage_)) return {false, true, 0.0};
    f(t + C5 * dt, x_stage_, k5);

    form_stage({{&k1, A61}, {&k2, A62}, {&k3, A63}, {&k4, A64}, {&k5, A65}});
    if (!stage_ok(t + dt, x_stage_)) return {false, true, 0.0};
    f(t + dt, x_stage_, k6);

    for (int i = 0; i < dim_; ++i) {
        x_new_[static_cast<std::size_t>(i)] =
            x[static_cast<std::size_t>(i)] +
            dt * (B1 * k1[static_cast<std::size_t>(i)] + B3 * k3[static_cast<std::size_t>(i)] +
                  B4 * k4[static_cast<std::size_t>(i)] + B5 * k5[static_cast<std::size_t>(i)] +
                  B6 * k6[static_cast<std::size_t>(i)]);
    }
    if (!stage_ok(t + dt, x_new_)) return {false, true, 0.0};
    f(t + dt, x_new_, k7);

    for (int i = 0; i < dim_; ++i) {
        x_err_[static_cast<std::size_t>(i)] =
            dt * (E1 * k1[static_cast<std::size_t>(i)] + E3 * k3[static_cast<std::size_t>(i)] +
                  E4 * k4[static_cast<std::size_t>(i)] + E5 * k5[static_cast<std::size_t>(i)] +
                  E6 * k6[static_cast<std::size_t>(i)] + E7 * k7[static_cast<std::size_t>(i)]);
    }
    double err = error_norm(x);
    return {err <= 1.0, false, err};
}

Integrator::Attempt Integrator::try_rosenbrock(const RhsFn& f, const GuardFn& guard, double t,
                                               double dt, std::span<const double> x) {
    const double guard_lim = 1.0 - opts_.boundary_guard;
    auto stage_ok = [&](double ts, std::span<const double> xs) {
        return !guard || guard(ts, xs) < guard_lim;
    };
    const std::size_t n = static_cast<std::size_t>(dim_);

    f(t, x, f0_);

    // dF/dt by forward difference
    const double sqrt_eps = 1.4901161193847656e-08;
    double dt_fd = sqrt_eps * std::max(1e-3, std::fabs(t));
    f(t + dt_fd, x, ft_);
    for (std::size_t i = 0; i < n; ++i) ft_[i] = (ft_[i] - f0_[i]) / dt_fd;

    // Jacobian by forward differences, column by column
    for (int c = 0; c < dim_; ++c) {
        std::copy(x.begin(), x.end(), x_stage_.begin());
        double h = sqrt_eps * std::max(std::fabs(x[static_cast<std::size_t>(c)]), 1e-5);
        x_stage_[static_cast<std::size_t>(c)] += h;
        f(t, x_stage_, rhs_buf_);
        for (int r = 0; r < dim_; ++r)
            jac_[static_cast<std::size_t>(r) * n + static_cast<std::size_t>(c)] =
                (rhs_buf_[static_cast<std::size_t>(r)] - f0_[static_cast<std::size_t>(r)]) / h;
    }

    // LU of (I/(gam dt) - J)
    Eigen::MatrixXd A(dim_, dim_);
    for (int r = 0; r < dim_; ++r)
        for (int c = 0; c < dim_; ++c)
            A(r, c) = (r == c ? 1.0 / (GAM * dt) : 0.0) -
                      jac_[static_cast<std::size_t>(r) * n + static_cast<std::size_t>(c)];
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);

    Eigen::VectorXd g1(dim_), g2(dim_), g3(dim_), g4(dim_), rhs(dim_);

    for (int i = 0; i < dim_; ++i) rhs(i) = f0_[static_cast<std::size_t>(i)] + dt * RC1X * ft_[static_cast<std::size_t>(i)];
    g1 = lu.solve(rhs);

    for (int i = 0; i < dim_; ++i)
        x_stage_[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + RA21 * g1(i);
    if (!stage_ok(t + RA2X * dt, x_stage_)) return {false, true, 0.0};
    f(t + RA2X * dt, x_stage_, rhs_buf_);
    for (int i = 0; i < dim_; ++i)
        rhs(i) = rhs_buf_[static_cast<std::size_t>(i)] + dt * RC2X * ft_[static_cast<std::size_t>(i)] +
                 RC21 * g1(i) / dt;
    g2 = lu.solve(rhs);

    for (int i = 0; i < dim_; ++i)
        x_stage_[static_cast<std::size_t>(i)] =
            x[static_cast<std::size_t>(i)] + RA31 * g1(i) + RA32 * g2(i);
    if (!stage_ok(t + RA3X * dt, x_stage_)) return {false, true, 0.0};
    f(t + RA3X * dt, x_stage_, rhs_buf_);
    for (int i = 0; i < dim_; ++i)
        rhs(i) = rhs_buf_[static_cast<std::size_t>(i)] + dt * RC3X * ft_[static_cast<std::size_t>(i)] +
                 (RC31 * g1(i) + RC32 * g2(i)) / dt;
    g3 = lu.solve(rhs);

    // fourth stage reuses the third stage's function value
    for (int i = 0; i < dim_; ++i)
        rhs(i) = rhs_buf_[static_cast<std::size_t>(i)] + dt * RC4X * ft_[static_cast<std::size_t>(i)] +
                 (RC41 * g1(i) + RC42 * g2(i) + RC43 * g3(i)) / dt;
    g4 = lu.solve(rhs);

    for (int i = 0; i < dim_; ++i) {
        x_new_[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + RB1 * g1(i) +
                                              RB2 * g2(i) + RB3 * g3(i) + RB4 * g4(i);
        x_err_[static_cast<std::size_t>(i)] = RE1 * g1(i) + RE2 * g2(i) + RE3 * g3(i) + RE4 * g4(i);
    }
    if (!std::all_of(x_new_.begin(), x_new_.end(), [](double v) { return std::isfinite(v); }))
        return {false, false, 1e10};
    if (!stage_ok(t + dt, x_new_)) return {false, true, 0.0};

    double err = error_norm(x);
    return {err <= 1.0, false, err};
}

std::pair<double, double> Integrator::single_step(const RhsFn& f, const GuardFn& guard, double& t,
                                                  std::vector<double>& x, double dt_try) {
    const bool ros = opts_.method == StepMethod::Rosenbrock4;
    const double order_exp = ros ? 1.0 / 4.0 : 1.0 / 5.0;
    if (!(dt_try > 0)) throw Error("step size must be positive");
    double dt = std::min(dt_try, opts_.dt_max);  // landing steps may go below dt_min

    for (;;) {
        Attempt a;
        try {
            a = ros ? try_rosenbrock(f, guard, t, dt, x) : try_dopri(f, guard, t, dt, x);
        } catch (const NonFiniteResult&) {
            a = {false, false, 1e12};  // wild trial state; shrink and retry
        }
        if (a.accepted) {
            t += dt;
            std::swap(x, x_new_);
            for (double v : x)
                if (std::fabs(v) > opts_.blowup_norm) throw FiniteEscapeSuspected(t);
            double factor = a.error > 0 ? 0.9 * std::pow(a.error, -order_exp) : 5.0;
            double dt_next = std::clamp(dt * std::clamp(factor, 0.2, 5.0), opts_.dt_min, opts_.dt_max);
            dt_ = dt_next;
            return {dt, dt_next};
        }
        double shrink = a.guard_hit ? 0.5 : std::clamp(0.9 * std::pow(a.error, -order_exp), 0.1, 0.5);
        double dt_new = dt * shrink;
        if (dt_new < opts_.dt_min) {
            if (dt > opts_.dt_min) {
                dt = opts_.dt_min;  // one last try at the floor
                continue;
            }
            throw StepUnderflow(t);
        }
        dt = dt_new;
    }
}

void Integrator::advance_to(const RhsFn& f, const GuardFn& guard, double& t, double t_target,
                            std::vector<double>& x) {
    const double eps = 1e-12 * std::max(1.0, std::fabs(t_target));
    while (t_target - t > eps) {
        double remaining = t_target - t;
        double dt = dt_ > 0 ? dt_ : opts_.dt_max;
        dt = std::min(dt, remaining);
        if (dt > 0.9 * remaining) dt = remaining;  // land exactly on the target
        single_step(f, guard, t, x, dt);
    }
    t = t_target;
}

}  // namespace netfunnel
