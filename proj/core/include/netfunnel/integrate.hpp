#pragma once

#include <functional>
#include <span>
#include <vector>

#include "netfunnel/errors.hpp"

namespace netfunnel {

using RhsFn = std::function<void(double t, std::span<const double> x, std::span<double> dx)>;
/// Returns the largest |nu/psi| of the state; a trial step is rejected when
/// any probed state reaches 1 - boundary_guard.
using GuardFn = std::function<double(double t, std::span<const double> x)>;

enum class StepMethod {
    Dopri45,      // explicit Dormand-Prince 5(4)
    Rosenbrock4,  // linearly implicit 4(3), for funnel-stiff closed loops
};

struct IntegrateOptions {
    double rtol = 1e-6;
    double atol = 1e-9;
    double dt_min = 1e-12;
    double dt_max = 1.0;
    double boundary_guard = 1e-9;  // eps_g
    double blowup_norm = 1e8;
    StepMethod method = StepMethod::Dopri45;
};

/// Adaptive integrator advancing a flat state vector. Stateful only in its
/// step-size memory; all problem data comes through the callbacks.
class Integrator {
public:
    Integrator(int dim, const IntegrateOptions& opts);

    /// Advances (t, x) to exactly t_target. Throws StepUnderflow when the
    /// controller cannot proceed above dt_min (the caller decides whether
    /// that is a funnel breach) and FiniteEscapeSuspected past blowup_norm.
    void advance_to(const RhsFn& f, const GuardFn& guard, double& t, double t_target,
                    std::vector<double>& x);

    /// One trial-and-accept cycle starting from dt_try; returns
    /// (dt_used, dt_next). The state is advanced by dt_used.
    std::pair<double, double> single_step(const RhsFn& f, const GuardFn& guard, double& t,
                                          std::vector<double>& x, double dt_try);

    [[nodiscard]] double suggested_dt() const { return dt_; }
    void reset_dt() { dt_ = 0.0; }

private:
    struct Attempt {
        bool accepted = false;
        bool guard_hit = false;
        double error = 0.0;  // scaled error norm, accept at <= 1
    };
    Attempt try_dopri(const RhsFn& f, const GuardFn& guard, double t, double dt,
                      std::span<const double> x);
    Attempt try_rosenbrock(const RhsFn& f, const GuardFn& guard, double t, double dt,
                           std::span<const double> x);
    double error_norm(std::span<const double> x_old) const;

    int dim_;
    IntegrateOptions opts_;
    double dt_ = 0.0;

    // stage storage
    std::vector<std::vector<double>> k_;
    std::vector<double> x_stage_, x_new_, x_err_;
    // rosenbrock workspace
    std::vector<double> jac_, lu_, f0_, ft_, rhs_buf_;
    std::vector<int> piv_;
};

}  // namespace netfunnel
