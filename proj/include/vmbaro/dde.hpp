#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vmbaro/errors.hpp"

namespace vmbaro {

/// Right-hand side of dx/dt = f(t, x(t), x(t - delay)).
/// Writes the derivative into `dxdt`. Must be deterministic.
using Rhs = std::function<void(double t, std::span<const double> x,
                               std::span<const double> x_delayed,
                               std::span<double> dxdt)>;

/// Optional analytic Jacobian df/dx (w.r.t. the undelayed state only),
/// written row-major into `jac` (dim x dim).
using RhsJacobian = std::function<void(double t, std::span<const double> x,
                                       std::span<const double> x_delayed,
                                       std::span<double> jac)>;

/// A DDE initial-value problem with one constant discrete delay and
/// constant pre-history x(t) = history on [t0 - delay, t0].
struct DdeSystem {
    int dimension = 0;
    Rhs rhs;
    double delay = 0.0;
    std::vector<double> history;      // constant history vector, size == dimension
    std::vector<double> breakpoints;  // known derivative discontinuities, strictly increasing
    RhsJacobian jacobian;             // optional; finite differences otherwise

    void validate() const;
};

struct SolverConfig {
    double rel_tol = 1e-8;
    std::vector<double> abs_tol;   // per-state; empty means uniform 1e-10
    double max_step = 1.0;
    double initial_step = 1e-3;

    /// Delay-induced discontinuities t0 + k*delay are inserted as mesh
    /// points for k = 1..max_delay_breakpoints (all of them by default).
    std::size_t max_delay_breakpoints = static_cast<std::size_t>(-1);

    /// Optional early-stop predicate checked after each accepted step.
    /// Returning true truncates the trajectory at that mesh point.
    std::function<bool(double t, std::span<const double> x)> stop_when;

    void validate(int dimension) const;
    double abs_tol_at(int i) const { return abs_tol.empty() ? 1e-10 : abs_tol[static_cast<std::size_t>(i)]; }
};

namespace detail {
struct TrajAccess;
}

/// Solution of one DDE integration: mesh, states, and the collocation
/// polynomial of each step as dense output.
class Trajectory {
public:
    int dimension() const { return dim_; }
    std::size_t size() const { return mesh_.size(); }
    std::span<const double> mesh() const { return mesh_; }
    double t_begin() const { return mesh_.front(); }
    double t_end() const { return mesh_.back(); }

    /// State vector stored at mesh point k.
    std::span<const double> state(std::size_t k) const {
        return {states_.data() + k * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }

    /// Dense evaluation at t in [t_begin, t_end]; throws InputError outside.
    void eval(double t, std::span<double> out) const;
    std::vector<double> eval(double t) const;
    double eval_component(double t, int component) const;

    /// True when integration was halted early by SolverConfig::stop_when.
    bool truncated() const { return truncated_; }

    /// CSV export: header `t,<name_0>,...`, 17 significant digits.
    void write_csv(std::ostream& os, std::span<const std::string> state_names) const;

private:
    friend struct detail::TrajAccess;

    std::size_t locate_step(double t) const;

    int dim_ = 0;
    bool truncated_ = false;
    std::vector<double> mesh_;    // accepted step endpoints, mesh_[0] = t0
    std::vector<double> states_;  // dim per mesh point
    // Newton-form coefficients of the cubic collocation polynomial,
    // 4*dim per step (steps = mesh.size() - 1).
    std::vector<double> dense_;
};

/// Integrate `system` over [t0, tf] with a 3-stage Radau IIA method
/// (order 5) and its collocation polynomial as continuous extension.
/// Throws SolverError on numerical failure.
Trajectory integrate(const DdeSystem& system, double t0, double tf,
                     const SolverConfig& config = {});

/// Free-function form of Trajectory::eval.
std::vector<double> dense_eval(const Trajectory& traj, double t);

} // namespace vmbaro
