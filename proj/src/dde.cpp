#include "vmbaro/dde.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace vmbaro {

namespace detail {
struct TrajAccess {
    static int& dim(Trajectory& t) { return t.dim_; }
    static bool& truncated(Trajectory& t) { return t.truncated_; }
    static std::vector<double>& mesh(Trajectory& t) { return t.mesh_; }
    static std::vector<double>& states(Trajectory& t) { return t.states_; }
    static std::vector<double>& dense(Trajectory& t) { return t.dense_; }
};
} // namespace detail

namespace {

// 3-stage Radau IIA tableau (order 5).
constexpr double kC1 = 0.1550510257216821902;
constexpr double kC2 = 0.6449489742783178098;

constexpr double kA[3][3] = {
    {0.1968154772236604259, -0.06553542585019838811, 0.02377097434822015242},
    {0.394424314739087277, 0.292073411665228463, -0.0415487521259979302},
    {0.3764030627004672751, 0.5124858261884216138, 0.1111111111111111111},
};

// Real eigenvalue of A^{-1} and the order-3 embedded-error weights of
// the classical Radau5 estimator.
constexpr double kGamma = 3.637834252744495732;
constexpr double kD1 = -10.04880939982741556;
constexpr double kD2 = 1.382142733160748896;
constexpr double kD3 = -0.3333333333333333333;

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxNewton = 8;
constexpr int kMaxOuter = 10;

double breakpoint_snap(double t) { return 32.0 * kEps * std::max(1.0, std::abs(t)); }

// Evaluates the Newton-form cubic with nodes {0, c1, c2, 1}.
inline double newton_form(const double* d, double theta) {
    return d[0] + theta * (d[1] + (theta - kC1) * (d[2] + (theta - kC2) * d[3]));
}

// Divided differences for values (v0, v1, v2, v3) at nodes {0, c1, c2, 1}.
inline void divided_differences(double v0, double v1, double v2, double v3, double* d) {
    const double f01 = (v1 - v0) / kC1;
    const double f12 = (v2 - v1) / (kC2 - kC1);
    const double f23 = (v3 - v2) / (1.0 - kC2);
    const double f012 = (f12 - f01) / kC2;
    const double f123 = (f23 - f12) / (1.0 - kC1);
    d[0] = v0;
    d[1] = f01;
    d[2] = f012;
    d[3] = f123 - f012;  // divided by (1 - 0) == 1
}

} // namespace

void DdeSystem::validate() const {
    if (dimension < 1) throw InputError("DdeSystem: dimension must be >= 1");
    if (!(delay > 0.0)) throw InputError("DdeSystem: delay must be > 0");
    if (!rhs) throw InputError("DdeSystem: rhs not set");
    if (history.size() != static_cast<std::size_t>(dimension))
        throw InputError("DdeSystem: history size does not match dimension");
    for (std::size_t i = 1; i < breakpoints.size(); ++i)
        if (!(breakpoints[i] > breakpoints[i - 1]))
            throw InputError("DdeSystem: breakpoints must be strictly increasing");
}

void SolverConfig::validate(int dimension) const {
    if (!(rel_tol > 0.0) || rel_tol > 1e-2)
        throw InputError("SolverConfig: rel_tol must be in (0, 1e-2]");
    if (!(max_step > 0.0) || !(initial_step > 0.0))
        throw InputError("SolverConfig: step limits must be > 0");
    if (!abs_tol.empty()) {
        if (abs_tol.size() != static_cast<std::size_t>(dimension))
            throw InputError("SolverConfig: abs_tol size does not match system dimension");
        for (double a : abs_tol)
            if (!(a > 0.0)) throw InputError("SolverConfig: abs_tol entries must be > 0");
    }
}

std::size_t Trajectory::locate_step(double t) const {
    const double snap = breakpoint_snap(t);
    if (t < mesh_.front() - snap || t > mesh_.back() + snap)
        throw InputError("dense_eval: t = " + std::to_string(t) + " outside trajectory span [" +
                         std::to_string(mesh_.front()) + ", " + std::to_string(mesh_.back()) + "]");
    // upper_bound - 1: step k covers [mesh[k], mesh[k+1]]
    auto it = std::upper_bound(mesh_.begin(), mesh_.end(), t);
    std::size_t k = static_cast<std::size_t>(std::distance(mesh_.begin(), it));
    if (k > 0) --k;
    if (k >= mesh_.size() - 1) k = mesh_.size() - 2;
    return k;
}

void Trajectory::eval(double t, std::span<double> out) const {
    const std::size_t k = locate_step(t);
    const double h = mesh_[k + 1] - mesh_[k];
    const double theta = (t - mesh_[k]) / h;
    const double* d = dense_.data() + k * 4 * static_cast<std::size_t>(dim_);
    for (int i = 0; i < dim_; ++i) out[static_cast<std::size_t>(i)] = newton_form(d + 4 * i, theta);
}

std::vector<double> Trajectory::eval(double t) const {
    std::vector<double> out(static_cast<std::size_t>(dim_));
    eval(t, out);
    return out;
}

double Trajectory::eval_component(double t, int component) const {
    const std::size_t k = locate_step(t);
    const double h = mesh_[k + 1] - mesh_[k];
    const double theta = (t - mesh_[k]) / h;
    const double* d = dense_.data() + (k * 4 * static_cast<std::size_t>(dim_)) + 4 * static_cast<std::size_t>(component);
    return newton_form(d, theta);
}

std::vector<double> dense_eval(const Trajectory& traj, double t) { return traj.eval(t); }

namespace {

// One in-flight Radau step working set.
struct Workspace {
    int n;
    Eigen::MatrixXd jac;        // n x n
    Eigen::MatrixXd newton_mat; // 3n x 3n: I - h (A (x) J)
    Eigen::PartialPivLU<Eigen::MatrixXd> newton_lu;
    Eigen::MatrixXd err_mat;    // n x n: I - (h/gamma) J
    Eigen::PartialPivLU<Eigen::MatrixXd> err_lu;
    Eigen::VectorXd g;          // 3n residual
    Eigen::VectorXd dz;         // 3n update
    std::vector<double> z;      // 3n stage increments
    std::vector<double> stage_x, stage_xd, stage_f; // n each (scratch)
    std::vector<double> f_stages;                   // 3n stage derivatives
    std::vector<double> zd_frozen;                  // 3n delayed stage states
    std::vector<double> f0;                         // n, derivative at step start
    std::vector<double> scale;                      // n error scale

    explicit Workspace(int dim)
        : n(dim), jac(dim, dim), newton_mat(3 * dim, 3 * dim), err_mat(dim, dim),
          g(3 * dim), dz(3 * dim), z(static_cast<std::size_t>(3 * dim), 0.0),
          stage_x(static_cast<std::size_t>(dim)), stage_xd(static_cast<std::size_t>(dim)),
          stage_f(static_cast<std::size_t>(dim)), f_stages(static_cast<std::size_t>(3 * dim)),
          zd_frozen(static_cast<std::size_t>(3 * dim)), f0(static_cast<std::size_t>(dim)),
          scale(static_cast<std::size_t>(dim)) {}
};

class Integrator {
public:
    Integrator(const DdeSystem& sys, double t0, double tf, const SolverConfig& cfg)
        : sys_(sys), cfg_(cfg), t0_(t0), tf_(tf), n_(sys.dimension), ws_(sys.dimension) {
        sys_.validate();
        cfg_.validate(n_);
        if (!(tf > t0) || t0 < 0.0) throw InputError("integrate: requires tf > t0 >= 0");
        build_stops();
        detail::TrajAccess::dim(traj_) = n_;
        detail::TrajAccess::mesh(traj_).push_back(t0_);
        auto& st = detail::TrajAccess::states(traj_);
        st.insert(st.end(), sys_.history.begin(), sys_.history.end());
        y_ = sys_.history;
    }

    Trajectory run() {
        t_ = t0_;
        double h = std::min({cfg_.initial_step, cfg_.max_step, tf_ - t0_});
        bool last_rejected = false;
        bool first = true;

        while (t_ < tf_ - breakpoint_snap(tf_)) {
            const double stop = next_stop();
            if (h > stop - t_ - breakpoint_snap(stop)) h = stop - t_;
            h = std::min(h, cfg_.max_step);
            if (h < min_step()) throw SolverError("step size underflow", t_);

            int newton_iters = 0;
            if (!attempt_stages(h, newton_iters)) {
                h *= 0.5;
                last_rejected = true;
                continue;
            }

            const double err = error_estimate(h, first || last_rejected);
            if (err < 1.0) {
                accept_step(h, stop);
                if (traj_.truncated()) break;
                first = false;
                // classical controller with a Newton-effort safety factor
                const double fac = 0.9 * (2.0 * kMaxNewton + 1.0) / (2.0 * kMaxNewton + newton_iters);
                double hnew = h * std::clamp(fac * std::pow(err, -0.25), 0.2, 8.0);
                if (last_rejected) hnew = std::min(hnew, h);
                last_rejected = false;
                h = std::min(hnew, cfg_.max_step);
            } else {
                h *= std::clamp(0.9 * std::pow(err, -0.25), 0.1, 0.9);
                last_rejected = true;
            }
        }
        return std::move(traj_);
    }

private:
    double min_step() const { return 16.0 * kEps * std::max(std::abs(t_), 1.0); }

    void build_stops() {
        const double snap = breakpoint_snap(tf_);
        for (double b : sys_.breakpoints)
            if (b > t0_ + snap && b < tf_ - snap) stops_.push_back(b);
        for (std::size_t k = 1; k <= cfg_.max_delay_breakpoints; ++k) {
            const double tb = t0_ + static_cast<double>(k) * sys_.delay;
            if (tb >= tf_ - snap) break;
            stops_.push_back(tb);
        }
        stops_.push_back(tf_);
        std::sort(stops_.begin(), stops_.end());
        // merge near-coincident stops
        std::vector<double> merged;
        for (double s : stops_)
            if (merged.empty() || s - merged.back() > breakpoint_snap(s)) merged.push_back(s);
        stops_ = std::move(merged);
    }

    double next_stop() const {
        auto it = std::upper_bound(stops_.begin(), stops_.end(), t_ + breakpoint_snap(t_));
        return it == stops_.end() ? tf_ : *it;
    }

    bool is_stop(double t) const {
        auto it = std::lower_bound(stops_.begin(), stops_.end(), t - breakpoint_snap(t));
        return it != stops_.end() && std::abs(*it - t) <= breakpoint_snap(t);
    }

    // Evaluation time nudged off step-boundary breakpoints so the rhs is
    // always sampled one-sided inside the current step.
    double shifted_time(double t, double h) const {
        const double eps_t = 4.0 * kEps * std::max(1.0, std::abs(t));
        if (std::abs(t - t_) <= breakpoint_snap(t) && is_stop(t_)) return t_ + eps_t;
        const double tend = t_ + h;
        if (std::abs(t - tend) <= breakpoint_snap(t) && is_stop(tend)) return tend - eps_t;
        return t;
    }

    void call_rhs(double t, std::span<const double> x, std::span<const double> xd,
                  std::span<double> out) {
        sys_.rhs(t, x, xd, out);
        for (double v : out)
            if (!std::isfinite(v)) throw SolverError("non-finite right-hand side", t);
    }

    // Delayed state at time td. States within the current trial step are
    // interpolated from the latest stage iterate (overlapping delay).
    void delayed_state(double td, double h, bool trial_valid, std::span<double> out) {
        if (td <= t0_ + breakpoint_snap(t0_)) {
            std::copy(sys_.history.begin(), sys_.history.end(), out.begin());
            return;
        }
        if (td <= t_ + breakpoint_snap(td)) {
            traj_.eval(std::min(td, t_), out);
            return;
        }
        // inside the current (incomplete) step
        if (!trial_valid) {
            std::copy(y_.begin(), y_.end(), out.begin());
            return;
        }
        const double theta = std::min((td - t_) / h, 1.0);
        for (int i = 0; i < n_; ++i)
            out[static_cast<std::size_t>(i)] = newton_form(trial_dense_.data() + 4 * i, theta);
    }

    void update_trial_dense(double h) {
        (void)h;
        trial_dense_.resize(static_cast<std::size_t>(4 * n_));
        for (int i = 0; i < n_; ++i) {
            const double v0 = y_[static_cast<std::size_t>(i)];
            divided_differences(v0, v0 + ws_.z[static_cast<std::size_t>(i)],
                                v0 + ws_.z[static_cast<std::size_t>(n_ + i)],
                                v0 + ws_.z[static_cast<std::size_t>(2 * n_ + i)],
                                trial_dense_.data() + 4 * i);
        }
    }

    void numerical_jacobian(double t, std::span<const double> x, std::span<const double> xd) {
        std::vector<double>& fx = ws_.stage_f;
        call_rhs(t, x, xd, fx);
        std::vector<double> xp(x.begin(), x.end());
        std::vector<double> fp(static_cast<std::size_t>(n_));
        double xmax = 0.0;
        for (double v : x) xmax = std::max(xmax, std::abs(v));
        for (int k = 0; k < n_; ++k) {
            const double dx = std::sqrt(kEps) * std::max({std::abs(x[static_cast<std::size_t>(k)]), xmax, 1e-5});
            xp[static_cast<std::size_t>(k)] += dx;
            call_rhs(t, xp, xd, fp);
            xp[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(k)];
            for (int i = 0; i < n_; ++i)
                ws_.jac(i, k) = (fp[static_cast<std::size_t>(i)] - fx[static_cast<std::size_t>(i)]) / dx;
        }
    }

    void form_jacobian(double h) {
        const double ts = shifted_time(t_, h);
        delayed_state(ts - sys_.delay, h, false, ws_.stage_xd);
        if (sys_.jacobian) {
            std::vector<double> jflat(static_cast<std::size_t>(n_ * n_));
            sys_.jacobian(ts, y_, ws_.stage_xd, jflat);
            for (int i = 0; i < n_; ++i)
                for (int j = 0; j < n_; ++j) ws_.jac(i, j) = jflat[static_cast<std::size_t>(i * n_ + j)];
        } else {
            numerical_jacobian(ts, y_, ws_.stage_xd);
        }
        call_rhs(ts, y_, ws_.stage_xd, ws_.f0);

        ws_.newton_mat.setIdentity();
        for (int bi = 0; bi < 3; ++bi)
            for (int bj = 0; bj < 3; ++bj)
                ws_.newton_mat.block(bi * n_, bj * n_, n_, n_) -= (h * kA[bi][bj]) * ws_.jac;
        ws_.newton_lu.compute(ws_.newton_mat);

        ws_.err_mat = Eigen::MatrixXd::Identity(n_, n_) - (h / kGamma) * ws_.jac;
        ws_.err_lu.compute(ws_.err_mat);
    }

    void error_scale() {
        for (int i = 0; i < n_; ++i) {
            const std::size_t si = static_cast<std::size_t>(i);
            const double ynew = y_[si] + ws_.z[static_cast<std::size_t>(2 * n_) + si];
            ws_.scale[si] = cfg_.abs_tol_at(i) +
                            cfg_.rel_tol * std::max(std::abs(y_[si]), std::abs(ynew));
        }
    }

    double scaled_norm(const Eigen::VectorXd& v) const {
        double s = 0.0;
        for (int bi = 0; bi < 3; ++bi)
            for (int i = 0; i < n_; ++i) {
                const double q = v(bi * n_ + i) / ws_.scale[static_cast<std::size_t>(i)];
                s += q * q;
            }
        return std::sqrt(s / static_cast<double>(3 * n_));
    }

    // Frozen delayed stage states for the current outer iteration.
    void freeze_delayed(double h, bool trial_valid, bool& any_overlap) {
        const double c[3] = {kC1, kC2, 1.0};
        any_overlap = false;
        for (int s = 0; s < 3; ++s) {
            const double td = t_ + c[s] * h - sys_.delay;
            if (td > t_ + breakpoint_snap(td)) any_overlap = true;
            delayed_state(td, h, trial_valid,
                          std::span<double>(ws_.zd_frozen.data() + s * n_, static_cast<std::size_t>(n_)));
        }
    }

    // Simplified Newton for the stage system with delayed values frozen.
    bool newton_solve(double h, int& iters) {
        const double c[3] = {kC1, kC2, 1.0};
        const double fnewt = std::max(10.0 * kEps / cfg_.rel_tol,
                                      std::min(0.03, std::sqrt(cfg_.rel_tol)));
        double last_norm = -1.0;
        for (iters = 1; iters <= kMaxNewton; ++iters) {
            for (int s = 0; s < 3; ++s) {
                const double ts = shifted_time(t_ + c[s] * h, h);
                for (int i = 0; i < n_; ++i)
                    ws_.stage_x[static_cast<std::size_t>(i)] =
                        y_[static_cast<std::size_t>(i)] + ws_.z[static_cast<std::size_t>(s * n_ + i)];
                call_rhs(ts, ws_.stage_x,
                         std::span<const double>(ws_.zd_frozen.data() + s * n_, static_cast<std::size_t>(n_)),
                         std::span<double>(ws_.f_stages.data() + s * n_, static_cast<std::size_t>(n_)));
            }
            for (int s = 0; s < 3; ++s)
                for (int i = 0; i < n_; ++i) {
                    double acc = ws_.z[static_cast<std::size_t>(s * n_ + i)];
                    for (int j = 0; j < 3; ++j)
                        acc -= h * kA[s][j] * ws_.f_stages[static_cast<std::size_t>(j * n_ + i)];
                    ws_.g(s * n_ + i) = -acc;
                }
            ws_.dz = ws_.newton_lu.solve(ws_.g);
            for (int k = 0; k < 3 * n_; ++k) ws_.z[static_cast<std::size_t>(k)] += ws_.dz(k);

            error_scale();
            const double dnorm = scaled_norm(ws_.dz);
            if (dnorm < fnewt) return true;
            if (last_norm >= 0.0 && dnorm > 2.0 * last_norm) return false;  // diverging
            last_norm = dnorm;
        }
        return false;
    }

    // Solves the stage system, iterating the delayed coupling when the
    // step overlaps the delay. Returns false to request a halved step.
    bool attempt_stages(double h, int& newton_iters) {
        std::fill(ws_.z.begin(), ws_.z.end(), 0.0);
        form_jacobian(h);

        bool trial_valid = false;
        for (int outer = 0; outer < kMaxOuter; ++outer) {
            bool any_overlap = false;
            freeze_delayed(h, trial_valid, any_overlap);
            std::vector<double> z_prev = ws_.z;
            if (!newton_solve(h, newton_iters)) return false;
            if (!any_overlap) return true;

            double delta = 0.0;
            for (int k = 0; k < 3 * n_; ++k) {
                const double q = (ws_.z[static_cast<std::size_t>(k)] - z_prev[static_cast<std::size_t>(k)]) /
                                 ws_.scale[static_cast<std::size_t>(k % n_)];
                delta = std::max(delta, std::abs(q));
            }
            update_trial_dense(h);
            trial_valid = true;
            if (outer > 0 && delta < 0.01) return true;
        }
        return false;  // bisect the step
    }

    double error_estimate(double h, bool refine_allowed) {
        Eigen::VectorXd v(n_);
        for (int i = 0; i < n_; ++i)
            v(i) = (kD1 * ws_.z[static_cast<std::size_t>(i)] +
                    kD2 * ws_.z[static_cast<std::size_t>(n_ + i)] +
                    kD3 * ws_.z[static_cast<std::size_t>(2 * n_ + i)]) / kGamma +
                   (h / kGamma) * ws_.f0[static_cast<std::size_t>(i)];
        Eigen::VectorXd est = ws_.err_lu.solve(v);

        error_scale();
        auto rms = [&](const Eigen::VectorXd& e) {
            double s = 0.0;
            for (int i = 0; i < n_; ++i) {
                const double q = e(i) / ws_.scale[static_cast<std::size_t>(i)];
                s += q * q;
            }
            return std::sqrt(s / static_cast<double>(n_));
        };

        double err = rms(est);
        if (err >= 1.0 && refine_allowed) {
            // second pass of the classical estimator: re-evaluate f at the
            // perturbed start value to filter the rough first estimate
            std::vector<double> ypert(static_cast<std::size_t>(n_));
            for (int i = 0; i < n_; ++i)
                ypert[static_cast<std::size_t>(i)] = y_[static_cast<std::size_t>(i)] + est(i);
            const double ts = shifted_time(t_, h);
            delayed_state(ts - sys_.delay, h, false, ws_.stage_xd);
            std::vector<double> fr(static_cast<std::size_t>(n_));
            call_rhs(ts, ypert, ws_.stage_xd, fr);
            for (int i = 0; i < n_; ++i)
                v(i) += (h / kGamma) * (fr[static_cast<std::size_t>(i)] - ws_.f0[static_cast<std::size_t>(i)]);
            est = ws_.err_lu.solve(v);
            err = rms(est);
        }
        return std::max(err, 1e-10);
    }

    void accept_step(double h, double stop) {
        double tnew = t_ + h;
        if (std::abs(tnew - stop) <= breakpoint_snap(stop)) tnew = stop;  // land exactly

        auto& dense = detail::TrajAccess::dense(traj_);
        const std::size_t base = dense.size();
        dense.resize(base + static_cast<std::size_t>(4 * n_));
        for (int i = 0; i < n_; ++i) {
            const std::size_t si = static_cast<std::size_t>(i);
            divided_differences(y_[si], y_[si] + ws_.z[si],
                                y_[si] + ws_.z[static_cast<std::size_t>(n_) + si],
                                y_[si] + ws_.z[static_cast<std::size_t>(2 * n_) + si],
                                dense.data() + base + 4 * si);
        }
        for (int i = 0; i < n_; ++i)
            y_[static_cast<std::size_t>(i)] += ws_.z[static_cast<std::size_t>(2 * n_ + i)];
        t_ = tnew;
        detail::TrajAccess::mesh(traj_).push_back(t_);
        auto& st = detail::TrajAccess::states(traj_);
        st.insert(st.end(), y_.begin(), y_.end());
        if (cfg_.stop_when && cfg_.stop_when(t_, y_)) detail::TrajAccess::truncated(traj_) = true;
    }

    DdeSystem sys_;
    SolverConfig cfg_;
    double t0_, tf_;
    int n_;
    Workspace ws_;
    Trajectory traj_;
    std::vector<double> stops_;
    std::vector<double> y_;
    std::vector<double> trial_dense_;
    double t_ = 0.0;
};

} // namespace

Trajectory integrate(const DdeSystem& system, double t0, double tf, const SolverConfig& config) {
    Integrator integ(system, t0, tf, config);
    return integ.run();
}

void Trajectory::write_csv(std::ostream& os, std::span<const std::string> state_names) const {
    os << "t";
    for (int i = 0; i < dim_; ++i) {
        os << ',';
        if (static_cast<std::size_t>(i) < state_names.size())
            os << state_names[static_cast<std::size_t>(i)];
        else
            os << "x" << i;
    }
    os << '\n';
    char buf[32];
    for (std::size_t k = 0; k < mesh_.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", mesh_[k]);
        os << buf;
        for (int i = 0; i < dim_; ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", states_[k * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(i)]);
            os << ',' << buf;
        }
        os << '\n';
    }
}

} // namespace vmbaro
