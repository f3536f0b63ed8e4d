#include "vmbaro/sweep.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <ctime>
#include <ostream>
#include <sstream>

namespace vmbaro {

namespace {
constexpr double kE = 2.718281828459045235;
constexpr double kPi = 3.141592653589793238;
} // namespace

void GridSpec::validate() const {
    if (!(step > 0.0)) throw InputError("GridSpec: step must be > 0");
    if (!(d_lo >= step) || !(tau_lo >= step))
        throw InputError("GridSpec: lower bounds must be >= step");
    if (!(d_hi > d_lo) || !(tau_hi > tau_lo))
        throw InputError("GridSpec: upper bounds must exceed lower bounds");
}

int GridSpec::n_d() const {
    return static_cast<int>(std::floor((d_hi - d_lo) / step + 1e-9)) + 1;
}

int GridSpec::n_tau() const {
    return static_cast<int>(std::floor((tau_hi - tau_lo) / step + 1e-9)) + 1;
}

SweepExperiment SweepExperiment::homogeneous() {
    SweepExperiment e;
    e.horizon = 200.0;
    e.perturbation = 1e6;
    e.t_cut = 0.0;
    e.solver.rel_tol = 1e-8;
    e.solver.abs_tol = {1e-9, 1e-9};
    e.solver.max_step = 1.0;
    e.solver.initial_step = 1e-3;
    e.classifier.resample_dt = 0.02;
    return e;
}

SweepExperiment SweepExperiment::nonhomogeneous() {
    SweepExperiment e;
    e.horizon = 120.0;
    e.perturbation = 0.0;  // starts at the forced equilibrium
    e.t_cut_after_te = 2.0;
    e.solver.rel_tol = 1e-8;
    e.solver.abs_tol = {1e-10, 1e-8};
    e.solver.max_step = 1.0;
    e.solver.initial_step = 1e-3;
    e.classifier.resample_dt = 0.02;
    return e;
}

RegionClass classify_cell(double D_s, double tau_s, const ParameterSet& base, SweepMode mode,
                          const ForcingModel* fm, const SweepExperiment& exp, bool& failed) {
    failed = false;
    ParameterSet p = base;
    p.D_s = D_s;
    p.tau_s = tau_s;

    ClassifierConfig ccfg = exp.classifier;
    SolverConfig scfg = exp.solver;
    double horizon = exp.horizon;

    ReducedState x0;
    std::optional<ForcingModel> cell_fm;
    if (mode == SweepMode::Nonhomogeneous) {
        if (!fm) throw InputError("run_sweep: nonhomogeneous mode requires a ForcingModel");
        cell_fm.emplace(fm->with_params(p));
        x0 = reduced_initial_state(p, fm->baseline());
        ccfg.t_cut = p.t_e + exp.t_cut_after_te;
        horizon = std::min(horizon, fm->t_max());
    } else {
        if (exp.perturbation == 0.0)
            throw InputError("run_sweep: homogeneous mode requires a nonzero perturbation");
        x0 = {exp.perturbation, 0.0};
        ccfg.t_cut = exp.t_cut;
    }
    if (!(horizon > ccfg.t_cut))
        throw InputError("run_sweep: horizon does not reach past t_cut");

    const double guard = ccfg.divergence_factor * std::max(std::abs(x0[kRTs]), ccfg.amp_floor);
    scfg.stop_when = [guard](double, std::span<const double> x) {
        return !std::isfinite(x[0]) || std::abs(x[0]) > guard;
    };

    DdeSystem sys = make_reduced_system(p, cell_fm ? &*cell_fm : nullptr, x0);
    Classification cls;
    try {
        Trajectory traj = integrate(sys, 0.0, horizon, scfg);
        cls = classify_trajectory(traj, kRTs, ccfg);
    } catch (const SolverError&) {
        // strongly unstable cells may defeat the integrator before the
        // divergence guard trips; record and move on
        failed = true;
        return RegionClass::Unstable;
    }

    if (cls.behavior == BehaviorClass::Sink && mode == SweepMode::Homogeneous) {
        return std::abs(kE * D_s - tau_s) <= 1e-12 * tau_s ? RegionClass::CriticallyDampedSink
                                                           : RegionClass::OverdampedSink;
    }
    return to_region_class(cls.behavior);
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

RegionMap make_map_shell(const GridSpec& grid, SweepMode mode, const SweepExperiment& exp) {
    grid.validate();
    RegionMap map;
    map.grid = grid;
    map.mode = mode;
    const std::size_t cells = static_cast<std::size_t>(grid.n_d()) *
                              static_cast<std::size_t>(grid.n_tau());
    map.classes.assign(cells, RegionClass::OverdampedSink);
    map.failed.assign(cells, 0);

    std::ostringstream cfg;
    cfg << grid.d_lo << ':' << grid.d_hi << ':' << grid.tau_lo << ':' << grid.tau_hi << ':'
        << grid.step << ':' << static_cast<int>(mode) << ':' << exp.horizon << ':'
        << exp.perturbation << ':' << exp.t_cut << ':' << exp.t_cut_after_te << ':'
        << exp.solver.rel_tol << ':' << exp.classifier.resample_dt;
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(cfg.str())));
    map.provenance = buf;

    std::time_t now = std::time(nullptr);
    char ts[32];
    std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    map.timestamp = ts;
    return map;
}

} // namespace

RegionMap run_sweep_serial(const GridSpec& grid, const ParameterSet& base, SweepMode mode,
                           const ForcingModel* fm, const SweepExperiment& exp) {
    RegionMap map = make_map_shell(grid, mode, exp);
    const int nd = grid.n_d(), nt = grid.n_tau();
    for (int i = 0; i < nd; ++i) {
        for (int j = 0; j < nt; ++j) {
            bool failed = false;
            const RegionClass c =
                classify_cell(grid.d_at(i), grid.tau_at(j), base, mode, fm, exp, failed);
            const std::size_t idx =
                static_cast<std::size_t>(i) * static_cast<std::size_t>(nt) + static_cast<std::size_t>(j);
            map.classes[idx] = c;
            map.failed[idx] = failed ? 1 : 0;
        }
    }
    return map;
}

RegionMap run_sweep(const GridSpec& grid, const ParameterSet& base, SweepMode mode,
                    const ForcingModel* fm, const SweepExperiment& exp, int workers) {
    if (workers < 1) throw InputError("run_sweep: worker count must be >= 1");
    if (workers == 1) return run_sweep_serial(grid, base, mode, fm, exp);

#ifdef _OPENMP
    RegionMap map = make_map_shell(grid, mode, exp);
    const int nd = grid.n_d(), nt = grid.n_tau();
    std::string error_msg;

#pragma omp parallel for collapse(2) schedule(dynamic, 8) num_threads(workers)
    for (int i = 0; i < nd; ++i) {
        for (int j = 0; j < nt; ++j) {
            try {
                bool failed = false;
                const RegionClass c =
                    classify_cell(grid.d_at(i), grid.tau_at(j), base, mode, fm, exp, failed);
                const std::size_t idx = static_cast<std::size_t>(i) * static_cast<std::size_t>(nt) +
                                        static_cast<std::size_t>(j);
                map.classes[idx] = c;
                map.failed[idx] = failed ? 1 : 0;
            } catch (const std::exception& e) {
#pragma omp critical
                if (error_msg.empty())
                    error_msg = "cell (D_s=" + std::to_string(grid.d_at(i)) +
                                ", tau_s=" + std::to_string(grid.tau_at(j)) + "): " + e.what();
            }
        }
    }
    if (!error_msg.empty()) throw Error("run_sweep aborted at " + error_msg);
    return map;
#else
    return run_sweep_serial(grid, base, mode, fm, exp);
#endif
}

namespace {

bool is_sink(RegionClass c) {
    return c == RegionClass::OverdampedSink || c == RegionClass::CriticallyDampedSink;
}

// Scans column i from high tau downward for the first cell matching
// `pred`; returns -1 when absent.
template <class Pred>
int first_from_top(const RegionMap& map, int i, Pred pred) {
    for (int j = map.grid.n_tau() - 1; j >= 0; --j)
        if (pred(map.at(i, j))) return j;
    return -1;
}

void finalize(RayComparison& r) {
    if (r.deviations.empty()) return;
    double sum = 0.0, sum_abs = 0.0;
    int within = 0;
    for (auto& [i, d] : r.deviations) {
        sum += d;
        sum_abs += std::abs(d);
        r.max_abs = std::max(r.max_abs, std::abs(d));
        if (std::abs(d) <= 1.0) ++within;
    }
    r.columns_detected = static_cast<int>(r.deviations.size());
    r.mean_signed = sum / r.columns_detected;
    r.mean_abs = sum_abs / r.columns_detected;
    r.frac_within_one = static_cast<double>(within) / r.columns_detected;
}

} // namespace

BoundaryReport compare_maps(const RegionMap& map) {
    map.grid.validate();
    BoundaryReport report;
    const GridSpec& g = map.grid;

    for (int i = 0; i < g.n_d(); ++i) {
        const double d = g.d_at(i);

        // transcritical ray tau = e d
        const double tau_sink = kE * d;
        if (tau_sink >= g.tau_lo + g.step && tau_sink <= g.tau_hi - g.step) {
            ++report.sink_focus.columns;
            const int j_exp = static_cast<int>(std::floor((tau_sink - g.tau_lo) / g.step));
            const int j_num = first_from_top(map, i, [](RegionClass c) { return !is_sink(c); });
            if (j_num >= 0)
                report.sink_focus.deviations.emplace_back(i, static_cast<double>(j_exp - j_num));
        }

        // Hopf ray tau = 2 d / pi
        const double tau_hopf = 2.0 * d / kPi;
        if (tau_hopf >= g.tau_lo + g.step && tau_hopf <= g.tau_hi - g.step) {
            ++report.focus_unstable.columns;
            const int j_exp = static_cast<int>(std::floor((tau_hopf - g.tau_lo) / g.step));
            const int j_num = first_from_top(map, i, [](RegionClass c) {
                return c == RegionClass::LimitCycle || c == RegionClass::Unstable;
            });
            if (j_num >= 0)
                report.focus_unstable.deviations.emplace_back(i, static_cast<double>(j_exp - j_num));
        }
    }
    finalize(report.sink_focus);
    finalize(report.focus_unstable);
    report.full_coverage =
        report.sink_focus.columns > 0 && report.focus_unstable.columns > 0;
    return report;
}

void write_region_csv(std::ostream& os, const RegionMap& map, bool with_timestamp) {
    os << "# mode=" << (map.mode == SweepMode::Homogeneous ? "homogeneous" : "nonhomogeneous")
       << " provenance=" << map.provenance;
    if (with_timestamp) os << " generated=" << map.timestamp;
    os << "\nD_s,tau_s,class_code\n";
    char buf[32];
    for (int i = 0; i < map.grid.n_d(); ++i) {
        for (int j = 0; j < map.grid.n_tau(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", map.grid.d_at(i));
            os << buf << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", map.grid.tau_at(j));
            os << buf << ',' << static_cast<int>(map.at(i, j)) << '\n';
        }
    }
}

void write_region_pgm(std::ostream& os, const RegionMap& map, bool with_timestamp) {
    os << "P2\n# mode=" << (map.mode == SweepMode::Homogeneous ? "homogeneous" : "nonhomogeneous")
       << " provenance=" << map.provenance;
    if (with_timestamp) os << " generated=" << map.timestamp;
    os << "\n" << map.grid.n_d() << ' ' << map.grid.n_tau() << "\n255\n";
    for (int j = map.grid.n_tau() - 1; j >= 0; --j) {
        for (int i = 0; i < map.grid.n_d(); ++i) {
            const int code = static_cast<int>(map.at(i, j));
            os << (code * 255 + 2) / 4;
            os << (i + 1 < map.grid.n_d() ? ' ' : '\n');
        }
    }
}

void write_boundary_report(std::ostream& os, const BoundaryReport& report) {
    nlohmann::json j;
    auto dump = [](const RayComparison& r) {
        nlohmann::json out;
        out["columns"] = r.columns;
        out["columns_detected"] = r.columns_detected;
        out["mean_signed_cells"] = r.mean_signed;
        out["mean_abs_cells"] = r.mean_abs;
        out["max_abs_cells"] = r.max_abs;
        out["frac_within_one_cell"] = r.frac_within_one;
        return out;
    };
    j["sink_focus"] = dump(report.sink_focus);
    j["focus_unstable"] = dump(report.focus_unstable);
    j["full_coverage"] = report.full_coverage;
    os << j.dump(2) << '\n';
}

} // namespace vmbaro
