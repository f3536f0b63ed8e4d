#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vmbaro/classifier.hpp"
#include "vmbaro/signal.hpp"

namespace vmbaro {

/// Rectangular (D_s, tau_s) grid, uniform step in both axes.
struct GridSpec {
    double d_lo = 0.1;
    double d_hi = 10.0;
    double tau_lo = 0.1;
    double tau_hi = 10.0;
    double step = 9.9 / 199.0;  // 200 x 200 over [0.1, 10]^2

    void validate() const;
    int n_d() const;
    int n_tau() const;
    double d_at(int i) const { return d_lo + step * i; }
    double tau_at(int j) const { return tau_lo + step * j; }
};

enum class SweepMode { Homogeneous, Nonhomogeneous };

/// Per-cell experiment definition. The homogeneous defaults use a large
/// initial perturbation and a 200 s horizon so the algorithm resolves
/// oscillations near the transcritical line above its absolute amplitude
/// floor; both are configurable.
struct SweepExperiment {
    double horizon = 200.0;       // s per cell
    double perturbation = 1e6;    // homogeneous T_s history
    double t_cut = 0.0;           // absolute analysis-window start
    double t_cut_after_te = 2.0;  // nonhomogeneous: t_cut = t_e + this
    SolverConfig solver;
    ClassifierConfig classifier;

    static SweepExperiment homogeneous();
    static SweepExperiment nonhomogeneous();
};

struct RegionMap {
    GridSpec grid;
    SweepMode mode = SweepMode::Homogeneous;
    std::vector<RegionClass> classes;  // indexed i_d * n_tau + j_tau
    std::vector<std::uint8_t> failed;  // per-cell integration-failure flag
    std::string provenance;            // config hash
    std::string timestamp;

    RegionClass at(int i_d, int j_tau) const {
        return classes[static_cast<std::size_t>(i_d) * static_cast<std::size_t>(grid.n_tau()) +
                       static_cast<std::size_t>(j_tau)];
    }
};

/// Evaluates the reduced system on every grid cell and classifies the
/// T_s response. Nonhomogeneous mode requires a ForcingModel whose span
/// covers the horizon. `workers` <= 1 runs the serial reference path.
RegionMap run_sweep(const GridSpec& grid, const ParameterSet& base, SweepMode mode,
                    const ForcingModel* fm, const SweepExperiment& exp, int workers = 1);

/// Serial reference implementation (identical output by construction).
RegionMap run_sweep_serial(const GridSpec& grid, const ParameterSet& base, SweepMode mode,
                           const ForcingModel* fm, const SweepExperiment& exp);

/// Classifies one cell; shared by both sweep paths.
RegionClass classify_cell(double D_s, double tau_s, const ParameterSet& base, SweepMode mode,
                          const ForcingModel* fm, const SweepExperiment& exp, bool& failed);

/// Signed per-column distance (in cells) between the numeric class
/// transitions and the analytic rays tau = e D (sink <-> focus) and
/// tau = 2 D / pi (focus <-> unstable). Positive deviation means the
/// upper region extends below the ray.
struct RayComparison {
    int columns = 0;            // columns with the ray inside the grid
    int columns_detected = 0;   // columns with a numeric transition
    double mean_signed = 0.0;
    double mean_abs = 0.0;
    double max_abs = 0.0;
    double frac_within_one = 0.0;
    std::vector<std::pair<int, double>> deviations;  // (d index, cells)
};

struct BoundaryReport {
    RayComparison sink_focus;
    RayComparison focus_unstable;
    bool full_coverage = true;  // both rays crossed the grid somewhere
};

BoundaryReport compare_maps(const RegionMap& map);

/// CSV rows `D_s,tau_s,class_code` (codes 0-4 in RegionClass order; the
/// generic nonhomogeneous sink is written as code 0).
void write_region_csv(std::ostream& os, const RegionMap& map, bool with_timestamp = true);

/// P2 portable graymap, one pixel per cell, top row = tau_hi,
/// codes scaled onto 0..255.
void write_region_pgm(std::ostream& os, const RegionMap& map, bool with_timestamp = true);

void write_boundary_report(std::ostream& os, const BoundaryReport& report);

} // namespace vmbaro
