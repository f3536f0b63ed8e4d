#pragma once

#include <functional>
#include <span>
#include <vector>

#include "vmbaro/analytic.hpp"
#include "vmbaro/dde.hpp"

namespace vmbaro {

struct ClassifierConfig {
    double eta1 = 0.5;            // slope upper threshold
    double eta2 = -1e-2;          // slope lower threshold
    double mu = 0.8;              // r^2 threshold
    double min_extrema_sep = 0.1; // s, step-3 filter
    double amp_floor = 1e-8;      // step-4 amplitude filter
    double resample_dt = 0.01;    // s, uniform gradient grid
    double t_cut = 0.0;           // s, start of the analysis window
    double divergence_factor = 1e6;

    /// When set, amplitudes are rescaled to unit mean before the slope
    /// thresholds apply (off by default; the thresholds are dimensional).
    bool normalize_amplitudes = false;

    void validate() const;
};

enum class BehaviorClass { Sink, SpiralIn, LimitCycle, SpiralOut };

const char* to_string(BehaviorClass c);

/// Sweep-report mapping: Sink -> sink region (generic), SpiralIn ->
/// StableFocus, LimitCycle -> LimitCycle, SpiralOut -> Unstable.
RegionClass to_region_class(BehaviorClass c);

struct Extremum {
    double t;
    double value;
    bool is_max;
};

struct LinearFit {
    double b0 = 0.0;
    double b1 = 0.0;
    double r2 = 0.0;
};

struct Classification {
    BehaviorClass behavior = BehaviorClass::Sink;
    std::vector<Extremum> extrema;     // after the separation filter
    std::vector<double> amplitudes;    // after the amplitude-floor filter
    double slope = 0.0;                // regression slope (when >= 2 amplitudes)
    double r2 = 0.0;
    bool diverged = false;
};

/// A scalar signal with continuous evaluation on [t_begin, t_end].
struct SignalView {
    std::function<double(double)> eval;
    double t_begin;
    double t_end;
};

/// Ordinary least squares of amplitude against 1-based oscillation
/// index; r^2 of a zero-variance response is defined as 1.
LinearFit amplitude_regression(std::span<const double> amplitudes);

/// Steps 1-3 of the behavior algorithm: central-difference gradient on a
/// uniform resampling, bisection-refined zero crossings, separation filter.
std::vector<Extremum> find_extrema(const SignalView& signal, const ClassifierConfig& cfg);

/// Full behavior classification of a scalar signal (steps 1-6).
Classification classify_signal(const SignalView& signal, const ClassifierConfig& cfg);

/// Classification of one trajectory component via its dense output.
/// Throws InputError when the trajectory ends before t_cut.
Classification classify_trajectory(const Trajectory& traj, int component,
                                   const ClassifierConfig& cfg);

/// Classification of a sampled signal (piecewise-linear interpolation).
Classification classify_samples(std::span<const double> t, std::span<const double> x,
                                const ClassifierConfig& cfg);

} // namespace vmbaro
