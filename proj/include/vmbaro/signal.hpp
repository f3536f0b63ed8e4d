#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vmbaro/models.hpp"

namespace vmbaro {

/// A sampled pressure signal on a strictly increasing time grid.
struct PressureSeries {
    std::vector<double> t;  // seconds
    std::vector<double> P;  // mmHg

    void validate() const;
};

/// Systolic envelope: linear interpolation of the strict local maxima of
/// a pulsatile waveform, sampled back onto the raw grid. Throws
/// InputError when fewer than two maxima exist.
PressureSeries extract_sbp(const PressureSeries& raw, double min_peak_separation = 0.25);

/// Centered moving average over a time window, truncated at the record
/// edges; a window longer than the record yields the global mean.
PressureSeries moving_mean(const PressureSeries& s, double window = 1.0);

/// Least-squares polynomial in the affine-rescaled time u = (t - shift)/scale,
/// u in [-1, 1] over the fitted span.
struct PolyFit {
    std::vector<double> coeffs;  // degree + 1 entries, constant term first
    double scale = 1.0;
    double shift = 0.0;
    double max_residual = 0.0;

    double eval(double t) const;
};

PolyFit fit_polynomial(const PressureSeries& s, int degree = 10);

/// Prepends `pre` seconds of the first value and appends `post` seconds
/// of the last value at the native sample spacing.
PressureSeries extend_baseline(const PressureSeries& s, double pre, double post);

/// Synthetic Valsalva SBP profile amplitudes (all mmHg).
struct VmProfile {
    double phase1_rise = 20.0;
    double early2_drop = 25.0;
    double late2_recovery = 12.0;
    double phase3_dip = 18.0;
    double phase4_overshoot = 15.0;

    static VmProfile zero() { return {0.0, 0.0, 0.0, 0.0, 0.0}; }
};

/// C1 piecewise-cubic SBP test signal with the four maneuver phases;
/// returns to baseline by t_e + 30 s. Sampled every `dt` over
/// [0, t_end] (default t_end = t_e + 45).
PressureSeries synth_vm(const SubjectBaseline& base, double t_s, double t_e,
                        const VmProfile& profile = {}, double dt = 0.02,
                        double t_end = -1.0);

/// Degree-10 SBP surrogate composed with the baroreflex chain (B = 0,
/// aortic pathway only) to give the reduced-model forcing terms.
class ForcingModel final : public Forcing {
public:
    ForcingModel(PolyFit surrogate, double t_min, double t_max,
                 ParameterSet params, SubjectBaseline baseline);

    /// Fitted SBP surrogate; throws InputError outside [t_min, t_max].
    double surrogate(double t) const;

    double f(double t) const override;  // (K_s / tau_s) G_s(n(P_a(t)))
    double g(double t) const override;  // (H_I / tau_H)(1 - H_p K_p G_p(n(P_a(t))))

    double t_min() const { return t_min_; }
    double t_max() const { return t_max_; }
    const ParameterSet& params() const { return params_; }
    const SubjectBaseline& baseline() const { return baseline_; }
    const PolyFit& poly() const { return poly_; }

    /// JSON persistence: {coeffs, t_map:{scale,shift}, span, baseline}.
    std::string to_json() const;
    static ForcingModel from_json(const std::string& json_text, const ParameterSet& params);

    /// Re-bind model constants (e.g. per-cell D_s, tau_s in a sweep).
    ForcingModel with_params(const ParameterSet& p) const;

private:
    double drive(double t) const;  // n(P_a(t))

    PolyFit poly_;
    double t_min_, t_max_;
    ParameterSet params_;
    SubjectBaseline baseline_;
};

/// extract (optional) -> smooth -> extend -> fit, the ingest pipeline.
struct IngestOptions {
    bool pulsatile_input = false;  // run peak extraction first
    double smooth_window = 1.0;    // s
    double extend_pre = 30.0;      // s
    double extend_post = 60.0;     // s
    int degree = 10;
};

ForcingModel build_forcing(const PressureSeries& input, const ParameterSet& params,
                           const SubjectBaseline& baseline, const IngestOptions& opts = {});

/// Two-column CSV `t,P` with optional header.
PressureSeries read_pressure_csv(std::istream& is);
PressureSeries load_pressure_csv(const std::string& path);

} // namespace vmbaro
