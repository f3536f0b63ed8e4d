#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include "vmbaro/dde.hpp"

namespace vmbaro {

/// Model constants of the baroreflex system plus the sympathetic delay
/// and the maneuver window. Defaults are the nominal values.
struct ParameterSet {
    double A = 5.0;       // cross-sectional area ratio
    double B = 0.5;       // neural integration weight, in [0, 1]
    double K_b = 0.1;     // baroreceptor strain gain
    double K_p = 5.0;     // parasympathetic gain
    double K_s = 5.0;     // sympathetic gain
    double tau_b = 0.9;   // s
    double tau_p = 1.8;   // s
    double tau_s = 10.0;  // s
    double tau_H = 0.5;   // s
    double q_w = 0.04;    // mmHg^-1
    double q_p = 10.0;    // s
    double q_s = 10.0;    // s
    double s_w = 120.0;   // mmHg, half-saturation of the wall strain (= mean SBP)
    double s_p = 0.55;    // s^-1
    double s_s = 0.06;    // s^-1
    double H_I = 100.0;   // bpm, intrinsic heart rate
    double H_p = 0.22;    // parasympathetic heart-rate gain
    double H_s = 0.37;    // sympathetic heart-rate gain
    double D_s = 3.0;     // s, sympathetic delay
    double t_s = 30.0;    // s, maneuver start
    double t_e = 45.0;    // s, maneuver end

    void validate() const;  // throws InputError
};

struct SubjectBaseline {
    double P_bar = 120.0;  // mmHg, mean systolic blood pressure
    double H_bar = 90.0;   // bpm, mean heart rate
    double age = 30.0;     // years

    void validate() const;
};

/// Full 5-state vector [eps_bc, eps_ba, T_p, T_s, H].
using FullState = std::array<double, 5>;
enum FullIdx { kEpsBc = 0, kEpsBa = 1, kTp = 2, kTs = 3, kH = 4 };

/// Reduced 2-state vector [T_s, H].
using ReducedState = std::array<double, 2>;
enum ReducedIdx { kRTs = 0, kRH = 1 };

/// Time-dependent inputs of the reduced system.
struct Forcing {
    virtual ~Forcing() = default;
    virtual double f(double t) const = 0;  // s^-1, drives T_s
    virtual double g(double t) const = 0;  // bpm s^-1, drives H
};

/// Thoracic pressure step: 40 mmHg for t_s <= t <= t_e, else 0.
double thoracic_pressure(double t, const ParameterSet& p);

/// Arterial wall strain as a function of pressure; strictly increasing.
double wall_strain(double P, const ParameterSet& p);

/// Medullary drive n = B (eps_wc - eps_bc) + (1 - B)(eps_wa - eps_ba).
double neural_drive(double eps_wc, double eps_bc, double eps_wa, double eps_ba,
                    const ParameterSet& p);

struct Sigmoids {
    double G_p;  // increasing in n
    double G_s;  // decreasing in n
};
Sigmoids efferent_sigmoids(double n, const ParameterSet& p);

/// Right-hand side of the full 5-state system; sbp supplies the carotid
/// pressure, the aortic pressure is sbp(t) - P_th(t). Only dT_s/dt sees
/// the delayed state.
FullState full_rhs(double t, const FullState& x, const FullState& x_del,
                   const ParameterSet& p, const std::function<double(double)>& sbp);

/// Right-hand side of the reduced 2-state system; homogeneous when
/// forcing is null.
ReducedState reduced_rhs(double t, const ReducedState& x, const ReducedState& x_del,
                         const ParameterSet& p, const Forcing* forcing);

struct DerivedGains {
    double s_p, s_s, H_p, H_s;
};

/// Steady-state parameter derivation from subject baselines. H_M defaults
/// to 208 - 0.7 * age unless given explicitly.
DerivedGains derive_parameters(const SubjectBaseline& base, const ParameterSet& p,
                               std::optional<double> H_M = std::nullopt);

/// Returns a ParameterSet with s_w = P_bar and the derived gains applied.
ParameterSet with_derived_parameters(ParameterSet p, const SubjectBaseline& base,
                                     std::optional<double> H_M = std::nullopt);

/// Steady-state initial conditions. When literal_table_strain is set the
/// strain entries use the printed value (1 - sqrt(2/(A+1))) instead of
/// the fixed point K_b * eps_w(P_bar).
FullState initial_state(const ParameterSet& p, const SubjectBaseline& base,
                        bool literal_table_strain = false);

ReducedState reduced_initial_state(const ParameterSet& p, const SubjectBaseline& base);

/// DdeSystem wrappers. The forcing/sbp objects must outlive the system.
DdeSystem make_full_system(const ParameterSet& p, std::function<double(double)> sbp,
                           const FullState& x0);
DdeSystem make_reduced_system(const ParameterSet& p, const Forcing* forcing,
                              const ReducedState& x0);

/// Flat `name = value` parameter file (# comments). Unknown keys are
/// rejected. Returns the parameter set and any baseline keys present.
struct ParameterFile {
    ParameterSet params;
    SubjectBaseline baseline;
    bool has_baseline = false;
    bool derive = true;  // derive s_p, s_s, H_p, H_s from the baseline
};
ParameterFile parse_parameter_file(std::istream& is);
ParameterFile load_parameter_file(const std::string& path);

} // namespace vmbaro
