#pragma once

#include <complex>

#include "vmbaro/models.hpp"

namespace vmbaro {

/// Stability region of the homogeneous system in the (D_s, tau_s) plane.
/// Enum order fixes the persisted class codes 0..4.
enum class RegionClass {
    OverdampedSink = 0,
    CriticallyDampedSink = 1,
    StableFocus = 2,
    LimitCycle = 3,
    Unstable = 4,
};

const char* to_string(RegionClass c);

/// Principal characteristic root lambda = alpha +/- beta i of
/// tau_s lambda + exp(-lambda D_s) = 0. beta is 0 exactly in the
/// real-root regime.
struct ComplexRoot {
    double alpha = 0.0;  // s^-1
    double beta = 0.0;   // rad/s, >= 0
    std::complex<double> value() const { return {alpha, beta}; }
};

/// Principal branch W0 of w e^w = z, total on the complex plane with the
/// cut along (-inf, -1/e); real z < -1/e maps to Im(w) in (0, pi).
/// Residual |w e^w - z| < 1e-12 max(1, |z|).
std::complex<double> lambert_w0(std::complex<double> z);

/// Residual |tau_s lambda + exp(-lambda D_s)| of the characteristic equation.
double characteristic_residual(double D_s, double tau_s, std::complex<double> lambda);

/// lambda = W0(-D_s/tau_s) / D_s with a built-in residual check.
ComplexRoot principal_root(double D_s, double tau_s);

/// Independent root finder for the complex regime e D_s > tau_s: solves
/// the coupled real/imaginary system by bisection on beta in (0, pi/D_s)
/// after the substitution alpha = -beta cot(D_s beta). Never touches
/// lambert_w0, so it cross-validates principal_root.
ComplexRoot complex_root_oracle(double D_s, double tau_s);

/// Five-way classification from the transcritical ray e D_s = tau_s and
/// the Hopf ray D_s = (pi/2) tau_s, with relative boundary tolerance.
RegionClass classify_homogeneous(double D_s, double tau_s, double tol = 1e-12);

/// Closed-form heart rate for the exponential mode T_s(t) = T_s0 e^{lambda t};
/// returns the real part of the complex solution. Throws on the resonance
/// tau_H lambda = -1.
double h_explicit(double t, const ComplexRoot& root, const ParameterSet& p,
                  double T_s0, double H0);

} // namespace vmbaro
