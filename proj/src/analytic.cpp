#include "vmbaro/analytic.hpp"

#include <cmath>

namespace vmbaro {

namespace {

constexpr double kE = 2.718281828459045235;
constexpr double kPi = 3.141592653589793238;
constexpr double kInvE = 0.3678794411714423216;

using cplx = std::complex<double>;

// Series about the branch point z = -1/e in p = sqrt(2(e z + 1)).
cplx branch_point_series(cplx p) {
    // w = -1 + p - p^2/3 + 11 p^3/72 - 43 p^4/540 + 769 p^5/17280
    return -1.0 +
           p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 +
                p * (-43.0 / 540.0 + p * (769.0 / 17280.0)))));
}

cplx initial_guess(cplx z) {
    const cplx ez1 = kE * z + 1.0;
    if (std::abs(ez1) < 0.3) {
        cplx p = std::sqrt(2.0 * ez1);
        // keep the principal side: real z below the cut maps to Im > 0
        if (std::real(z) < -kInvE && std::imag(z) == 0.0 && std::imag(p) < 0.0) p = -p;
        return branch_point_series(p);
    }
    // region where a guess around the origin is safe
    const double zr = std::real(z), zi = std::imag(z);
    if (zr > -1.0 && zr < 1.5 && std::abs(zi) < 1.0 && zr > -2.5 * std::abs(zi) - 0.2) {
        if (std::abs(z) < 0.5) return z * (1.0 - z + 1.5 * z * z);
        return std::log(1.0 + z);
    }
    const cplx l1 = std::log(z);  // principal log
    const cplx l2 = std::log(l1);
    if (std::abs(z) > 10.0) return l1 - l2 + l2 / l1;
    return l1 - l2;
}

} // namespace

std::complex<double> lambert_w0(std::complex<double> z) {
    if (z == 0.0) return 0.0;
    const bool real_input = std::imag(z) == 0.0;
    const cplx ez1 = kE * z + 1.0;
    if (std::abs(ez1) < 1e-12) return -1.0;  // branch point

    cplx w = initial_guess(z);
    // Near the branch point the series is already accurate to O(p^6) and
    // Halley's denominator degenerates, so skip the refinement there.
    if (std::abs(ez1) > 1e-8) {
        cplx best = w;
        double best_res = w_residual_abs(z, w);
        for (int it = 0; it < 80; ++it) {
            const cplx ew = std::exp(w);
            const cplx r = w * ew - z;
            const double res = std::abs(r);
            if (res < best_res) {
                best = w;
                best_res = res;
            }
            if (res <= 1e-14 * std::max(1.0, std::abs(z))) break;
            const cplx wp1 = w + 1.0;
            const cplx denom = ew * wp1 - (w + 2.0) * r / (2.0 * wp1);
            w -= r / denom;
        }
        if (w_residual_abs(z, w) > best_res) w = best;
    }
    if (real_input) {
        if (std::real(z) >= -kInvE) {
            w = cplx(std::real(w), 0.0);  // principal value is real here
        } else if (std::imag(w) < 0.0) {
            w = std::conj(w);  // convention: Im in (0, pi) on the cut
        }
    }
    return w;
}

double characteristic_residual(double D_s, double tau_s, std::complex<double> lambda) {
    return std::abs(tau_s * lambda + std::exp(-lambda * D_s));
}

const char* to_string(RegionClass c) {
    switch (c) {
        case RegionClass::OverdampedSink: return "overdamped_sink";
        case RegionClass::CriticallyDampedSink: return "critically_damped_sink";
        case RegionClass::StableFocus: return "stable_focus";
        case RegionClass::LimitCycle: return "limit_cycle";
        case RegionClass::Unstable: return "unstable";
    }
    return "?";
}

ComplexRoot principal_root(double D_s, double tau_s) {
    if (!(D_s > 0.0) || !(tau_s > 0.0))
        throw InputError("principal_root: D_s and tau_s must be > 0");

    const double z = -D_s / tau_s;
    ComplexRoot root;
    if (std::abs(kE * D_s - tau_s) <= 1e-11 * tau_s) {
        // Critically damped: the double root of the characteristic
        // equation, exact where the branch-point sqrt loses accuracy.
        root.alpha = -std::log(tau_s / D_s) / D_s;
        root.beta = 0.0;
    } else if (z >= -kInvE) {
        root.alpha = std::real(lambert_w0(cplx(z, 0.0))) / D_s;
        root.beta = 0.0;
    } else {
        const cplx lam = lambert_w0(cplx(z, 0.0)) / D_s;
        root.alpha = std::real(lam);
        root.beta = std::abs(std::imag(lam));
    }
    const double res = characteristic_residual(D_s, tau_s, root.value());
    if (res > 1e-10 * std::max(1.0, tau_s))
        throw Error("principal_root: residual check failed, |phi| = " + std::to_string(res));
    return root;
}

ComplexRoot complex_root_oracle(double D_s, double tau_s) {
    if (!(kE * D_s > tau_s))
        throw InputError("complex_root_oracle: requires the complex regime e D_s > tau_s");

    // Imaginary part of phi after substituting alpha = -beta cot(D_s beta):
    // r(beta) = beta tau_s - exp(-D_s alpha(beta)) sin(D_s beta),
    // negative as beta -> 0+ and positive as beta -> (pi/D_s)-.
    auto resid = [&](double beta) {
        const double db = D_s * beta;
        const double alpha = -beta * std::cos(db) / std::sin(db);
        return beta * tau_s - std::exp(-D_s * alpha) * std::sin(db);
    };

    double lo = 1e-9 * kPi / D_s;
    double hi = (1.0 - 1e-12) * kPi / D_s;
    double flo = resid(lo);
    if (!(flo < 0.0)) {
        // extremely close to the transcritical line: tighten the bracket
        for (int k = 0; k < 60 && !(flo < 0.0); ++k) {
            lo *= 0.5;
            flo = resid(lo);
        }
        if (!(flo < 0.0)) throw Error("complex_root_oracle: no sign change in bracket");
    }
    if (!(resid(hi) > 0.0)) throw Error("complex_root_oracle: no sign change in bracket");

    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (resid(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    const double beta = 0.5 * (lo + hi);
    const double db = D_s * beta;
    return {-beta * std::cos(db) / std::sin(db), beta};
}

RegionClass classify_homogeneous(double D_s, double tau_s, double tol) {
    if (!(D_s > 0.0) || !(tau_s > 0.0))
        throw InputError("classify_homogeneous: D_s and tau_s must be > 0");
    if (std::abs(kE * D_s - tau_s) <= tol * tau_s) return RegionClass::CriticallyDampedSink;
    if (kE * D_s < tau_s) return RegionClass::OverdampedSink;
    if (std::abs(D_s - 0.5 * kPi * tau_s) <= tol * tau_s) return RegionClass::LimitCycle;
    if (D_s > 0.5 * kPi * tau_s) return RegionClass::Unstable;
    return RegionClass::StableFocus;
}

double h_explicit(double t, const ComplexRoot& root, const ParameterSet& p,
                  double T_s0, double H0) {
    const cplx lam = root.value();
    const cplx denom = p.tau_H * lam + 1.0;
    if (std::abs(denom) < 1e-12)
        throw Error("h_explicit: resonance tau_H * lambda = -1 is singular");
    const cplx coef = p.H_I * p.H_s / denom;
    const cplx ts = T_s0 * std::exp(lam * t);
    const cplx h = coef * ts + (H0 - coef * T_s0) * std::exp(-t / p.tau_H);
    return std::real(h);
}

} // namespace vmbaro
