#include "vmbaro/classifier.hpp"

#include <algorithm>
#include <cmath>

namespace vmbaro {

void ClassifierConfig::validate() const {
    if (!(eta2 < 0.0) || !(eta1 > 0.0))
        throw InputError("ClassifierConfig: requires eta2 < 0 < eta1");
    if (!(mu > 0.0) || !(mu < 1.0)) throw InputError("ClassifierConfig: mu must be in (0, 1)");
    if (!(min_extrema_sep > 0.0) || !(amp_floor > 0.0) || !(resample_dt > 0.0))
        throw InputError("ClassifierConfig: dimensioned thresholds must be > 0");
}

const char* to_string(BehaviorClass c) {
    switch (c) {
        case BehaviorClass::Sink: return "sink";
        case BehaviorClass::SpiralIn: return "spiral_in";
        case BehaviorClass::LimitCycle: return "limit_cycle";
        case BehaviorClass::SpiralOut: return "spiral_out";
    }
    return "?";
}

RegionClass to_region_class(BehaviorClass c) {
    switch (c) {
        case BehaviorClass::Sink: return RegionClass::OverdampedSink;
        case BehaviorClass::SpiralIn: return RegionClass::StableFocus;
        case BehaviorClass::LimitCycle: return RegionClass::LimitCycle;
        case BehaviorClass::SpiralOut: return RegionClass::Unstable;
    }
    return RegionClass::OverdampedSink;
}

LinearFit amplitude_regression(std::span<const double> a) {
    const std::size_t n = a.size();
    if (n < 2) throw InputError("amplitude_regression: needs at least two amplitudes");
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += static_cast<double>(i + 1);
        sy += a[i];
    }
    const double xm = sx / static_cast<double>(n);
    const double ym = sy / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = static_cast<double>(i + 1) - xm;
        const double dy = a[i] - ym;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    LinearFit fit;
    fit.b1 = sxy / sxx;
    fit.b0 = ym - fit.b1 * xm;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = a[i] - (fit.b0 + fit.b1 * static_cast<double>(i + 1));
        ss_res += e * e;
    }
    // Zero-variance amplitudes are a perfect constant fit; also treat
    // variation at solver-noise scale (relative std < 1e-3) as constant.
    const double rel_std = std::sqrt(syy / static_cast<double>(n)) /
                           std::max(std::abs(ym), 1e-300);
    fit.r2 = (syy <= 0.0 || rel_std < 1e-3) ? 1.0 : 1.0 - ss_res / syy;
    return fit;
}

namespace {

struct ScanResult {
    std::vector<Extremum> extrema;
    bool diverged = false;
};

// Steps 1-3 on one pass over the uniform resampling; the divergence
// guard shares the same samples.
ScanResult scan_extrema(const SignalView& signal, const ClassifierConfig& cfg,
                        double divergence_scale) {
    const double t_lo = std::max(cfg.t_cut, signal.t_begin);
    const double t_hi = signal.t_end;
    if (!(t_hi > t_lo)) throw InputError("find_extrema: analysis window is empty");

    const double dt = cfg.resample_dt;
    const std::size_t n = static_cast<std::size_t>(std::floor((t_hi - t_lo) / dt + 1e-9)) + 1;
    std::vector<double> v(n);
    ScanResult out;
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = signal.eval(t_lo + static_cast<double>(i) * dt);
        if (!std::isfinite(v[i]) ||
            (divergence_scale > 0.0 && std::abs(v[i]) > divergence_scale)) {
            out.diverged = true;
            return out;
        }
    }
    if (n < 3) return out;

    // continuous form of the same central difference, for refinement
    auto gradient = [&](double t) {
        const double a = std::max(t - dt, signal.t_begin);
        const double b = std::min(t + dt, signal.t_end);
        return (signal.eval(b) - signal.eval(a)) / (b - a);
    };

    std::vector<Extremum> extrema;
    double g_prev = (v[1] - v[0]) / dt;  // one-sided at the window edge
    double t_prev = t_lo;
    for (std::size_t i = 1; i < n; ++i) {
        const double t = t_lo + static_cast<double>(i) * dt;
        const double g = (i + 1 < n) ? (v[i + 1] - v[i - 1]) / (2.0 * dt)
                                     : (v[i] - v[i - 1]) / dt;
        if (g_prev != 0.0 && g_prev * g < 0.0) {
            double lo = t_prev, hi = t;
            double glo = gradient(lo);
            if (glo == 0.0 || glo * gradient(hi) > 0.0) {
                glo = g_prev;  // fall back to the grid values
            }
            while (hi - lo > 1e-6) {
                const double mid = 0.5 * (lo + hi);
                const double gm = gradient(mid);
                if (gm == 0.0) {
                    lo = hi = mid;
                    break;
                }
                if (glo * gm < 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
            }
            const double tx = 0.5 * (lo + hi);
            extrema.push_back({tx, signal.eval(tx), g_prev > 0.0});
        }
        if (g != 0.0) {
            g_prev = g;
            t_prev = t;
        }
    }

    // drop extrema closer than min_extrema_sep to the last kept one
    for (const Extremum& e : extrema) {
        if (!out.extrema.empty() && e.t - out.extrema.back().t < cfg.min_extrema_sep) continue;
        out.extrema.push_back(e);
    }
    return out;
}

} // namespace

std::vector<Extremum> find_extrema(const SignalView& signal, const ClassifierConfig& cfg) {
    cfg.validate();
    return scan_extrema(signal, cfg, 0.0).extrema;
}

Classification classify_signal(const SignalView& signal, const ClassifierConfig& cfg) {
    cfg.validate();
    Classification out;

    const double scale = std::max(std::abs(signal.eval(signal.t_begin)), cfg.amp_floor);
    ScanResult scan = scan_extrema(signal, cfg, cfg.divergence_factor * scale);
    if (scan.diverged) {
        out.behavior = BehaviorClass::SpiralOut;
        out.diverged = true;
        return out;
    }
    out.extrema = std::move(scan.extrema);

    std::vector<const Extremum*> maxima, minima;
    for (const Extremum& e : out.extrema)
        (e.is_max ? maxima : minima).push_back(&e);

    const std::size_t n_pairs = std::min(maxima.size(), minima.size());
    for (std::size_t i = 0; i < n_pairs; ++i) {
        const double a = maxima[i]->value - minima[i]->value;
        if (std::abs(a) < cfg.amp_floor) continue;
        out.amplitudes.push_back(a);
    }

    if (out.amplitudes.empty()) {
        out.behavior = BehaviorClass::Sink;
        return out;
    }
    if (out.amplitudes.size() == 1) {
        out.behavior = BehaviorClass::SpiralIn;
        return out;
    }

    std::vector<double> amps = out.amplitudes;
    if (cfg.normalize_amplitudes) {
        double mean = 0.0;
        for (double a : amps) mean += a;
        mean /= static_cast<double>(amps.size());
        if (mean != 0.0)
            for (double& a : amps) a /= std::abs(mean);
    }
    const LinearFit fit = amplitude_regression(amps);
    out.slope = fit.b1;
    out.r2 = fit.r2;

    if (cfg.eta2 <= fit.b1 && fit.b1 <= cfg.eta1)
        out.behavior = fit.r2 > cfg.mu ? BehaviorClass::LimitCycle : BehaviorClass::SpiralIn;
    else if (fit.b1 > cfg.eta1)
        out.behavior = BehaviorClass::SpiralOut;
    else
        out.behavior = BehaviorClass::SpiralIn;
    return out;
}

Classification classify_trajectory(const Trajectory& traj, int component,
                                   const ClassifierConfig& cfg) {
    if (component < 0 || component >= traj.dimension())
        throw InputError("classify_trajectory: component out of range");
    if (traj.t_end() <= cfg.t_cut)
        throw InputError("classify_trajectory: trajectory ends at " +
                         std::to_string(traj.t_end()) + " before t_cut = " +
                         std::to_string(cfg.t_cut));
    if (traj.truncated()) {
        Classification out;
        out.behavior = BehaviorClass::SpiralOut;
        out.diverged = true;
        return out;
    }
    SignalView view{
        [&traj, component](double t) { return traj.eval_component(t, component); },
        traj.t_begin(), traj.t_end()};
    return classify_signal(view, cfg);
}

Classification classify_samples(std::span<const double> t, std::span<const double> x,
                                const ClassifierConfig& cfg) {
    if (t.size() != x.size() || t.size() < 2)
        throw InputError("classify_samples: needs matching t/x with >= 2 samples");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1]))
            throw InputError("classify_samples: time must be strictly increasing");
    if (t.back() <= cfg.t_cut)
        throw InputError("classify_samples: record ends before t_cut");

    SignalView view{
        [t, x](double q) {
            auto it = std::upper_bound(t.begin(), t.end(), q);
            std::size_t k = static_cast<std::size_t>(std::distance(t.begin(), it));
            if (k == 0) return x[0];
            if (k >= t.size()) return x[t.size() - 1];
            const double w = (q - t[k - 1]) / (t[k] - t[k - 1]);
            return x[k - 1] * (1.0 - w) + x[k] * w;
        },
        t.front(), t.back()};
    return classify_signal(view, cfg);
}

} // namespace vmbaro
