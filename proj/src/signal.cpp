#include "vmbaro/signal.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace vmbaro {

void PressureSeries::validate() const {
    if (t.size() != P.size()) throw InputError("PressureSeries: t and P lengths differ");
    if (t.size() < 2) throw InputError("PressureSeries: needs at least two samples");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1])) throw InputError("PressureSeries: time must be strictly increasing");
    for (double v : P)
        if (!std::isfinite(v)) throw InputError("PressureSeries: non-finite pressure value");
}

PressureSeries extract_sbp(const PressureSeries& raw, double min_peak_separation) {
    raw.validate();

    // strict 3-sample local maxima
    std::vector<std::size_t> peaks;
    for (std::size_t i = 1; i + 1 < raw.t.size(); ++i)
        if (raw.P[i] > raw.P[i - 1] && raw.P[i] > raw.P[i + 1]) peaks.push_back(i);

    // enforce the minimum separation, keeping the taller of close pairs
    std::vector<std::size_t> kept;
    for (std::size_t idx : peaks) {
        if (!kept.empty() && raw.t[idx] - raw.t[kept.back()] < min_peak_separation) {
            if (raw.P[idx] > raw.P[kept.back()]) kept.back() = idx;
        } else {
            kept.push_back(idx);
        }
    }
    if (kept.size() < 2)
        throw InputError("extract_sbp: fewer than two local maxima in the record");

    PressureSeries out;
    out.t = raw.t;
    out.P.resize(raw.t.size());
    std::size_t seg = 0;
    for (std::size_t i = 0; i < raw.t.size(); ++i) {
        const double t = raw.t[i];
        if (t <= raw.t[kept.front()]) {
            out.P[i] = raw.P[kept.front()];
            continue;
        }
        if (t >= raw.t[kept.back()]) {
            out.P[i] = raw.P[kept.back()];
            continue;
        }
        while (seg + 1 < kept.size() && raw.t[kept[seg + 1]] < t) ++seg;
        const double t0 = raw.t[kept[seg]], t1 = raw.t[kept[seg + 1]];
        const double p0 = raw.P[kept[seg]], p1 = raw.P[kept[seg + 1]];
        out.P[i] = p0 + (p1 - p0) * (t - t0) / (t1 - t0);
    }
    return out;
}

PressureSeries moving_mean(const PressureSeries& s, double window) {
    s.validate();
    if (!(window > 0.0)) throw InputError("moving_mean: window must be > 0");
    PressureSeries out;
    out.t = s.t;
    out.P.resize(s.P.size());
    const double half = 0.5 * window;
    std::size_t lo = 0, hi = 0;
    for (std::size_t i = 0; i < s.t.size(); ++i) {
        while (s.t[lo] < s.t[i] - half) ++lo;
        while (hi + 1 < s.t.size() && s.t[hi + 1] <= s.t[i] + half) ++hi;
        double acc = 0.0;
        for (std::size_t k = lo; k <= hi; ++k) acc += s.P[k];
        out.P[i] = acc / static_cast<double>(hi - lo + 1);
    }
    return out;
}

double PolyFit::eval(double t) const {
    const double u = (t - shift) / scale;
    double acc = 0.0;
    for (std::size_t k = coeffs.size(); k-- > 0;) acc = acc * u + coeffs[k];
    return acc;
}

PolyFit fit_polynomial(const PressureSeries& s, int degree) {
    s.validate();
    if (degree < 0) throw InputError("fit_polynomial: degree must be >= 0");
    const std::size_t m = s.t.size();
    const std::size_t n = static_cast<std::size_t>(degree) + 1;
    if (m < n) throw FitError("fit_polynomial: fewer samples than coefficients");

    PolyFit fit;
    fit.shift = 0.5 * (s.t.front() + s.t.back());
    fit.scale = 0.5 * (s.t.back() - s.t.front());
    if (!(fit.scale > 0.0)) throw FitError("fit_polynomial: degenerate time span");

    Eigen::MatrixXd V(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    Eigen::VectorXd b(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
        const double u = (s.t[i] - fit.shift) / fit.scale;
        double pw = 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            V(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pw;
            pw *= u;
        }
        b(static_cast<Eigen::Index>(i)) = s.P[i];
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
    if (qr.rank() < static_cast<Eigen::Index>(n))
        throw FitError("fit_polynomial: rank-deficient design matrix");
    Eigen::VectorXd c = qr.solve(b);

    fit.coeffs.assign(c.data(), c.data() + n);
    Eigen::VectorXd r = V * c - b;
    fit.max_residual = r.cwiseAbs().maxCoeff();
    return fit;
}

PressureSeries extend_baseline(const PressureSeries& s, double pre, double post) {
    s.validate();
    if (pre < 0.0 || post < 0.0) throw InputError("extend_baseline: pre/post must be >= 0");

    std::vector<double> gaps(s.t.size() - 1);
    for (std::size_t i = 0; i + 1 < s.t.size(); ++i) gaps[i] = s.t[i + 1] - s.t[i];
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
    const double dt = gaps[gaps.size() / 2];

    const std::size_t n_pre = static_cast<std::size_t>(std::llround(pre / dt));
    const std::size_t n_post = static_cast<std::size_t>(std::llround(post / dt));

    PressureSeries out;
    out.t.reserve(s.t.size() + n_pre + n_post);
    out.P.reserve(out.t.capacity());
    for (std::size_t k = n_pre; k >= 1; --k) {
        out.t.push_back(s.t.front() - static_cast<double>(k) * dt);
        out.P.push_back(s.P.front());
    }
    out.t.insert(out.t.end(), s.t.begin(), s.t.end());
    out.P.insert(out.P.end(), s.P.begin(), s.P.end());
    for (std::size_t k = 1; k <= n_post; ++k) {
        out.t.push_back(s.t.back() + static_cast<double>(k) * dt);
        out.P.push_back(s.P.back());
    }
    return out;
}

namespace {
double smoothstep(double u) { return u * u * (3.0 - 2.0 * u); }
} // namespace

PressureSeries synth_vm(const SubjectBaseline& base, double t_s, double t_e,
                        const VmProfile& pr, double dt, double t_end) {
    base.validate();
    if (!(t_e > t_s) || t_s < 0.0) throw InputError("synth_vm: requires 0 <= t_s < t_e");
    if (!(dt > 0.0)) throw InputError("synth_vm: dt must be > 0");
    if (t_end < 0.0) t_end = t_e + 45.0;

    const double Pb = base.P_bar;
    const double L = t_e - t_s;
    // zero-slope cubic segments between these knots keep the profile C1
    const std::vector<std::pair<double, double>> knots = {
        {t_s, Pb},
        {t_s + 0.15 * L, Pb + pr.phase1_rise},
        {t_s + 0.45 * L, Pb - pr.early2_drop},
        {t_e, Pb - pr.early2_drop + pr.late2_recovery},
        {t_e + 1.5, Pb - pr.early2_drop + pr.late2_recovery - pr.phase3_dip},
        {t_e + 6.0, Pb + pr.phase4_overshoot},
        {t_e + 12.0, Pb + 0.3 * pr.phase4_overshoot},
        {t_e + 20.0, Pb + 0.05 * pr.phase4_overshoot},
        {t_e + 28.0, Pb},
    };

    PressureSeries out;
    const std::size_t n = static_cast<std::size_t>(std::ceil(t_end / dt)) + 1;
    out.t.reserve(n);
    out.P.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = std::min(static_cast<double>(i) * dt, t_end);
        double value;
        if (t <= knots.front().first) {
            value = knots.front().second;
        } else if (t >= knots.back().first) {
            value = knots.back().second;
        } else {
            std::size_t k = 0;
            while (k + 1 < knots.size() && knots[k + 1].first < t) ++k;
            const double u = (t - knots[k].first) / (knots[k + 1].first - knots[k].first);
            value = knots[k].second + (knots[k + 1].second - knots[k].second) * smoothstep(u);
        }
        out.t.push_back(t);
        out.P.push_back(value);
    }
    return out;
}

ForcingModel::ForcingModel(PolyFit surrogate, double t_min, double t_max,
                           ParameterSet params, SubjectBaseline baseline)
    : poly_(std::move(surrogate)), t_min_(t_min), t_max_(t_max),
      params_(params), baseline_(baseline) {
    if (!(t_max_ > t_min_)) throw InputError("ForcingModel: empty validity span");
    if (poly_.coeffs.size() != 11)
        throw InputError("ForcingModel: surrogate must have exactly 11 coefficients (degree 10)");
    params_.validate();
}

double ForcingModel::surrogate(double t) const {
    const double snap = 1e-9 * std::max(1.0, std::abs(t));
    if (t < t_min_ - snap || t > t_max_ + snap)
        throw InputError("ForcingModel: t = " + std::to_string(t) + " outside surrogate span [" +
                         std::to_string(t_min_) + ", " + std::to_string(t_max_) + "]");
    return poly_.eval(std::clamp(t, t_min_, t_max_));
}

double ForcingModel::drive(double t) const {
    const double P_a = surrogate(t) - thoracic_pressure(t, params_);
    return (1.0 - params_.K_b) * wall_strain(P_a, params_);  // B = 0 pathway
}

double ForcingModel::f(double t) const {
    const auto [G_p, G_s] = efferent_sigmoids(drive(t), params_);
    (void)G_p;
    return params_.K_s / params_.tau_s * G_s;
}

double ForcingModel::g(double t) const {
    const auto [G_p, G_s] = efferent_sigmoids(drive(t), params_);
    (void)G_s;
    return params_.H_I / params_.tau_H * (1.0 - params_.H_p * params_.K_p * G_p);
}

ForcingModel ForcingModel::with_params(const ParameterSet& p) const {
    return ForcingModel(poly_, t_min_, t_max_, p, baseline_);
}

std::string ForcingModel::to_json() const {
    nlohmann::json j;
    j["coeffs"] = poly_.coeffs;
    j["t_map"] = {{"scale", poly_.scale}, {"shift", poly_.shift}};
    j["span"] = {t_min_, t_max_};
    j["baseline"] = {{"P_bar", baseline_.P_bar}, {"H_bar", baseline_.H_bar}, {"age", baseline_.age}};
    return j.dump(2);
}

ForcingModel ForcingModel::from_json(const std::string& json_text, const ParameterSet& params) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("ForcingModel: bad JSON: ") + e.what());
    }
    try {
        PolyFit fit;
        fit.coeffs = j.at("coeffs").get<std::vector<double>>();
        fit.scale = j.at("t_map").at("scale").get<double>();
        fit.shift = j.at("t_map").at("shift").get<double>();
        const auto span = j.at("span").get<std::vector<double>>();
        if (span.size() != 2) throw InputError("ForcingModel: span must have two entries");
        SubjectBaseline base;
        base.P_bar = j.at("baseline").at("P_bar").get<double>();
        base.H_bar = j.at("baseline").at("H_bar").get<double>();
        base.age = j.at("baseline").at("age").get<double>();
        return ForcingModel(std::move(fit), span[0], span[1], params, base);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("ForcingModel: missing/invalid field: ") + e.what());
    }
}

ForcingModel build_forcing(const PressureSeries& input, const ParameterSet& params,
                           const SubjectBaseline& baseline, const IngestOptions& opts) {
    PressureSeries sbp = opts.pulsatile_input ? extract_sbp(input) : input;
    sbp = moving_mean(sbp, opts.smooth_window);
    sbp = extend_baseline(sbp, opts.extend_pre, opts.extend_post);
    PolyFit fit = fit_polynomial(sbp, opts.degree);
    return ForcingModel(std::move(fit), sbp.t.front(), sbp.t.back(), params, baseline);
}

PressureSeries read_pressure_csv(std::istream& is) {
    PressureSeries out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string ta, pa;
        if (!std::getline(ls, ta, ',') || !std::getline(ls, pa)) {
            throw InputError("pressure CSV line " + std::to_string(lineno) + ": expected `t,P`");
        }
        try {
            std::size_t p1 = 0, p2 = 0;
            const double tv = std::stod(ta, &p1);
            const double pv = std::stod(pa, &p2);
            out.t.push_back(tv);
            out.P.push_back(pv);
        } catch (const std::exception&) {
            if (lineno == 1) continue;  // header row
            throw InputError("pressure CSV line " + std::to_string(lineno) + ": bad numeric value");
        }
    }
    out.validate();
    return out;
}

PressureSeries load_pressure_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot open pressure CSV: " + path);
    return read_pressure_csv(f);
}

} // namespace vmbaro
