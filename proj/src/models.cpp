#include "vmbaro/models.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace vmbaro {

void ParameterSet::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw InputError(std::string("ParameterSet: ") + name + " must be > 0");
    };
    positive(A, "A");
    positive(K_b, "K_b"); positive(K_p, "K_p"); positive(K_s, "K_s");
    positive(tau_b, "tau_b"); positive(tau_p, "tau_p");
    positive(tau_s, "tau_s"); positive(tau_H, "tau_H");
    positive(q_w, "q_w"); positive(q_p, "q_p"); positive(q_s, "q_s");
    positive(s_w, "s_w"); positive(s_p, "s_p"); positive(s_s, "s_s");
    positive(H_I, "H_I"); positive(H_p, "H_p"); positive(H_s, "H_s");
    positive(D_s, "D_s");
    if (B < 0.0 || B > 1.0) throw InputError("ParameterSet: B must lie in [0, 1]");
    if (t_s < 0.0) throw InputError("ParameterSet: t_s must be >= 0");
    if (!(t_e > t_s)) throw InputError("ParameterSet: t_e must exceed t_s");
}

void SubjectBaseline::validate() const {
    if (!(P_bar > 0.0) || !(H_bar > 0.0) || !(age > 0.0))
        throw InputError("SubjectBaseline: all fields must be > 0");
}

double thoracic_pressure(double t, const ParameterSet& p) {
    return (t >= p.t_s && t <= p.t_e) ? 40.0 : 0.0;
}

double wall_strain(double P, const ParameterSet& p) {
    const double E = std::exp(-p.q_w * (P - p.s_w));
    return 1.0 - std::sqrt((1.0 + E) / (p.A + E));
}

double neural_drive(double eps_wc, double eps_bc, double eps_wa, double eps_ba,
                    const ParameterSet& p) {
    return p.B * (eps_wc - eps_bc) + (1.0 - p.B) * (eps_wa - eps_ba);
}

Sigmoids efferent_sigmoids(double n, const ParameterSet& p) {
    return {1.0 / (1.0 + std::exp(-p.q_p * (n - p.s_p))),
            1.0 / (1.0 + std::exp(p.q_s * (n - p.s_s)))};
}

FullState full_rhs(double t, const FullState& x, const FullState& x_del,
                   const ParameterSet& p, const std::function<double(double)>& sbp) {
    const double P_c = sbp(t);
    const double P_a = P_c - thoracic_pressure(t, p);
    const double eps_wc = wall_strain(P_c, p);
    const double eps_wa = wall_strain(P_a, p);
    const double n = neural_drive(eps_wc, x[kEpsBc], eps_wa, x[kEpsBa], p);
    const auto [G_p, G_s] = efferent_sigmoids(n, p);
    const double H_tilde = p.H_I * (1.0 - p.H_p * x[kTp] + p.H_s * x[kTs]);
    return {
        (-x[kEpsBc] + p.K_b * eps_wc) / p.tau_b,
        (-x[kEpsBa] + p.K_b * eps_wa) / p.tau_b,
        (-x[kTp] + p.K_p * G_p) / p.tau_p,
        (-x_del[kTs] + p.K_s * G_s) / p.tau_s,
        (-x[kH] + H_tilde) / p.tau_H,
    };
}

ReducedState reduced_rhs(double t, const ReducedState& x, const ReducedState& x_del,
                         const ParameterSet& p, const Forcing* forcing) {
    const double f = forcing ? forcing->f(t) : 0.0;
    const double g = forcing ? forcing->g(t) : 0.0;
    return {
        -x_del[kRTs] / p.tau_s + f,
        -x[kRH] / p.tau_H + (p.H_I * p.H_s / p.tau_H) * x[kRTs] + g,
    };
}

namespace {
constexpr double kTp0 = 0.8;
constexpr double kTs0 = 0.2;

double baseline_drive(const SubjectBaseline& base, const ParameterSet& p) {
    // At rest P_th = 0 and both pathways see P_bar; with s_w = P_bar the
    // strains coincide and n is independent of B.
    ParameterSet q = p;
    q.s_w = base.P_bar;
    return (1.0 - p.K_b) * wall_strain(base.P_bar, q);
}
} // namespace

DerivedGains derive_parameters(const SubjectBaseline& base, const ParameterSet& p,
                               std::optional<double> H_M) {
    base.validate();
    if (!(p.H_I > 0.0)) throw InputError("derive_parameters: H_I must be > 0");
    const double arg_p = p.K_p / kTp0 - 1.0;
    const double arg_s = p.K_s / kTs0 - 1.0;
    if (!(arg_p > 0.0))
        throw InputError("derive_parameters: K_p must exceed T_p0 for a positive log argument");
    if (!(arg_s > 0.0))
        throw InputError("derive_parameters: K_s must exceed T_s0 for a positive log argument");

    const double n_bar = baseline_drive(base, p);
    const double hm = H_M.value_or(208.0 - 0.7 * base.age);
    DerivedGains d{};
    d.s_p = n_bar + std::log(arg_p) / p.q_p;
    d.s_s = n_bar - std::log(arg_s) / p.q_s;
    d.H_s = (hm / p.H_I - 1.0) / p.K_s;
    d.H_p = (1.0 - base.H_bar / p.H_I + d.H_s * kTs0) / kTp0;
    return d;
}

ParameterSet with_derived_parameters(ParameterSet p, const SubjectBaseline& base,
                                     std::optional<double> H_M) {
    p.s_w = base.P_bar;
    const DerivedGains d = derive_parameters(base, p, H_M);
    p.s_p = d.s_p;
    p.s_s = d.s_s;
    p.H_p = d.H_p;
    p.H_s = d.H_s;
    return p;
}

FullState initial_state(const ParameterSet& p, const SubjectBaseline& base,
                        bool literal_table_strain) {
    const double eps0 = literal_table_strain
                            ? 1.0 - std::sqrt(2.0 / (p.A + 1.0))
                            : p.K_b * wall_strain(base.P_bar, p);
    return {eps0, eps0, kTp0, kTs0, base.H_bar};
}

ReducedState reduced_initial_state(const ParameterSet&, const SubjectBaseline& base) {
    return {kTs0, base.H_bar};
}

DdeSystem make_full_system(const ParameterSet& p, std::function<double(double)> sbp,
                           const FullState& x0) {
    p.validate();
    DdeSystem sys;
    sys.dimension = 5;
    sys.delay = p.D_s;
    sys.history.assign(x0.begin(), x0.end());
    sys.breakpoints = {p.t_s, p.t_e};
    sys.rhs = [p, sbp = std::move(sbp)](double t, std::span<const double> x,
                                        std::span<const double> xd, std::span<double> out) {
        FullState xs, xds;
        std::copy(x.begin(), x.end(), xs.begin());
        std::copy(xd.begin(), xd.end(), xds.begin());
        const FullState dx = full_rhs(t, xs, xds, p, sbp);
        std::copy(dx.begin(), dx.end(), out.begin());
    };
    return sys;
}

DdeSystem make_reduced_system(const ParameterSet& p, const Forcing* forcing,
                              const ReducedState& x0) {
    p.validate();
    DdeSystem sys;
    sys.dimension = 2;
    sys.delay = p.D_s;
    sys.history.assign(x0.begin(), x0.end());
    if (forcing) sys.breakpoints = {p.t_s, p.t_e};
    sys.rhs = [p, forcing](double t, std::span<const double> x, std::span<const double> xd,
                           std::span<double> out) {
        const ReducedState dx = reduced_rhs(t, {x[0], x[1]}, {xd[0], xd[1]}, p, forcing);
        out[0] = dx[0];
        out[1] = dx[1];
    };
    // The reduced system is linear in the undelayed state.
    sys.jacobian = [p](double, std::span<const double>, std::span<const double>,
                       std::span<double> jac) {
        jac[0] = 0.0;
        jac[1] = 0.0;
        jac[2] = p.H_I * p.H_s / p.tau_H;
        jac[3] = -1.0 / p.tau_H;
    };
    return sys;
}

ParameterFile parse_parameter_file(std::istream& is) {
    ParameterFile out;
    std::map<std::string, double*> keys = {
        {"A", &out.params.A},         {"B", &out.params.B},
        {"K_b", &out.params.K_b},     {"K_p", &out.params.K_p},
        {"K_s", &out.params.K_s},     {"tau_b", &out.params.tau_b},
        {"tau_p", &out.params.tau_p}, {"tau_s", &out.params.tau_s},
        {"tau_H", &out.params.tau_H}, {"q_w", &out.params.q_w},
        {"q_p", &out.params.q_p},     {"q_s", &out.params.q_s},
        {"s_w", &out.params.s_w},     {"s_p", &out.params.s_p},
        {"s_s", &out.params.s_s},     {"H_I", &out.params.H_I},
        {"H_p", &out.params.H_p},     {"H_s", &out.params.H_s},
        {"D_s", &out.params.D_s},     {"t_s", &out.params.t_s},
        {"t_e", &out.params.t_e},     {"P_bar", &out.baseline.P_bar},
        {"H_bar", &out.baseline.H_bar}, {"age", &out.baseline.age},
    };
    bool explicit_sigmoid = false;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string key, eq, value;
        std::istringstream ls(line);
        if (!(ls >> key)) continue;  // blank
        if (!(ls >> eq >> value) || eq != "=")
            throw InputError("parameter file line " + std::to_string(lineno) +
                             ": expected `name = value`");
        std::string rest;
        if (ls >> rest)
            throw InputError("parameter file line " + std::to_string(lineno) +
                             ": trailing content after value");
        auto it = keys.find(key);
        if (it == keys.end())
            throw InputError("parameter file line " + std::to_string(lineno) +
                             ": unknown key `" + key + "`");
        try {
            std::size_t pos = 0;
            *it->second = std::stod(value, &pos);
            if (pos != value.size()) throw std::invalid_argument(value);
        } catch (const std::exception&) {
            throw InputError("parameter file line " + std::to_string(lineno) +
                             ": bad numeric value `" + value + "`");
        }
        if (key == "P_bar" || key == "H_bar" || key == "age") out.has_baseline = true;
        if (key == "s_p" || key == "s_s" || key == "H_p" || key == "H_s") explicit_sigmoid = true;
    }
    out.derive = out.has_baseline && !explicit_sigmoid;
    if (out.derive) {
        out.params = with_derived_parameters(out.params, out.baseline);
    } else if (out.has_baseline) {
        out.params.s_w = out.baseline.P_bar;
    }
    out.params.validate();
    return out;
}

ParameterFile load_parameter_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot open parameter file: " + path);
    return parse_parameter_file(f);
}

} // namespace vmbaro
