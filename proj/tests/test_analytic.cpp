#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "vmbaro/analytic.hpp"

using namespace vmbaro;
using cplx = std::complex<double>;

namespace {
constexpr double kE = 2.718281828459045235;
constexpr double kPi = 3.141592653589793238;

double w_residual(cplx z, cplx w) { return std::abs(w * std::exp(w) - z); }
} // namespace

TEST_CASE("Lambert W principal branch: known values") {
    CHECK(lambert_w0(0.0) == cplx(0.0, 0.0));
    CHECK(std::real(lambert_w0(kE)) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::imag(lambert_w0(kE)) == 0.0);
    CHECK(std::real(lambert_w0(-1.0 / kE)) == doctest::Approx(-1.0).epsilon(1e-9));

    // reference values computed with arbitrary-precision arithmetic
    struct Ref { cplx z, w; };
    const Ref refs[] = {
        {{1.0, 0.0}, {0.56714329040978387, 0.0}},
        {{10.0, 0.0}, {1.7455280027406994, 0.0}},
        {{100.0, 0.0}, {3.3856301402900502, 0.0}},
        {{1000.0, 0.0}, {5.2496028524015962, 0.0}},
        {{-0.1, 0.0}, {-0.11183255915896297, 0.0}},
        {{-0.3, 0.0}, {-0.48940222718021493, 0.0}},
        {{-1.0, 0.0}, {-0.31813150520476414, 1.3372357014306894}},
        {{-2.0, 0.0}, {0.17281600283999998, 1.6736864137408427}},
        {{-10.0, 0.0}, {1.3699809685212708, 2.1401945270747132}},
        {{-100.0, 0.0}, {3.2053807863074494, 2.4825905318159236}},
        {{1.0, 1.0}, {0.65696606923043641, 0.32545033941341503}},
        {{-1.0, 1.0}, {0.27273665987781005, 1.041513086705297}},
        {{-0.5, -0.5}, {-0.038064409085799763, -0.73355428381879526}},
        {{100.0, -100.0}, {3.6443981613356009, -0.61754274568056183}},
        {{-0.5, 0.001}, {-0.79159872050103217, 0.76876677785559905}},
        {{0.0, 1.0}, {0.37469902073711749, 0.57641272303143528}},
        {{-kPi / 2.0, 0.0}, {0.0, kPi / 2.0}},
    };
    for (const auto& r : refs) {
        const cplx w = lambert_w0(r.z);
        INFO("z = ", std::real(r.z), " + ", std::imag(r.z), "i");
        CHECK(std::abs(w - r.w) < 1e-11 * std::max(1.0, std::abs(r.w)));
    }
}

TEST_CASE("Lambert W identity on random real and complex samples") {
    std::mt19937 rng(20240811u);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    int checked = 0;
    for (int k = 0; k < 10000; ++k) {
        cplx z;
        const int kind = k % 4;
        if (kind == 0) {
            // real, log-spaced over [-1/e, 1e3]
            const double mag = std::pow(10.0, -6.0 + 9.0 * unit(rng));
            z = cplx(std::min(mag, 1e3), 0.0);
        } else if (kind == 1) {
            z = cplx(-1.0 / kE + unit(rng) * (1.0 / kE), 0.0);  // [-1/e, 0]
        } else if (kind == 2) {
            // complex disk |z| <= 1e3
            const double r = 1e3 * std::sqrt(unit(rng));
            const double phi = 2.0 * kPi * unit(rng);
            z = std::polar(r, phi);
        } else {
            // near the branch point
            const double r = 0.2 * unit(rng);
            const double phi = 2.0 * kPi * unit(rng);
            z = cplx(-1.0 / kE, 0.0) + std::polar(r, phi);
        }
        const cplx w = lambert_w0(z);
        CHECK(w_residual(z, w) < 1e-12 * std::max(1.0, std::abs(z)));
        ++checked;
    }
    CHECK(checked == 10000);

    // principal branch convention on the cut: Im(w) in (0, pi)
    for (double zr : {-0.4, -1.0, -5.0, -50.0}) {
        const cplx w = lambert_w0(cplx(zr, 0.0));
        CHECK(std::imag(w) > 0.0);
        CHECK(std::imag(w) < kPi);
    }
}

TEST_CASE("principal root: critically damped point is exact") {
    const ComplexRoot r = principal_root(1.0, kE);
    CHECK(r.alpha == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(r.beta == 0.0);
    CHECK(characteristic_residual(1.0, kE, r.value()) < 1e-10);
}

TEST_CASE("principal root: Hopf point and real regime") {
    SUBCASE("Hopf: lambda = +/- (pi/2) i at (1, 2/pi)") {
        const ComplexRoot r = principal_root(1.0, 2.0 / kPi);
        CHECK(std::abs(r.alpha) < 1e-10);
        CHECK(r.beta == doctest::Approx(kPi / 2.0).epsilon(1e-12));
    }
    SUBCASE("overdamped: real negative principal root at (1, 2e)") {
        const ComplexRoot r = principal_root(1.0, 2.0 * kE);
        CHECK(r.beta == 0.0);
        CHECK(r.alpha < 0.0);
        CHECK(characteristic_residual(1.0, 2.0 * kE, r.value()) < 1e-10);
    }
    SUBCASE("focus and unstable signs around the Hopf line") {
        CHECK(principal_root(1.0, 2.1 / kPi).alpha < 0.0);
        CHECK(principal_root(1.0, 1.95 / kPi).alpha > 0.0);
    }
}

TEST_CASE("complex-root oracle agrees with the Lambert route") {
    SUBCASE("Hopf point") {
        const ComplexRoot r = complex_root_oracle(1.0, 2.0 / kPi);
        CHECK(std::abs(r.alpha) < 1e-10);
        CHECK(r.beta == doctest::Approx(kPi / 2.0).epsilon(1e-10));
    }
    SUBCASE("caption points") {
        CHECK(complex_root_oracle(1.0, 2.1 / kPi).alpha < 0.0);
        CHECK(complex_root_oracle(1.0, 1.95 / kPi).alpha > 0.0);
    }
    SUBCASE("random agreement in the complex regime") {
        std::mt19937 rng(7u);
        std::uniform_real_distribution<double> range(0.1, 10.0);
        int done = 0;
        while (done < 1000) {
            const double d = range(rng), tau = range(rng);
            if (!(kE * d > tau * 1.000001)) continue;
            const ComplexRoot a = principal_root(d, tau);
            const ComplexRoot b = complex_root_oracle(d, tau);
            const double dist = std::abs(a.value() - b.value());
            INFO("D_s=", d, " tau_s=", tau);
            CHECK(dist < 1e-8);
            ++done;
        }
    }
    SUBCASE("real regime rejected") {
        CHECK_THROWS_AS(complex_root_oracle(1.0, 2.0 * kE), InputError);
    }
}

TEST_CASE("homogeneous classification") {
    CHECK(classify_homogeneous(1.0, 2.0 * kE) == RegionClass::OverdampedSink);
    CHECK(classify_homogeneous(1.0, kE) == RegionClass::CriticallyDampedSink);
    CHECK(classify_homogeneous(1.0, 2.1 / kPi) == RegionClass::StableFocus);
    CHECK(classify_homogeneous(1.0, 2.0 / kPi) == RegionClass::LimitCycle);
    CHECK(classify_homogeneous(1.0, 1.95 / kPi) == RegionClass::Unstable);

    SUBCASE("boundaries are rays: classification is scale invariant") {
        std::mt19937 rng(99u);
        std::uniform_real_distribution<double> range(0.1, 10.0);
        std::uniform_real_distribution<double> scales(0.01, 100.0);
        for (int k = 0; k < 2000; ++k) {
            const double d = range(rng), tau = range(rng), c = scales(rng);
            CHECK(classify_homogeneous(d, tau) == classify_homogeneous(c * d, c * tau));
        }
    }

    SUBCASE("class matches the sign of the principal root's real part") {
        std::mt19937 rng(3u);
        std::uniform_real_distribution<double> range(0.1, 10.0);
        for (int k = 0; k < 2000; ++k) {
            const double d = range(rng), tau = range(rng);
            const RegionClass c = classify_homogeneous(d, tau);
            const ComplexRoot r = principal_root(d, tau);
            switch (c) {
                case RegionClass::OverdampedSink:
                case RegionClass::CriticallyDampedSink:
                    CHECK(r.alpha < 0.0);
                    CHECK(r.beta == 0.0);
                    break;
                case RegionClass::StableFocus:
                    CHECK(r.alpha < 0.0);
                    CHECK(r.beta > 0.0);
                    break;
                case RegionClass::LimitCycle:
                    CHECK(std::abs(r.alpha) < 1e-10);
                    break;
                case RegionClass::Unstable:
                    CHECK(r.alpha > 0.0);
                    break;
            }
        }
    }
}

TEST_CASE("explicit heart-rate solution") {
    ParameterSet p;  // nominal
    const double T_s0 = 0.2, H0 = 98.0;

    SUBCASE("initial condition holds exactly") {
        const ComplexRoot r{-0.5, 0.8};
        CHECK(h_explicit(0.0, r, p, T_s0, H0) == doctest::Approx(H0).epsilon(1e-13));
    }
    SUBCASE("late-time ratio approaches H_I H_s / (tau_H lambda + 1)") {
        const ComplexRoot r{-0.2, 0.0};
        const double lam = r.alpha;
        const double coef = p.H_I * p.H_s / (p.tau_H * lam + 1.0);
        const double t = 20.0 / std::abs(lam);
        const double ts = T_s0 * std::exp(lam * t);
        const double ratio = h_explicit(t, r, p, T_s0, H0) / ts;
        CHECK(ratio == doctest::Approx(coef).epsilon(1e-6));
    }
    SUBCASE("transient-free start when H0 matches the mode") {
        const ComplexRoot r{-0.3, 0.0};
        const double coef = p.H_I * p.H_s / (p.tau_H * r.alpha + 1.0);
        const double h0 = coef * T_s0;
        for (double t : {0.0, 1.0, 5.0, 10.0}) {
            const double expect = coef * T_s0 * std::exp(r.alpha * t);
            CHECK(h_explicit(t, r, p, T_s0, h0) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
    SUBCASE("resonance is an error") {
        const ComplexRoot r{-1.0 / p.tau_H, 0.0};
        CHECK_THROWS_AS(h_explicit(1.0, r, p, T_s0, H0), Error);
    }
}
