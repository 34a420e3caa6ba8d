#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "slg/drivers.hpp"

using namespace slg;

static std::vector<cplx> conj_all(const std::vector<cplx>& xs) {
    std::vector<cplx> out;
    for (const cplx& x : xs) out.push_back(std::conj(x));
    return out;
}

// random conjugate-slice configuration with pairwise-separated drivers
static std::vector<cplx> random_xis(std::mt19937& rng, int n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<cplx> xis;
    while (int(xis.size()) < n) {
        cplx c = std::polar(0.15 + 0.7 * u(rng), 2.0 * M_PI * u(rng));
        bool ok = true;
        for (const cplx& x : xis)
            if (std::abs(x - c) < 0.05) ok = false;
        if (ok) xis.push_back(c);
    }
    return xis;
}

// half-diagonal log-sum whose xi_n derivative drift_g differentiates in
// closed form (2/kappa prefactor cancels against -kappa/2 and is dropped)
static cplx log_sum(const std::vector<cplx>& xis, const std::vector<cplx>& xistars) {
    const size_t N = xis.size();
    cplx l = 0.0;
    for (size_t k = 0; k < N; ++k) {
        for (size_t n = k + 1; n < N; ++n)
            l += std::log(xis[k] - xis[n]) +
                 std::log(1.0 - xis[k] * xistars[n]) + std::log(1.0 - xistars[k] * xis[n]);
        l += std::log(1.0 - xis[k] * xistars[k]);
    }
    return l;
}

TEST_CASE("z_n_product pinned values and rotation invariance") {
    CHECK(std::abs(z_n_product({0.5}, {0.5}, 4.0) - 0.75) < 1e-14);

    std::vector<cplx> xis = {0.3, -0.3};
    double z2 = 0.6 * 0.91 * 1.09 * 0.91;
    CHECK(std::abs(z_n_product(xis, conj_all(xis), 4.0) - z2) < 1e-14);

    std::mt19937 rng(7);
    std::vector<cplx> xr = random_xis(rng, 4);
    double z0 = z_n_product(xr, conj_all(xr), 6.0);
    for (double theta : {0.7, 2.9}) {
        std::vector<cplx> rot, rots;
        for (const cplx& x : xr) {
            rot.push_back(x * std::polar(1.0, theta));
            rots.push_back(std::conj(x) * std::polar(1.0, -theta));
        }
        CHECK(std::abs(z_n_product(rot, rots, 6.0) - z0) < 1e-12 * z0);
    }

    CHECK_THROWS_AS(z_n_product({0.5, 0.5 + 1e-13}, {0.5, 0.5}, 4.0), CoincidentDrivers);
}

TEST_CASE("drift constant -(2N-1)/2 on the conjugate slice") {
    RateParams p = RateParams::make(2.0 * M_PI, 1.0, {});
    std::mt19937 rng(13);
    for (int rep = 0; rep < 100; ++rep) {
        for (int N : {1, 2, 3, 5}) {
            std::vector<cplx> xis = random_xis(rng, N);
            std::vector<cplx> xistars = conj_all(xis);
            for (int n = 0; n < N; ++n) {
                cplx g = drift_g(n, xis, xistars, 6.0, p);
                CHECK(std::abs(g - cplx(-(2.0 * N - 1.0) / 2.0)) < 1e-10);
            }
        }
    }
}

TEST_CASE("drift against finite-difference log Z oracle") {
    // 4th-order central difference of the holomorphic log-sum; oracle is
    // independent of the closed-form pair loop in drift_g
    RateParams p = RateParams::make(2.0 * M_PI, 1.0, {});
    std::mt19937 rng(19);
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<cplx> xis = random_xis(rng, 3);
        std::vector<cplx> xistars = conj_all(xis);
        for (int n = 0; n < 3; ++n) {
            double h = 1e-4;
            auto L = [&](cplx dx) {
                std::vector<cplx> xp = xis;
                xp[n] += dx;
                return log_sum(xp, xistars);
            };
            cplx dl = (8.0 * (L(h) - L(-h)) - (L(2.0 * h) - L(-2.0 * h))) / (12.0 * h);
            cplx g_oracle = -xis[n] * dl;
            for (size_t m = 0; m < 3; ++m) {
                if (m != size_t(n))
                    g_oracle += 0.5 * (xis[n] + xis[m]) / (xis[n] - xis[m]);
                g_oracle += 0.5 * (xis[n] * xistars[m] + 1.0) / (xis[n] * xistars[m] - 1.0);
            }
            cplx g = drift_g(n, xis, xistars, 6.0, p);
            CHECK(std::abs(g - g_oracle) < 1e-8);
        }
    }
}

TEST_CASE("generalized center contributes the -sigma constant") {
    double alpha = 0.4;
    RateParams plain = RateParams::make(2.0 * M_PI, 1.0, {alpha});
    RateParams gen = RateParams::make(2.0 * M_PI, 1.0, {alpha}, true);
    CHECK(gen.generalized());
    CHECK(std::abs(gen.sigma - (1.0 + 0.5 * alpha)) < 1e-15);
    CHECK(std::abs(gen.lambdas[0] + gen.sigma) < 1e-15);
    CHECK(std::abs(gen.alphas[0] + 2.0 * gen.sigma) < 1e-15);

    for (cplx xi : {cplx(0.5, 0.2), cplx(-0.3, 0.6)}) {
        cplx g_plain = drift_g(0, {xi}, {std::conj(xi)}, 6.0, plain);
        cplx g_gen = drift_g(1, {0.0, xi}, {0.0, std::conj(xi)}, 6.0, gen);
        CHECK(std::abs(g_gen - g_plain - cplx(-gen.sigma)) < 1e-12);
    }
}

TEST_CASE("time_change exact and fractal modes") {
    ConformalMap id{1.0, {}, {}};
    auto dq = time_change(id, {2.0}, 0.7, 1e-3, {});
    CHECK(std::abs(dq[0] - 0.7e-3) < 1e-18);

    ConformalMap circle{2.0, {}, {}};
    auto dqc = time_change(circle, {100.0}, 1.0, 1e-3, {});
    CHECK(std::abs(dqc[0] - 1e-3 / 4.0) < 1e-15);

    // fractal fallback with alpha = 1 and eps = |w'| reproduces exact mode
    ConformalMap m{1.1, {{cplx(0.01, 0.004), cplx(0.3, 0.2)}}, {}};
    std::vector<cplx> anchors = {cplx(2.0, 0.5), cplx(-1.8, 0.3)};
    auto exact = time_change(m, anchors, 1.0, 1e-3, {});
    TimeChangeMode fr;
    fr.kind = TimeChangeMode::fractal;
    fr.alpha = 1.0;
    for (const cplx& a : anchors) {
        cplx w = invert_map(m, a, a / m.radius);
        fr.eps.push_back(1.0 / std::abs(m.dz(w)));
    }
    auto frac = time_change(m, anchors, 1.0, 1e-3, fr);
    for (size_t n = 0; n < anchors.size(); ++n)
        CHECK(std::abs(frac[n] - exact[n]) < 0.1 * exact[n]);

    CHECK_THROWS_AS(time_change(id, {2.0}, 1.0, 0.0, {}), NonpositiveDt);
}

static DriverState one_driver(cplx xi) {
    DriverState s;
    s.xis = {xi};
    s.xistars = {std::conj(xi)};
    s.qs = {0.0};
    return s;
}

TEST_CASE("step_drivers radial/angular split") {
    RateParams p = RateParams::make(2.0 * M_PI, 1.0, {0.5});
    DriverState s = one_driver(cplx(0.6, 0.2));

    // kappa = 0, Re(-sigma + g) = -(sigma + 1/2) < 0: |xi| strictly decreases
    DriverState s0 = step_drivers(s, {1e-3}, 0.0, p, 0.0, DriverMode::conjugate_slice);
    CHECK(std::abs(s0.xis[0]) < std::abs(s.xis[0]));
    CHECK(s0.xistars[0] == std::conj(s0.xis[0]));  // bit-exact
    CHECK(s0.qs[0] == 1e-3);

    // the noise is a pure rotation: |xi| independent of dW
    DriverState a = step_drivers(s, {1e-3}, 0.031, p, 6.0, DriverMode::conjugate_slice);
    DriverState b = step_drivers(s, {1e-3}, -0.074, p, 6.0, DriverMode::conjugate_slice);
    CHECK(std::abs(a.xis[0]) == std::abs(b.xis[0]));

    // determinism: identical inputs give bit-identical outputs
    DriverState c = step_drivers(s, {1e-3}, 0.031, p, 6.0, DriverMode::conjugate_slice);
    CHECK(a.xis[0] == c.xis[0]);
    CHECK(a.w_accum == c.w_accum);
}

TEST_CASE("step_drivers rotational covariance at kappa = 0") {
    RateParams p = RateParams::make(2.0 * M_PI, 1.0, {0.3, 0.3});
    std::mt19937 rng(29);
    std::vector<cplx> xis = random_xis(rng, 2);
    DriverState s;
    s.xis = xis;
    s.xistars = conj_all(xis);
    s.qs = {0.0, 0.0};
    DriverState stepped = step_drivers(s, {1e-3, 1e-3}, 0.0, p, 0.0,
                                       DriverMode::conjugate_slice);
    double theta = 1.234;
    DriverState sr;
    for (const cplx& x : xis) {
        sr.xis.push_back(x * std::polar(1.0, theta));
        sr.xistars.push_back(std::conj(sr.xis.back()));
    }
    sr.qs = {0.0, 0.0};
    DriverState stepped_r = step_drivers(sr, {1e-3, 1e-3}, 0.0, p, 0.0,
                                         DriverMode::conjugate_slice);
    for (int n = 0; n < 2; ++n)
        CHECK(std::abs(stepped_r.xis[n] - stepped.xis[n] * std::polar(1.0, theta)) < 1e-10);
}

TEST_CASE("step_drivers error paths") {
    RateParams p = RateParams::make(2.0 * M_PI, 1.0, {0.5, 0.5});
    std::mt19937 rng(31);
    std::vector<cplx> xis = random_xis(rng, 2);
    DriverState s;
    s.xis = xis;
    s.xistars = conj_all(xis);
    s.qs = {0.0, 0.0};
    CHECK_THROWS_AS(step_drivers(s, {1e-6, 2e-6}, 0.0, p, 6.0, DriverMode::conjugate_slice),
                    ClockSkew);

    // huge Ito correction pushes |xi| past 1
    RateParams weak = RateParams::make(2.0 * M_PI, 1e3, {});
    DriverState near = one_driver(cplx(0.9, 0.0));
    CHECK_THROWS_AS(step_drivers(near, {0.2}, 0.0, weak, 100.0, DriverMode::conjugate_slice),
                    DriverEscaped);

    DriverState coin;
    coin.xis = {0.5, 0.5};
    coin.xistars = {0.5, 0.5};
    coin.qs = {0.0, 0.0};
    CHECK_THROWS_AS(step_drivers(coin, {1e-6, 1e-6}, 0.0, p, 6.0, DriverMode::conjugate_slice),
                    CoincidentDrivers);
}

TEST_CASE("generalized center accumulates its log gap") {
    RateParams gen = RateParams::make(2.0 * M_PI, 1.0, {0.4}, true);
    DriverState s;
    s.xis = {0.0, cplx(0.5, 0.1)};
    s.xistars = {0.0, cplx(0.5, -0.1)};
    s.qs = {0.0, 0.0};
    double dq = 1e-4, dW = 0.02, kappa = 6.0;

    cplx g0 = drift_g(0, s.xis, s.xistars, kappa, gen);
    cplx dlog = (g0 + 0.25 * kappa) * dq + cplx(0.0, dW);

    DriverState cs = step_drivers(s, {dq, dq}, dW, gen, kappa, DriverMode::conjugate_slice);
    CHECK(cs.xis[0] == cplx(0.0));  // fixed point of the multiplicative update
    CHECK(std::abs(cs.center_log_gap - (std::conj(dlog) - dlog)) < 1e-16);

    cplx gs0 = drift_g_star(0, s.xis, s.xistars, kappa, gen);
    cplx dlogs = (-gs0 + 0.25 * kappa) * dq - cplx(0.0, dW);
    DriverState ld = step_drivers(s, {dq, dq}, dW, gen, kappa, DriverMode::literal_double);
    CHECK(std::abs(ld.center_log_gap - (dlogs - dlog)) < 1e-16);
}

TEST_CASE("noise stream variance and determinism") {
    NoiseStream ns{42, 3, 6.0};
    double dq = 1e-3;
    double sum = 0.0, sum2 = 0.0;
    const int n = 100000;
    for (int k = 0; k < n; ++k) {
        double w = ns.dW(k, dq);
        sum += w;
        sum2 += w * w;
    }
    double var = sum2 / n - (sum / n) * (sum / n);
    CHECK(std::abs(var - 0.5 * 6.0 * dq) < 0.02 * 0.5 * 6.0 * dq);

    NoiseStream ns2{42, 3, 6.0};
    CHECK(ns.dW(17, dq) == ns2.dW(17, dq));
    CHECK(ns.dW(17, dq, 1) != ns.dW(17, dq, 0));
}

TEST_CASE("doubling kappa doubles the angular increment variance") {
    RateParams p = RateParams::make(2.0 * M_PI, 1.0, {});
    double dq = 1e-4;
    auto ang_var = [&](double kappa, uint64_t seed) {
        NoiseStream ns{seed, 0, kappa};
        DriverState s = one_driver(cplx(0.5, 0.0));
        double sum = 0.0, sum2 = 0.0;
        const int n = 10000;
        for (int k = 0; k < n; ++k) {
            DriverState t = step_drivers(s, {dq}, ns.dW(k, dq), p, kappa,
                                         DriverMode::conjugate_slice);
            double da = std::arg(t.xis[0] / s.xis[0]);
            sum += da;
            sum2 += da * da;
        }
        return sum2 / n - (sum / n) * (sum / n);
    };
    double r = ang_var(12.0, 5) / ang_var(6.0, 5);
    CHECK(std::abs(r - 2.0) < 0.05 * 2.0);
}
