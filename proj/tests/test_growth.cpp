#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "slg/growth.hpp"

using namespace slg;

static GrowthState circle_state(double r0, GrowthMode mode, int grid_m = 512) {
    RateParams p = RateParams::make(2.0 * M_PI, 1.0, {});
    return make_growth_state(r0, {}, {}, {}, p, 6.0, DriverMode::conjugate_slice, mode, grid_m);
}

static std::vector<LogTerm> small_perturbations() {
    return {{cplx(0.03, 0.01), cplx(0.4, 0.1)}, {cplx(-0.03, -0.01), cplx(-0.35, 0.2)}};
}

// principal-branch re-evaluation of the conserved probes z(1/conj(a_k));
// valid while the probes stay clear of the sweep's branch cuts
static double target_residual(const GrowthState& st) {
    double worst = 0.0;
    for (size_t j = 0; j < st.map.terms.size(); ++j) {
        cplx v = 1.0 / std::conj(st.map.terms[j].sing);
        worst = std::max(worst, std::abs(st.map.z(v) - st.targets[j]) /
                                    (1.0 + std::abs(st.targets[j])));
    }
    return worst;
}

TEST_CASE("deterministic circle obeys the exact radius law") {
    GrowthState st = circle_state(1.0, GrowthMode::deterministic);
    NoiseStream ns{1, 0, 0.0};
    double bigQ = st.params.bigQ;
    for (int k = 1; k <= 20; ++k) {
        StepReport rep = grow_step(st, 1e-2, ns);
        double r_exact = std::sqrt(1.0 + bigQ * st.t / M_PI);
        CHECK(std::abs(st.map.radius - r_exact) < 1e-10);
        CHECK(std::abs(rep.area_quadrature - rep.area_closed_form) <
              1e-8 * rep.area_quadrature);
    }
}

TEST_CASE("perturbed deterministic run conserves moments, targets, area") {
    RateParams p = RateParams::make(2.0 * M_PI, 1.0, {});
    GrowthState st = make_growth_state(1.0, small_perturbations(), {}, {}, p, 0.0,
                                       DriverMode::conjugate_slice,
                                       GrowthMode::deterministic, 1024);
    NoiseStream ns{1, 0, 0.0};
    BoundaryGrid g0 = make_grid(st.map, 1024);
    MomentVector m0 = harmonic_moments(st.map, g0, 5);
    double area0 = st.area0_quad;
    for (int k = 0; k < 50; ++k) {
        StepReport rep = grow_step(st, 1e-3, ns);
        CHECK(rep.max_residual < 1e-12);
        CHECK(std::abs(rep.area_quadrature - (area0 + st.params.bigQ * st.t)) <
              1e-8 * rep.area_quadrature);
    }
    CHECK(target_residual(st) < 1e-10);
    BoundaryGrid g1 = make_grid(st.map, 1024);
    MomentVector m1 = harmonic_moments(st.map, g1, 5);
    for (int k = 0; k < 5; ++k) CHECK(std::abs(m1.tk[k] - m0.tk[k]) < 1e-6);
    CHECK(std::abs(m1.t0 - (m0.t0 + st.params.bigQ * st.t / M_PI)) < 1e-8 * m1.t0);
}

TEST_CASE("lg residual vanishes for the single-sink flow") {
    // circle: exact solution, residual at the dt-discretization floor
    GrowthState st = circle_state(1.0, GrowthMode::deterministic);
    NoiseStream ns{1, 0, 0.0};
    Snapshot a{0, st.t, st.map, st.drivers};
    grow_step(st, 1e-4, ns);
    Snapshot b{1, st.t, st.map, st.drivers};
    double worst = 0.0;
    for (double r : lg_residual(a, b, st.params.bigQ, 512)) worst = std::max(worst, std::abs(r));
    CHECK(worst < 1e-6);

    // perturbed circle: first order in dt
    RateParams p = RateParams::make(2.0 * M_PI, 1.0, {});
    GrowthState sp = make_growth_state(1.0, small_perturbations(), {}, {}, p, 0.0,
                                       DriverMode::conjugate_slice,
                                       GrowthMode::deterministic, 1024);
    Snapshot pa{0, sp.t, sp.map, sp.drivers};
    grow_step(sp, 1e-4, ns);
    Snapshot pb{1, sp.t, sp.map, sp.drivers};
    worst = 0.0;
    for (double r : lg_residual(pa, pb, p.bigQ, 1024)) worst = std::max(worst, std::abs(r));
    CHECK(worst < 1e-4);
}

TEST_CASE("density reductions and flux normalization") {
    // N=0 stochastic reduces to the deterministic density
    ConformalMap m{1.2, {{cplx(0.01, 0.005), cplx(0.3, -0.2)}}, {}};
    BoundaryGrid g = make_grid(m, 512);
    RateParams p0 = RateParams::make(3.0, 1.0, {});
    DriverState empty;
    auto det = density(m, empty, p0, GrowthMode::deterministic, g);
    auto sto = density(m, empty, p0, GrowthMode::stochastic, g);
    for (int j = 0; j < g.m; ++j) CHECK(std::abs(sto[j] - det[j]) < 1e-15 * det[j]);

    // xi = 0: kernel is 1, bracket constant sigma - alpha/2
    ConformalMap id{1.0, {}, {}};
    BoundaryGrid gi = make_grid(id, 256);
    RateParams p1 = RateParams::make(2.0 * M_PI, 1.0, {0.5});
    DriverState center;
    center.xis = {0.0};
    center.xistars = {0.0};
    center.qs = {0.0};
    auto rho_c = density(id, center, p1, GrowthMode::stochastic, gi);
    double expect = p1.nu * (p1.sigma - 0.25);
    for (double r : rho_c) CHECK(std::abs(r - expect) < 1e-15);

    // flux: oint rho |z'|^2 dphi = Q
    RateParams p2 = RateParams::make(5.0, 0.7, {0.4, 0.6});
    DriverState ds;
    ds.xis = {cplx(0.3, 0.4), cplx(-0.5, 0.1)};
    ds.xistars = {std::conj(ds.xis[0]), std::conj(ds.xis[1])};
    ds.qs = {0.0, 0.0};
    auto rho = density(m, ds, p2, GrowthMode::stochastic, g);
    double flux = 0.0;
    for (int j = 0; j < g.m; ++j)
        flux += rho[j] * std::norm(g.dz_vals[j]) * (2.0 * M_PI / g.m);
    CHECK(std::abs(flux - p2.bigQ) < 1e-10 * p2.bigQ);
}

TEST_CASE("stochastic step bookkeeping") {
    RateParams p = RateParams::make(2.0 * M_PI, 1.0, {0.3});
    GrowthState st = make_growth_state(1.0, small_perturbations(), {cplx(0.5, 0.1)},
                                       {cplx(2.0, 0.4)}, p, 6.0,
                                       DriverMode::conjugate_slice,
                                       GrowthMode::stochastic, 512);
    NoiseStream ns{9, 0, 6.0};
    const size_t K = st.n_initial_terms;
    for (int k = 1; k <= 10; ++k) {
        StepReport rep = grow_step(st, 1e-5, ns);
        CHECK(rep.max_residual < 1e-12);
        CHECK(st.map.terms.size() == K + size_t(k));
        CHECK(st.targets.size() == st.map.terms.size());
        CHECK(std::abs(rep.area_quadrature - rep.area_closed_form) <
              1e-8 * rep.area_quadrature);
        CHECK(rep.min_density > 0.0);
        for (const auto& t : st.map.terms) CHECK(std::abs(t.sing) < 1.0);
    }
    CHECK(st.drivers.qs[0] > 0.0);
    CHECK(st.coeff_history[0].size() == 10);
}

TEST_CASE("driver at the circle aborts loudly") {
    RateParams p = RateParams::make(2.0 * M_PI, 1.0, {0.3});
    GrowthState st = make_growth_state(1.0, {}, {cplx(1.0 - 1e-9, 0.0)}, {cplx(2.0, 0.0)},
                                       p, 6.0, DriverMode::conjugate_slice,
                                       GrowthMode::stochastic, 256);
    NoiseStream ns{1, 0, 6.0};
    CHECK_THROWS_AS(grow_step(st, 1e-10, ns), Error);
}

TEST_CASE("nonpositive dt is rejected") {
    GrowthState st = circle_state(1.0, GrowthMode::deterministic);
    NoiseStream ns{1, 0, 0.0};
    CHECK_THROWS_AS(grow_step(st, 0.0, ns), NonpositiveDt);
}

TEST_CASE("pruning a tiny term moves the boundary by less than 10 tau") {
    RateParams p = RateParams::make(2.0 * M_PI, 1.0, {});
    auto terms = small_perturbations();
    terms.push_back({cplx(1e-9, -5e-10), cplx(0.1, 0.55)});
    GrowthState st = make_growth_state(1.0, terms, {}, {}, p, 0.0,
                                       DriverMode::conjugate_slice,
                                       GrowthMode::deterministic, 512);
    NoiseStream ns{1, 0, 0.0};
    for (int k = 0; k < 3; ++k) grow_step(st, 1e-3, ns);
    GrowthState ref = st;
    double tau = 1e-8;
    int n = prune_terms(st, tau);
    CHECK(n == 1);
    CHECK(st.map.terms.size() == ref.map.terms.size() - 1);
    BoundaryGrid ga = make_grid(ref.map, 512);
    BoundaryGrid gb = make_grid(st.map, 512);
    double worst = 0.0;
    for (int j = 0; j < 512; ++j)
        worst = std::max(worst, std::abs(ga.z_vals[j] - gb.z_vals[j]));
    CHECK(worst < 10.0 * tau);

    // pruning with nothing to prune is a no-op
    CHECK(prune_terms(st, 1e-15) == 0);
}
