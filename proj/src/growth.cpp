#include "slg/growth.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace slg {

static constexpr double TWO_PI = 2.0 * M_PI;

struct NewtonCache {};  // reserved

// Hermitian double sum of (a:A): sum_{m,n} b_m conj(b_n)/2 log(1 - s_m conj(s_n));
// the sum is real, so the m>n half is the conjugate of the m<n half
static double area_log_sum(const ConformalMap& map) {
    const size_t S = map.terms.size();
    double acc = 0.0;
    for (size_t m = 0; m < S; ++m) {
        const auto& tm = map.terms[m];
        acc += 0.5 * std::norm(tm.coeff) * std::log(std::abs(1.0 - tm.sing * std::conj(tm.sing)));
        for (size_t n = m + 1; n < S; ++n)
            acc += (tm.coeff * std::conj(map.terms[n].coeff) *
                    std::log(1.0 - tm.sing * std::conj(map.terms[n].sing)))
                       .real();
    }
    return acc;
}

// chord-closed area / 2 pi of the swept boundary. When the coefficient sum
// g = sum b_m is nonzero the sweep is open and the straight chord across the
// 2 pi i g gap contributes the terms beyond r^2/2 + B (residue calculus on
// the unwrapped sweep):
//   A/2pi = r^2/2 + B - Re[conj(g) (r + sum_m b_m log(1 - s_m))]
static double closed_area(const ConformalMap& map) {
    cplx g = 0.0, lsum = 0.0;
    for (const auto& t : map.terms) {
        g += t.coeff;
        lsum += t.coeff * std::log(1.0 - t.sing);
    }
    return 0.5 * map.radius * map.radius + area_log_sum(map) -
           (std::conj(g) * (map.radius + lsum)).real();
}

// chord-closed quadrature area. With gap g = sum b_m != 0 the integrand
// f = (1/2) Im(conj(z) dz/dphi) is not periodic: f(phi + 2pi) - f(phi) =
// J(phi) = -pi Re(conj(g) i w z'). Summing f - (phi/2pi) J restores spectral
// accuracy; the linear part integrates in closed form,
//   int phi J dphi = -pi Re[conj(g) (2 pi r + sum b_m (2 pi^2 i
//                    + 2 pi log(1 - s_m)))].
static double quad_area(const ConformalMap& map, const BoundaryGrid& grid) {
    cplx g = 0.0, t = 0.0;
    for (const auto& tm : map.terms) {
        g += tm.coeff;
        t += tm.coeff * (cplx(0.0, 2.0 * M_PI * M_PI) +
                         TWO_PI * std::log(1.0 - tm.sing));
    }
    t += TWO_PI * map.radius;
    double area = 0.0, dphi = TWO_PI / grid.m;
    for (int j = 0; j < grid.m; ++j) {
        cplx zp = grid.dz_vals[j] * cplx(0.0, 1.0) * grid.w_vals[j];
        double f = 0.5 * (std::conj(grid.z_vals[j]) * zp).imag();
        double jump = -M_PI * (std::conj(g) * zp).real();
        area += (f - grid.phis[j] / TWO_PI * jump) * dphi;
    }
    area += -0.5 * (std::conj(g) * t).real();
    cplx z_end = grid.z_vals[0] + cplx(0.0, TWO_PI) * g;
    area += 0.5 * (std::conj(z_end) * (grid.z_vals[0] - z_end)).imag();
    return area;
}

// branch-continuous log(v/s - 1) relative to a committed imag value
static cplx cont_log(cplx v, cplx s, double committed_imag) {
    cplx l = std::log(v / s - 1.0);
    double k = std::round((committed_imag - l.imag()) / TWO_PI);
    return l + cplx(0.0, TWO_PI * k);
}

// z(v) with per-term committed branches (row = cached imags for this probe)
static cplx z_at_probe(const ConformalMap& map, cplx v, const std::vector<double>& row) {
    cplx z = map.radius * v;
    for (size_t m = 0; m < map.terms.size(); ++m)
        z += map.terms[m].coeff * cont_log(v, map.terms[m].sing, row[m]);
    return z;
}

std::vector<double> density(const ConformalMap& map, const DriverState& drivers,
                            const RateParams& params, GrowthMode mode,
                            const BoundaryGrid& grid) {
    std::vector<double> rho(grid.m);
    if (mode == GrowthMode::deterministic) {
        for (int j = 0; j < grid.m; ++j)
            rho[j] = params.bigQ / TWO_PI / std::norm(grid.dz_vals[j]);
        return rho;
    }
    size_t first = params.generalized() ? 1 : 0;
    for (int j = 0; j < grid.m; ++j) {
        cplx u = grid.w_vals[j];
        double br = params.sigma;
        for (size_t n = first; n < drivers.xis.size(); ++n)
            br -= 0.5 * params.alphas[n] * ((u + drivers.xis[n]) / (u - drivers.xis[n])).real();
        rho[j] = params.nu / std::norm(grid.dz_vals[j]) * br;
    }
    return rho;
}

std::vector<cplx> density_double(const ConformalMap& map, const DriverState& drivers,
                                 const RateParams& params, const BoundaryGrid& grid) {
    std::vector<cplx> rho(grid.m);
    size_t first = params.generalized() ? 1 : 0;
    for (int j = 0; j < grid.m; ++j) {
        cplx u = grid.w_vals[j];
        cplx ui = 1.0 / u;
        cplx br = params.sigma;
        for (size_t n = first; n < drivers.xis.size(); ++n)
            br -= 0.25 * params.alphas[n] *
                  ((u + drivers.xis[n]) / (u - drivers.xis[n]) +
                   (ui + drivers.xistars[n]) / (ui - drivers.xistars[n]));
        rho[j] = params.nu / std::norm(grid.dz_vals[j]) * br;
    }
    return rho;
}

GrowthState make_growth_state(double r0, const std::vector<LogTerm>& initial_perturbations,
                              const std::vector<cplx>& xis0, const std::vector<cplx>& anchors,
                              const RateParams& params, double kappa, DriverMode driver_mode,
                              GrowthMode mode, int grid_m) {
    GrowthState st;
    st.map.radius = r0;
    st.map.terms = initial_perturbations;
    st.map.check_singularities();
    st.params = params;
    st.kappa = kappa;
    st.driver_mode = driver_mode;
    st.mode = mode;
    st.r0 = r0;
    st.n_initial_terms = initial_perturbations.size();
    st.grid_m = grid_m;

    st.drivers.xis = xis0;
    st.drivers.xistars.resize(xis0.size());
    for (size_t n = 0; n < xis0.size(); ++n) st.drivers.xistars[n] = std::conj(xis0[n]);
    st.drivers.qs.assign(xis0.size(), 0.0);
    st.drivers.anchors = anchors;

    const size_t K = st.map.terms.size();
    st.targets.resize(K);
    st.probe_log_imag.assign(K, std::vector<double>(K));
    for (size_t j = 0; j < K; ++j) {
        cplx v = 1.0 / std::conj(st.map.terms[j].sing);
        cplx z = st.map.radius * v;
        for (size_t m = 0; m < K; ++m) {
            cplx l = std::log(v / st.map.terms[m].sing - 1.0);
            st.probe_log_imag[j][m] = l.imag();
            z += st.map.terms[m].coeff * l;
        }
        st.targets[j] = z;
    }

    st.prev_zeta.resize(xis0.size());
    st.zeta_log_imag.assign(xis0.size(), std::vector<double>(K));
    for (size_t n = 0; n < xis0.size(); ++n) {
        cplx v = 1.0 / std::conj(xis0[n]);
        cplx z = st.map.radius * v;
        for (size_t m = 0; m < K; ++m) {
            cplx l = std::log(v / st.map.terms[m].sing - 1.0);
            st.zeta_log_imag[n][m] = l.imag();
            z += st.map.terms[m].coeff * l;
        }
        st.prev_zeta[n] = z;
    }
    st.prev_delta_zeta.assign(xis0.size(), 0.0);
    st.coeff_history.assign(xis0.size(), {});

    st.area_const0 = closed_area(st.map);

    st.area0_quad = quad_area(st.map, make_grid(st.map, grid_m));
    return st;
}

// ---- Newton solve of (a:const) + (a:A) -----------------------------------

namespace {

struct NewtonSystem {
    ConformalMap* map;
    const std::vector<cplx>* targets;
    const std::vector<std::vector<double>>* cache;  // committed branch imags
    size_t n_old;
    double area_const0, qt2pi;

    double eval(Eigen::VectorXd& res) const {
        const ConformalMap& mp = *map;
        double scaled = 0.0;
        for (size_t j = 0; j < n_old; ++j) {
            cplx v = 1.0 / std::conj(mp.terms[j].sing);
            cplx f = z_at_probe(mp, v, (*cache)[j]) - (*targets)[j];
            res[1 + 2 * j] = f.real();
            res[2 + 2 * j] = f.imag();
            scaled = std::max(scaled, std::abs(f) / (1.0 + std::abs((*targets)[j])));
        }
        double a = closed_area(mp) - area_const0 - qt2pi;
        res[0] = a;
        scaled = std::max(scaled, std::abs(a) / (1.0 + std::abs(qt2pi)));
        return scaled;
    }

    void jacobian(Eigen::MatrixXd& J) const {
        const ConformalMap& mp = *map;
        const size_t S = mp.terms.size();
        J.setZero();
        // area row
        cplx g = 0.0;
        for (const auto& t : mp.terms) g += t.coeff;
        J(0, 0) = mp.radius - g.real();
        for (size_t j = 0; j < n_old; ++j) {
            cplx as = 0.0;  // dA/ds_j (holomorphic); dA/dconj(s_j) = conj(as)
            for (size_t n = 0; n < S; ++n)
                as += -0.5 * mp.terms[j].coeff * std::conj(mp.terms[n].coeff) *
                      std::conj(mp.terms[n].sing) /
                      (1.0 - mp.terms[j].sing * std::conj(mp.terms[n].sing));
            as += 0.5 * std::conj(g) * mp.terms[j].coeff / (1.0 - mp.terms[j].sing);
            J(0, 1 + 2 * j) = 2.0 * as.real();
            J(0, 2 + 2 * j) = -2.0 * as.imag();
        }
        for (size_t j = 0; j < n_old; ++j) {
            cplx sj = mp.terms[j].sing;
            cplx v = 1.0 / std::conj(sj);
            // d res_j / dr
            J(1 + 2 * j, 0) = v.real();
            J(2 + 2 * j, 0) = v.imag();
            cplx dzv = mp.dz(v);
            for (size_t m = 0; m < n_old; ++m) {
                cplx fs = -mp.terms[m].coeff * v / (mp.terms[m].sing * (v - mp.terms[m].sing));
                cplx fsb = 0.0;
                if (m == j)  // probe point v = 1/conj(s_j) moves with conj(s_j)
                    fsb = dzv * (-1.0 / (std::conj(sj) * std::conj(sj)));
                cplx dx = fs + fsb;
                cplx dy = cplx(0.0, 1.0) * (fs - fsb);
                J(1 + 2 * j, 1 + 2 * m) = dx.real();
                J(2 + 2 * j, 1 + 2 * m) = dx.imag();
                J(1 + 2 * j, 2 + 2 * m) = dy.real();
                J(2 + 2 * j, 2 + 2 * m) = dy.imag();
            }
        }
    }

    void get_x(Eigen::VectorXd& x) const {
        x[0] = map->radius;
        for (size_t j = 0; j < n_old; ++j) {
            x[1 + 2 * j] = map->terms[j].sing.real();
            x[2 + 2 * j] = map->terms[j].sing.imag();
        }
    }
    void set_x(const Eigen::VectorXd& x) const {
        map->radius = x[0];
        for (size_t j = 0; j < n_old; ++j)
            map->terms[j].sing = cplx(x[1 + 2 * j], x[2 + 2 * j]);
    }
};

// cheap Gauss-Seidel sweeps on the diagonal Wirtinger blocks; the pre-update
// residuals double as the convergence proxy (one extra sweep after they pass
// the tolerance, then a full eval confirms); returns the scaled residual
double diagonal_sweeps(const NewtonSystem& sys, int n_sweeps, const Tolerances& tol) {
    ConformalMap& mp = *sys.map;
    double proxy = 1e300;
    for (int sweep = 0; sweep < n_sweeps && proxy > 0.25 * tol.newton; ++sweep) {
        // radius from the area equation
        double a = closed_area(mp) - sys.area_const0 - sys.qt2pi;
        proxy = std::abs(a) / (1.0 + std::abs(sys.qt2pi));
        cplx g = 0.0;
        for (const auto& t : mp.terms) g += t.coeff;
        double dadr = mp.radius - g.real();
        if (dadr > 0.1 * mp.radius) mp.radius -= a / dadr;
        for (size_t j = 0; j < sys.n_old; ++j) {
            cplx sj = mp.terms[j].sing;
            cplx v = 1.0 / std::conj(sj);
            cplx f = z_at_probe(mp, v, (*sys.cache)[j]) - (*sys.targets)[j];
            proxy = std::max(proxy, std::abs(f) / (1.0 + std::abs((*sys.targets)[j])));
            cplx fs = -mp.terms[j].coeff * v / (sj * (v - sj));
            cplx fsb = mp.dz(v) * (-1.0 / (std::conj(sj) * std::conj(sj)));
            cplx dx = fs + fsb, dy = cplx(0.0, 1.0) * (fs - fsb);
            double det = dx.real() * dy.imag() - dy.real() * dx.imag();
            if (std::abs(det) < 1e-300) continue;
            double hx = (-f.real() * dy.imag() + f.imag() * dy.real()) / det;
            double hy = (-dx.real() * f.imag() + dx.imag() * f.real()) / det;
            cplx s_new = sj + cplx(hx, hy);
            if (std::abs(s_new) < 1.0) mp.terms[j].sing = s_new;
        }
    }
    Eigen::VectorXd res(1 + 2 * sys.n_old);
    return sys.eval(res);
}

int newton_solve(NewtonSystem& sys, const Tolerances& tol, double& scaled_out) {
    const int dim = 1 + 2 * static_cast<int>(sys.n_old);
    Eigen::VectorXd res(dim), x(dim);
    int iters = 0;

    double scaled = diagonal_sweeps(sys, 6, tol);
    iters += 6;
    if (scaled <= tol.newton) {
        scaled_out = scaled;
        return iters;
    }

    Eigen::MatrixXd J(dim, dim);
    sys.eval(res);
    double rnorm = res.norm();
    for (; iters < tol.max_newton; ++iters) {
        scaled = sys.eval(res);
        if (scaled <= tol.newton) {
            scaled_out = scaled;
            return iters;
        }
        sys.jacobian(J);
        Eigen::VectorXd dxv = Eigen::PartialPivLU<Eigen::MatrixXd>(J).solve(-res);
        sys.get_x(x);
        double damp = 1.0;
        bool accepted = false;
        for (int h = 0; h < 10; ++h) {
            sys.set_x(x + damp * dxv);
            bool inside = sys.map->radius > 0.0;
            for (size_t j = 0; j < sys.n_old && inside; ++j)
                inside = std::abs(sys.map->terms[j].sing) < 1.0;
            if (inside) {
                Eigen::VectorXd res2(dim);
                sys.eval(res2);
                if (res2.norm() < rnorm) {
                    rnorm = res2.norm();
                    accepted = true;
                    break;
                }
            }
            damp *= 0.5;
        }
        if (!accepted) {
            sys.set_x(x);
            throw NewtonDiverged("no descent at residual " + std::to_string(rnorm));
        }
    }
    scaled = sys.eval(res);
    if (scaled <= tol.newton) {
        scaled_out = scaled;
        return iters;
    }
    throw NewtonDiverged("max iterations, scaled residual " + std::to_string(scaled));
}

}  // namespace

static StepReport try_step(GrowthState& st, double dt, const NoiseStream& noise,
                           const Tolerances& tol, const std::vector<double>* dqs_override) {
    StepReport rep;
    rep.dt_used = dt;
    const size_t N = st.mode == GrowthMode::stochastic ? st.drivers.xis.size() : 0;
    const double t_new = st.t + dt;

    size_t n_appended = 0;
    if (N > 0) {
        std::vector<double> dqs =
            dqs_override ? *dqs_override
                         : time_change(st.map, st.drivers.anchors, st.params.nu, dt);
        double qbar = 0.0;
        for (double q : dqs) qbar += q;
        qbar /= double(N);
        rep.dq_mean = qbar;
        double dW = noise.dW(st.step_index, qbar);
        st.drivers = step_drivers(st.drivers, dqs, dW, st.params, st.kappa, st.driver_mode,
                                  tol.skew);

        // zeta_n(t_{I+1}) on the pre-solve map, branch-continuous across steps
        for (size_t n = 0; n < N; ++n) {
            // frozen tip (dq = 0): the driver held, so a new term would
            // duplicate the previous singularity; the tip lays no source
            if (dqs[n] == 0.0) continue;
            cplx v = 1.0 / std::conj(st.drivers.xis[n]);
            cplx zeta = st.map.radius * v;
            for (size_t m = 0; m < st.map.terms.size(); ++m) {
                cplx l = cont_log(v, st.map.terms[m].sing, st.zeta_log_imag[n][m]);
                st.zeta_log_imag[n][m] = l.imag();
                zeta += st.map.terms[m].coeff * l;
            }
            cplx dzeta = zeta - st.prev_zeta[n];
            cplx c = st.params.nu * dt / dzeta;
            if (st.prev_delta_zeta[n] != 0.0) c -= st.params.nu * dt / st.prev_delta_zeta[n];
            st.coeff_history[n].push_back(c);
            st.prev_zeta[n] = zeta;
            st.prev_delta_zeta[n] = dzeta;

            // append the new log term; extend branch caches
            cplx sing = st.drivers.xis[n];
            for (size_t j = 0; j < st.probe_log_imag.size(); ++j) {
                cplx vj = 1.0 / std::conj(st.map.terms[j].sing);
                st.probe_log_imag[j].push_back(std::log(vj / sing - 1.0).imag());
            }
            for (size_t k = 0; k < N; ++k) {
                cplx vk = 1.0 / std::conj(st.drivers.xis[k]);
                st.zeta_log_imag[k].push_back(std::log(vk / sing - 1.0).imag());
            }
            st.map.terms.push_back({std::conj(c), sing});
            ++n_appended;
        }
    }

    NewtonSystem sys{&st.map, &st.targets, &st.probe_log_imag,
                     st.map.terms.size() - n_appended, st.area_const0,
                     st.params.bigQ * t_new / TWO_PI};
    double scaled = 0.0;
    if (sys.n_old > 0 || true)  // radius is always an unknown
        rep.newton_iters = newton_solve(sys, tol, scaled);
    rep.max_residual = scaled;

    st.map.check_singularities(tol.cusp);

    // targets and branch-cache rows for the terms created this step
    for (size_t j = sys.n_old; j < st.map.terms.size(); ++j) {
        cplx v = 1.0 / std::conj(st.map.terms[j].sing);
        std::vector<double> row(st.map.terms.size());
        cplx z = st.map.radius * v;
        for (size_t m = 0; m < st.map.terms.size(); ++m) {
            cplx l = std::log(v / st.map.terms[m].sing - 1.0);
            row[m] = l.imag();
            z += st.map.terms[m].coeff * l;
        }
        st.probe_log_imag.push_back(std::move(row));
        st.targets.push_back(z);
    }
    // re-commit branch caches for the old probes at the accepted state
    for (size_t j = 0; j < sys.n_old; ++j) {
        cplx v = 1.0 / std::conj(st.map.terms[j].sing);
        for (size_t m = 0; m < st.map.terms.size(); ++m)
            st.probe_log_imag[j][m] =
                cont_log(v, st.map.terms[m].sing, st.probe_log_imag[j][m]).imag();
    }

    BoundaryGrid grid = make_grid(st.map, st.grid_m);
    std::vector<double> rho = density(st.map, st.drivers, st.params, st.mode, grid);
    auto mn = std::min_element(rho.begin(), rho.end());
    rep.min_density = *mn;
    if (rep.min_density < 0.0)
        throw NegativeDensity("rho = " + std::to_string(rep.min_density) + " at phi = " +
                              std::to_string(grid.phis[mn - rho.begin()]));

    rep.area_quadrature = quad_area(st.map, grid);
    rep.area_closed_form = st.area0_quad + st.params.bigQ * t_new;

    st.t = t_new;
    st.step_index += 1;
    return rep;
}

StepReport grow_step(GrowthState& state, double dt, const NoiseStream& noise,
                     const Tolerances& tol, const std::vector<double>* dqs_override) {
    if (dt <= 0.0) throw NonpositiveDt("dt = " + std::to_string(dt));
    double dt_cur = dt;
    std::vector<double> dqs_scaled;
    for (int attempt = 0; attempt <= 6; ++attempt) {
        GrowthState work = state;
        const std::vector<double>* dqs = dqs_override;
        if (dqs_override && attempt > 0) {
            // the external clock scales linearly with dt
            dqs_scaled = *dqs_override;
            for (double& q : dqs_scaled) q *= dt_cur / dt;
            dqs = &dqs_scaled;
        }
        try {
            StepReport rep = try_step(work, dt_cur, noise, tol, dqs);
            state = std::move(work);
            return rep;
        } catch (const NewtonDiverged&) {
            if (attempt == 6) throw CuspDetected("persistent Newton failure, dt=" +
                                                 std::to_string(dt_cur));
        } catch (const NegativeDensity&) {
            if (attempt == 6) throw;
        }
        dt_cur *= 0.5;
    }
    throw CuspDetected("unreachable");
}

int prune_terms(GrowthState& state, double tau, const Tolerances& tol) {
    int pruned = 0;
    // merge near-coincident singularities, then drop small coefficients
    for (size_t i = 0; i < state.map.terms.size(); ++i) {
        for (size_t j = i + 1; j < state.map.terms.size();) {
            if (std::abs(state.map.terms[i].sing - state.map.terms[j].sing) < 1e-10) {
                state.map.terms[i].coeff += state.map.terms[j].coeff;
                state.map.terms.erase(state.map.terms.begin() + j);
                state.targets.erase(state.targets.begin() + j);
                ++pruned;
            } else {
                ++j;
            }
        }
    }
    for (size_t j = 0; j < state.map.terms.size();) {
        if (std::abs(state.map.terms[j].coeff) < tau) {
            state.map.terms.erase(state.map.terms.begin() + j);
            state.targets.erase(state.targets.begin() + j);
            ++pruned;
        } else {
            ++j;
        }
    }
    if (pruned == 0) return 0;
    // rebuild branch caches at the pruned state and re-solve
    const size_t S = state.map.terms.size();
    state.probe_log_imag.assign(S, std::vector<double>(S));
    for (size_t j = 0; j < S; ++j) {
        cplx v = 1.0 / std::conj(state.map.terms[j].sing);
        for (size_t m = 0; m < S; ++m)
            state.probe_log_imag[j][m] = std::log(v / state.map.terms[m].sing - 1.0).imag();
    }
    state.zeta_log_imag.assign(state.drivers.xis.size(), std::vector<double>(S));
    for (size_t n = 0; n < state.drivers.xis.size(); ++n) {
        cplx v = 1.0 / std::conj(state.drivers.xis[n]);
        for (size_t m = 0; m < S; ++m)
            state.zeta_log_imag[n][m] = std::log(v / state.map.terms[m].sing - 1.0).imag();
    }
    NewtonSystem sys{&state.map, &state.targets, &state.probe_log_imag, S,
                     state.area_const0, state.params.bigQ * state.t / TWO_PI};
    double scaled = 0.0;
    newton_solve(sys, tol, scaled);
    return pruned;
}

std::vector<double> lg_residual(const Snapshot& a, const Snapshot& b, double bigQ, int grid_m) {
    BoundaryGrid ga = make_grid(a.map, grid_m);
    BoundaryGrid gb = make_grid(b.map, grid_m);
    double dt = b.t - a.t;
    std::vector<double> out(grid_m);
    for (int j = 0; j < grid_m; ++j) {
        cplx dtzb = std::conj(gb.z_vals[j] - ga.z_vals[j]) / dt;
        // midpoint tangent pairs with the forward time difference (exact on
        // the circle, first order on general flows)
        cplx dphiz = 0.5 * (ga.dz_vals[j] + gb.dz_vals[j]) * cplx(0.0, 1.0) * ga.w_vals[j];
        out[j] = (dtzb * dphiz).imag() - bigQ / TWO_PI;
    }
    return out;
}

}  // namespace slg
