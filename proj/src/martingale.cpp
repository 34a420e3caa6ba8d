#include "slg/martingale.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

namespace slg {

static constexpr double TWO_PI = 2.0 * M_PI;
static const cplx I_UNIT(0.0, 1.0);

DoublePoint make_double_point(cplx w_boundary) {
    DoublePoint dp;
    dp.w = w_boundary;
    dp.wstar = 1.0 / w_boundary;
    return dp;
}

std::vector<SPoint> find_S_points(const ConformalMap& map, const BoundaryGrid& grid,
                                  const std::vector<cplx>& history_sings) {
    std::vector<SPoint> out;
    if (history_sings.empty()) return out;
    const int m = grid.m;
    for (int j = 0; j < m; ++j) {
        double d1 = grid.wprime_abs[j] - grid.wprime_abs[(j - 1 + m) % m];
        double d2 = grid.wprime_abs[(j + 1) % m] - grid.wprime_abs[j];
        if (!(d1 * d2 < 0.0)) continue;  // strict sign change of d|w'|/dphi
        // nearest pole of z' in angular distance
        int best = -1;
        double best_ang = 1e300;
        for (size_t k = 0; k < history_sings.size(); ++k) {
            double da = std::abs(std::remainder(grid.phis[j] - std::arg(history_sings[k]),
                                                TWO_PI));
            if (da < best_ang) {
                best_ang = da;
                best = static_cast<int>(k);
            }
        }
        double gap = 1.0 - std::abs(history_sings[best]);
        if (std::abs(grid.w_vals[j] - history_sings[best]) < 2.0 * gap)
            out.push_back({j, grid.z_vals[j], grid.w_vals[j], grid.wprime_abs[j], best, gap});
    }
    return out;
}

DoublePoint evolve_double(const DoublePoint& dp, const HerglotzSeries& density,
                          const std::vector<cplx>& xis, const std::vector<cplx>& xistars,
                          const std::vector<double>& alphas, double dt, double dq) {
    DoublePoint out = dp;
    cplx p = density.p(dp.w);
    cplx ps = density.pstar(dp.wstar);
    out.w = dp.w * std::exp(p * dt);
    out.wstar = dp.wstar * std::exp(-ps * dt);
    cplx sum1 = 0.0, sum2 = 0.0;
    for (size_t n = 0; n < xis.size(); ++n) {
        if (xis[n] != 0.0) {
            cplx dw = dp.w - xis[n];
            sum1 += alphas[n] * dp.w * xis[n] / (dw * dw);
        }
        if (xistars[n] != 0.0) {
            cplx dws = dp.wstar - xistars[n];
            sum2 += alphas[n] * dp.wstar * xistars[n] / (dws * dws);
        }
    }
    // Lemma 2 increment with coefficient 1 (the printed 2 fails the paper's
    // own residue computation and the finite-difference oracle)
    out.log_wprime = dp.log_wprime + p * dt - sum1 * dq;
    out.log_wstarprime = dp.log_wstarprime - ps * dt + sum2 * dq;
    out.lambda = dp.lambda - (sum1 - sum2) * dq;
    return out;
}

cplx h_function(const DoublePoint& dp, const std::vector<cplx>& xis,
                const std::vector<cplx>& xistars, const std::vector<double>& alphas,
                double kappa, std::vector<double>* branch, cplx center_gap) {
    const size_t N = xis.size();
    bool fresh = !branch || branch->size() != 6 * N;
    if (branch && fresh) branch->assign(6 * N, 0.0);
    auto blog = [&](cplx val, size_t slot) {
        cplx l = std::log(val);
        if (branch) {
            if (!fresh) {
                double k = std::round(((*branch)[slot] - l.imag()) / TWO_PI);
                l += cplx(0.0, TWO_PI * k);
            }
            (*branch)[slot] = l.imag();
        }
        return l;
    };
    cplx g1 = 0.0, g2 = 0.0;
    for (size_t n = 0; n < N; ++n) {
        if (xis[n] == 0.0) {  // generalized center: alpha0 (log w - log w* + gap)
            g1 += alphas[n] * (blog(dp.w, 6 * n) + center_gap);
            g2 += alphas[n] * blog(dp.wstar, 6 * n + 3);
            continue;
        }
        if (std::abs(dp.w - xis[n]) < 1e-12 || std::abs(dp.wstar - xistars[n]) < 1e-12)
            throw DriverCollision("double point hit driver " + std::to_string(n));
        g1 += alphas[n] * (blog(dp.w - xis[n], 6 * n) + blog(1.0 - dp.wstar * xis[n], 6 * n + 1) -
                           blog(xis[n], 6 * n + 2));
        g2 += alphas[n] *
              (blog(dp.wstar - xistars[n], 6 * n + 3) + blog(1.0 - dp.w * xistars[n], 6 * n + 4) -
               blog(xistars[n], 6 * n + 5));
    }
    double sk = std::sqrt(kappa);
    return (g1 - g2) / sk + sk / 4.0 * dp.lambda;
}

cplx predicted_dM(cplx M, const DoublePoint& dp, const std::vector<cplx>& xis,
                  const std::vector<cplx>& xistars, const std::vector<double>& alphas,
                  double kappa, double dW) {
    cplx s = 0.0;
    for (size_t n = 0; n < xis.size(); ++n)
        s += alphas[n] * 0.5 *
             ((dp.w + xis[n]) / (dp.w - xis[n]) +
              (dp.wstar + xistars[n]) / (dp.wstar - xistars[n]));
    return -(2.0 * I_UNIT / std::sqrt(kappa)) * M * s * dW;
}

double pressure(const ConformalMap& map, const std::vector<cplx>& zetas,
                const RateParams& params, cplx z) {
    cplx wz = invert_map(map, z, z / map.radius);
    double P = params.sigma * std::log(std::abs(wz));
    size_t first = params.generalized() ? 1 : 0;
    for (size_t n = 0; n < zetas.size(); ++n)
        P -= 0.5 * params.alphas[first + n] * green_function(map, z, zetas[n]);
    return P;
}

double pressure_variation(const ConformalMap& map, const std::vector<cplx>& xis,
                          const RateParams& params, cplx s) {
    cplx ws = invert_map_unrestricted(map, s, s / map.radius);
    cplx u = ws / std::abs(ws);
    size_t first = params.generalized() ? 1 : 0;
    double br = params.sigma;
    for (size_t n = 0; n < xis.size(); ++n)
        br -= 0.5 * params.alphas[first + n] * ((u + xis[n]) / (u - xis[n])).real();
    return br * br;
}

double hadamard_variation(const ConformalMap& map, const BoundaryGrid& grid,
                          const std::vector<double>& density_grid, cplx z1, cplx z2,
                          double dt) {
    cplx xi1 = 1.0 / std::conj(invert_map(map, z1, z1 / map.radius));
    cplx xi2 = 1.0 / std::conj(invert_map(map, z2, z2 / map.radius));
    // dnG(z,s) = -|w'(s)| Re K; the |w'|^2 cancels against delta_h |ds| =
    // rho |z'|^2 dphi dt, leaving Re K1 Re K2 rho dphi dt / (2 pi)
    double acc = 0.0;
    for (int j = 0; j < grid.m; ++j) {
        cplx u = grid.w_vals[j];
        acc += ((u + xi1) / (u - xi1)).real() * ((u + xi2) / (u - xi2)).real() *
               density_grid[j];
    }
    return acc * (TWO_PI / grid.m) * dt / TWO_PI;
}

double elementary_deformation(const ConformalMap& map, cplx zeta, cplx z1, cplx z2,
                              int grid_m) {
    BoundaryGrid grid = make_grid(map, grid_m);
    cplx xs[3] = {1.0 / std::conj(invert_map(map, zeta, zeta / map.radius)),
                  1.0 / std::conj(invert_map(map, z1, z1 / map.radius)),
                  1.0 / std::conj(invert_map(map, z2, z2 / map.radius))};
    double acc = 0.0;
    for (int j = 0; j < grid.m; ++j) {
        cplx u = grid.w_vals[j];
        double prod = std::abs(grid.dz_vals[j]);  // |ds| = |z'| dphi
        for (auto& x : xs)
            prod *= -((u + x) / (u - x)).real() / std::abs(grid.dz_vals[j]);  // dnG = -H
        acc += prod;
    }
    return -acc * (TWO_PI / grid_m) / (4.0 * M_PI);
}

double elementary_deformation_boundary(const ConformalMap& map, cplx zeta, cplx z1, cplx s) {
    return 0.5 * poisson_kernel(map, zeta, s) * poisson_kernel(map, z1, s);
}

// ---- ensembles ------------------------------------------------------------

namespace {

void run_paths(int n_paths, int n_threads, const std::function<void(int)>& body) {
    if (n_threads <= 1) {
        for (int p = 0; p < n_paths; ++p) body(p);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t)
        pool.emplace_back([&] {
            int p;
            while ((p = next.fetch_add(1)) < n_paths) {
                try {
                    body(p);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!err) err = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

struct MeanSe {
    cplx mean;
    double se;  // sqrt((var_re + var_im)/n)
};

MeanSe column_stats(const std::vector<cplx>& vals) {
    const size_t n = vals.size();
    cplx mean = 0.0;
    for (const cplx& v : vals) mean += v;
    mean /= double(n);
    double var = 0.0;
    for (const cplx& v : vals) var += std::norm(v - mean);
    var /= double(n > 1 ? n - 1 : 1);
    return {mean, std::sqrt(var / double(n))};
}

double real_se(const std::vector<double>& vals) {
    const size_t n = vals.size();
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= double(n);
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= double(n > 1 ? n - 1 : 1);
    return std::sqrt(var / double(n));
}

EnsembleStats verify_mean_M(const MartingaleConfig& cfg, int n_paths) {
    const size_t N = cfg.xis0.size();
    RateParams params = RateParams::make(cfg.bigQ, cfg.nu, cfg.alphas, false);
    cplx anchor_z = cfg.r0 * cfg.anchor_w;
    std::vector<cplx> anchors(N, anchor_z);

    const int steps = cfg.steps;
    std::vector<std::vector<cplx>> Ms(n_paths), diffs(n_paths);
    std::vector<double> q_path0(steps + 1, 0.0);
    std::vector<int> gaps(n_paths, 0);

    run_paths(n_paths, cfg.n_threads, [&](int p) {
        GrowthState st = make_growth_state(cfg.r0, {}, cfg.xis0, anchors, params, cfg.kappa,
                                           cfg.driver_mode, GrowthMode::stochastic, cfg.grid_m);
        NoiseStream noise{cfg.seed, static_cast<uint64_t>(p), cfg.kappa};
        DoublePoint dp = make_double_point(cfg.anchor_w);
        std::vector<double> branch;
        cplx h = h_function(dp, st.drivers.xis, st.drivers.xistars, params.alphas, cfg.kappa,
                            &branch);
        cplx M = martingale_M(h, cfg.kappa);
        double wp0_abs2 = 1.0 / std::norm(st.map.dz(cfg.anchor_w));
        double q = 0.0;

        Ms[p].assign(steps + 1, 0.0);
        diffs[p].assign(steps, 0.0);
        Ms[p][0] = M;
        for (int I = 0; I < steps; ++I) {
            BoundaryGrid grid = make_grid(st.map, cfg.grid_m);
            std::vector<cplx> rho = density_double(st.map, st.drivers, params, grid);
            HerglotzSeries series = herglotz_series(rho);
            double dq = cfg.nu * wp0_abs2 *
                        std::exp((dp.log_wprime + dp.log_wstarprime).real()) * cfg.dt;
            double dW = noise.dW(st.step_index, dq);
            std::vector<cplx> xis_pre = st.drivers.xis, xistars_pre = st.drivers.xistars;
            cplx pred = predicted_dM(M, dp, xis_pre, xistars_pre, params.alphas, cfg.kappa, dW);

            std::vector<double> dqs(N, dq);
            grow_step(st, cfg.dt, noise, {}, &dqs);
            dp = evolve_double(dp, series, xis_pre, xistars_pre, params.alphas, cfg.dt, dq);
            h = h_function(dp, st.drivers.xis, st.drivers.xistars, params.alphas, cfg.kappa,
                           &branch);
            cplx M_new = martingale_M(h, cfg.kappa);
            diffs[p][I] = (M_new - M) - pred;
            Ms[p][I + 1] = M_new;
            M = M_new;
            q += dq;
            if (p == 0) q_path0[I + 1] = q;
            if (p == 0 && !cfg.xis0.empty()) {
                // S-membership of the anchor (shadow of the nearest fjord pole)
                double best = 1e300;
                cplx pole = 0.0;
                for (const cplx& x : cfg.xis0) {
                    double da = std::abs(std::remainder(std::arg(dp.w) - std::arg(x), TWO_PI));
                    if (da < best) {
                        best = da;
                        pole = x;
                    }
                }
                if (std::abs(dp.w - pole) >= 2.0 * (1.0 - std::abs(pole))) gaps[0] += 1;
            }
        }
    });

    EnsembleStats out;
    out.n_paths = n_paths;
    out.gap_steps = gaps[0];
    cplx M0 = n_paths > 0 ? Ms[0][0] : cplx(1.0);
    std::vector<cplx> col(n_paths);
    for (int I = 1; I <= steps; ++I) {
        for (int p = 0; p < n_paths; ++p) col[p] = Ms[p][I];
        MeanSe st = column_stats(col);
        if (I % cfg.record_every == 0 || I == steps) {
            out.times.push_back(q_path0[I]);
            double se_ratio = st.se / std::abs(M0);
            double z = se_ratio > 0.0 ? std::abs(st.mean / M0 - 1.0) / se_ratio : 0.0;
            out.zscores.push_back(z);
            out.max_abs_z = std::max(out.max_abs_z, z);
        }
        if (I == steps) {
            out.mean = st.mean;
            out.stderr_ = st.se;
        }
    }
    for (int I = 0; I < steps; ++I) {
        for (int p = 0; p < n_paths; ++p) col[p] = diffs[p][I];
        MeanSe st = column_stats(col);
        double z = st.se > 0.0 ? std::abs(st.mean) / st.se : 0.0;
        out.drift_zscores.push_back(z);
        out.max_abs_z = std::max(out.max_abs_z, z);
    }
    out.cov_entries.emplace_back("mean_M_final_re", out.mean.real(), out.stderr_);
    out.cov_entries.emplace_back("mean_M_final_im", out.mean.imag(), out.stderr_);
    return out;
}

EnsembleStats verify_prop2(const MartingaleConfig& cfg, int n_paths) {
    RateParams params = RateParams::make(cfg.bigQ, cfg.nu, cfg.alphas, false);
    ConformalMap map;
    map.radius = cfg.r0;
    BoundaryGrid grid = make_grid(map, cfg.grid_m);
    DriverState dr0;
    dr0.xis = cfg.xis0;
    dr0.xistars.resize(cfg.xis0.size());
    for (size_t n = 0; n < cfg.xis0.size(); ++n) dr0.xistars[n] = std::conj(cfg.xis0[n]);
    dr0.qs.assign(cfg.xis0.size(), 0.0);
    HerglotzSeries series = herglotz_series(density_double(map, dr0, params, grid));
    double dq = cfg.nu * cfg.dt / (cfg.r0 * cfg.r0);

    std::vector<double> a1(params.alphas.size(), 0.0), a2(params.alphas.size(), 0.0);
    a1[0] = params.alphas[0];
    a2[1] = params.alphas[1];

    DoublePoint dp0 = make_double_point(cfg.anchor_w);
    std::vector<double> branch1_0, branch2_0;
    cplx M10 = martingale_M(h_function(dp0, dr0.xis, dr0.xistars, a1, cfg.kappa, &branch1_0),
                            cfg.kappa);
    cplx M20 = martingale_M(h_function(dp0, dr0.xis, dr0.xistars, a2, cfg.kappa, &branch2_0),
                            cfg.kappa);
    auto R_at = [&](size_t n) {
        return 0.5 * ((dp0.w + dr0.xis[n]) / (dp0.w - dr0.xis[n]) +
                      (dp0.wstar + dr0.xistars[n]) / (dp0.wstar - dr0.xistars[n]));
    };
    // -(a1 a2 / 2) M1 M2 R1 R2 dq  (boundary form of Eq. EdM with nu dt |w'|^2 = dq)
    cplx rhs = -0.5 * params.alphas[0] * params.alphas[1] * M10 * M20 * R_at(0) * R_at(1) * dq;

    std::vector<cplx> prod(n_paths), s1(n_paths), s2(n_paths);
    run_paths(n_paths, cfg.n_threads, [&](int p) {
        NoiseStream noise{cfg.seed, static_cast<uint64_t>(p), cfg.kappa};
        double dW = noise.dW(0, dq);
        std::vector<double> dqs(dr0.xis.size(), dq);
        DriverState dr1 = step_drivers(dr0, dqs, dW, params, cfg.kappa, cfg.driver_mode);
        DoublePoint dpa = evolve_double(dp0, series, dr0.xis, dr0.xistars, a1, cfg.dt, dq);
        DoublePoint dpb = evolve_double(dp0, series, dr0.xis, dr0.xistars, a2, cfg.dt, dq);
        std::vector<double> b1 = branch1_0, b2 = branch2_0;
        cplx dM1 = martingale_M(h_function(dpa, dr1.xis, dr1.xistars, a1, cfg.kappa, &b1),
                                cfg.kappa) - M10;
        cplx dM2 = martingale_M(h_function(dpb, dr1.xis, dr1.xistars, a2, cfg.kappa, &b2),
                                cfg.kappa) - M20;
        prod[p] = dM1 * dM2;
        s1[p] = dM1;
        s2[p] = dM2;
    });

    MeanSe pm = column_stats(prod);
    MeanSe m1 = column_stats(s1);
    MeanSe m2 = column_stats(s2);
    cplx cov = pm.mean - m1.mean * m2.mean;

    EnsembleStats out;
    out.n_paths = n_paths;
    out.mean = cov;
    out.stderr_ = pm.se;
    double z = pm.se > 0.0 ? std::abs(cov - rhs) / pm.se : 0.0;
    out.zscores.push_back(z);
    out.max_abs_z = z;
    out.cov_entries.emplace_back("cov_re", cov.real(), pm.se);
    out.cov_entries.emplace_back("cov_im", cov.imag(), pm.se);
    out.cov_entries.emplace_back("rhs_re", rhs.real(), 0.0);
    out.cov_entries.emplace_back("rhs_im", rhs.imag(), 0.0);
    if (std::abs(rhs) > 0.0)
        out.cov_entries.emplace_back("measured_over_printed",
                                     (cov / rhs).real(), pm.se / std::abs(rhs));
    return out;
}

EnsembleStats verify_corollary(const MartingaleConfig& cfg, int n_paths) {
    RateParams params = RateParams::make(cfg.bigQ, cfg.nu, cfg.alphas, true);
    ConformalMap map;
    map.radius = cfg.r0;
    BoundaryGrid grid = make_grid(map, cfg.grid_m);
    DriverState dr0;
    dr0.xis.assign(1, 0.0);  // generalized center at index 0
    dr0.xis.insert(dr0.xis.end(), cfg.xis0.begin(), cfg.xis0.end());
    dr0.xistars.resize(dr0.xis.size());
    for (size_t n = 0; n < dr0.xis.size(); ++n) dr0.xistars[n] = std::conj(dr0.xis[n]);
    dr0.qs.assign(dr0.xis.size(), 0.0);
    HerglotzSeries series = herglotz_series(density_double(map, dr0, params, grid));
    double dq = cfg.nu * cfg.dt / (cfg.r0 * cfg.r0);

    DoublePoint dp0 = make_double_point(cfg.anchor_w);
    std::vector<double> branch0;
    cplx M0 = martingale_M(
        h_function(dp0, dr0.xis, dr0.xistars, params.alphas, cfg.kappa, &branch0), cfg.kappa);
    double dP = pressure_variation(map, cfg.xis0, params, cfg.r0 * cfg.anchor_w) * dq;
    double rhs = std::norm(M0) * dP;  // M^2 dP with the conjugate-square convention

    std::vector<double> sq(n_paths);
    std::vector<cplx> dMs(n_paths);
    run_paths(n_paths, cfg.n_threads, [&](int p) {
        NoiseStream noise{cfg.seed, static_cast<uint64_t>(p), cfg.kappa};
        double dW = noise.dW(0, dq);
        std::vector<double> dqs(dr0.xis.size(), dq);
        DriverState dr1 = step_drivers(dr0, dqs, dW, params, cfg.kappa, cfg.driver_mode);
        DoublePoint dp1 =
            evolve_double(dp0, series, dr0.xis, dr0.xistars, params.alphas, cfg.dt, dq);
        std::vector<double> b = branch0;
        cplx dM = martingale_M(h_function(dp1, dr1.xis, dr1.xistars, params.alphas, cfg.kappa,
                                          &b, dr1.center_log_gap),
                               cfg.kappa) - M0;
        sq[p] = std::norm(dM);
        dMs[p] = dM;
    });

    double mean_sq = 0.0;
    for (double v : sq) mean_sq += v;
    mean_sq /= double(n_paths);
    MeanSe md = column_stats(dMs);
    double var = mean_sq - std::norm(md.mean);
    double se = real_se(sq);

    EnsembleStats out;
    out.n_paths = n_paths;
    out.mean = var;
    out.stderr_ = se;
    double z = se > 0.0 ? std::abs(var - rhs) / se : 0.0;
    out.zscores.push_back(z);
    out.max_abs_z = z;
    out.cov_entries.emplace_back("var_dM", var, se);
    out.cov_entries.emplace_back("rhs_M2_dP", rhs, 0.0);
    if (rhs > 0.0) out.cov_entries.emplace_back("measured_over_printed", var / rhs, se / rhs);
    return out;
}

}  // namespace

EnsembleStats ensemble_verify(const MartingaleConfig& config, MartingaleCheck check,
                              int n_paths) {
    if (n_paths < 1) throw ConfigError("n_paths must be positive");
    switch (check) {
        case MartingaleCheck::mean_M:
            return verify_mean_M(config, n_paths);
        case MartingaleCheck::prop2_cov:
            if (config.xis0.size() < 2)
                throw ConfigError("prop2_cov needs two drivers");
            return verify_prop2(config, n_paths);
        case MartingaleCheck::corollary:
            return verify_corollary(config, n_paths);
    }
    throw ConfigError("unknown check");
}

}  // namespace slg
