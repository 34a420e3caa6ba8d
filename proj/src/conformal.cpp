#include "slg/conformal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

namespace slg {

static constexpr double TWO_PI = 2.0 * M_PI;

cplx ConformalMap::z(cplx w) const {
    cplx s = radius * w;
    for (size_t m = 0; m < terms.size(); ++m) {
        cplx l = std::log(w / terms[m].sing - 1.0);
        if (!branch_offsets.empty() && branch_offsets[m] != 0)
            l += cplx(0.0, TWO_PI * branch_offsets[m]);
        s += terms[m].coeff * l;
    }
    return s;
}

cplx ConformalMap::dz(cplx w) const {
    cplx s = radius;
    for (const auto& t : terms) s += t.coeff / (w - t.sing);
    return s;
}

void ConformalMap::check_singularities(double tol_cusp) const {
    for (const auto& t : terms)
        if (std::abs(t.sing) >= 1.0 - tol_cusp)
            throw CuspDetected("singularity at |s|=" + std::to_string(std::abs(t.sing)));
}

std::pair<cplx, cplx> eval_map(const ConformalMap& map, cplx w) {
    return {map.z(w), map.dz(w)};
}

BoundaryGrid make_grid(const ConformalMap& map, int m) {
    BoundaryGrid g;
    g.m = m;
    g.phis.resize(m);
    g.w_vals.resize(m);
    g.z_vals.resize(m);
    g.dz_vals.resize(m);
    g.wprime_abs.resize(m);
    const size_t nt = map.terms.size();
    // per-term unwrapped log along the sweep, principal at phi=0
    std::vector<cplx> prev_log(nt);
    for (int j = 0; j < m; ++j) {
        double phi = TWO_PI * j / m;
        cplx w = std::polar(1.0, phi);
        g.phis[j] = phi;
        g.w_vals[j] = w;
        cplx z = map.radius * w;
        for (size_t k = 0; k < nt; ++k) {
            cplx l = std::log(w / map.terms[k].sing - 1.0);
            if (j > 0) {
                double d = std::round((prev_log[k].imag() - l.imag()) / TWO_PI);
                l += cplx(0.0, TWO_PI * d);
            }
            prev_log[k] = l;
            z += map.terms[k].coeff * l;
        }
        g.z_vals[j] = z;
        g.dz_vals[j] = map.dz(w);
        g.wprime_abs[j] = 1.0 / std::abs(g.dz_vals[j]);
    }
    return g;
}

static cplx invert_impl(const ConformalMap& map, cplx z, cplx w_guess, bool restricted) {
    cplx w = w_guess;
    double tol = 1e-13 * (1.0 + std::abs(z));
    cplx f = map.z(w) - z;
    for (int it = 0; it < 50; ++it) {
        if (std::abs(f) <= tol) {
            if (restricted && std::abs(w) <= 1.0)
                throw InsideCluster("inverse landed at |w|=" + std::to_string(std::abs(w)));
            return w;
        }
        cplx dz = map.dz(w);
        if (dz == 0.0) throw NoConvergence("z'(w) = 0 during inversion");
        cplx step = f / dz;
        double damp = 1.0;
        // keep iterates away from the singularities and damp on residual increase
        for (int h = 0; h < 12; ++h) {
            cplx w_new = w - damp * step;
            bool ok = true;
            for (const auto& t : map.terms)
                if (std::abs(w_new - t.sing) < 1e-8) { ok = false; break; }
            if (ok) {
                cplx f_new = map.z(w_new) - z;
                if (std::abs(f_new) < std::abs(f) || damp < 1e-3) {
                    w = w_new;
                    f = f_new;
                    break;
                }
            }
            damp *= 0.5;
            if (h == 11) { w = w - damp * step; f = map.z(w) - z; }
        }
    }
    if (std::abs(f) <= tol) {
        if (restricted && std::abs(w) <= 1.0)
            throw InsideCluster("inverse landed at |w|=" + std::to_string(std::abs(w)));
        return w;
    }
    throw NoConvergence("invert_map: 50 iterations, residual " + std::to_string(std::abs(f)));
}

cplx invert_map(const ConformalMap& map, cplx z, cplx w_guess) {
    try {
        return invert_impl(map, z, w_guess, true);
    } catch (const InsideCluster&) {
        throw;
    } catch (const NoConvergence&) {
        // multistart rescue around the circle
        for (int k = 0; k < 8; ++k) {
            try {
                return invert_impl(map, z, std::polar(1.5, TWO_PI * k / 8.0), true);
            } catch (const InsideCluster&) {
                throw;
            } catch (const NoConvergence&) {
            }
        }
        throw;
    }
}

cplx invert_map_unrestricted(const ConformalMap& map, cplx z, cplx w_guess) {
    return invert_impl(map, z, w_guess, false);
}

double green_function_disk(cplx w1, cplx w2) {
    return std::log(std::abs((w1 - w2) / (1.0 - std::conj(w1) * w2)));
}

double green_function(const ConformalMap& map, cplx z1, cplx z2) {
    cplx w1 = invert_map(map, z1, z1 / map.radius);
    cplx w2 = invert_map(map, z2, z2 / map.radius);
    return green_function_disk(w1, w2);
}

double green_function_inf(const ConformalMap& map, cplx z) {
    return std::log(std::abs(invert_map(map, z, z / map.radius)));
}

double poisson_kernel(const ConformalMap& map, cplx z, cplx s) {
    cplx wz = invert_map(map, z, z / map.radius);
    cplx ws = invert_map_unrestricted(map, s, s / map.radius);
    ws /= std::abs(ws);  // project boundary point onto the circle
    cplx xi = 1.0 / std::conj(wz);
    double wp = 1.0 / std::abs(map.dz(ws));
    return wp * ((ws + xi) / (ws - xi)).real();
}

double poisson_kernel_w(const ConformalMap& map, cplx z, cplx u) {
    cplx wz = invert_map(map, z, z / map.radius);
    cplx xi = 1.0 / std::conj(wz);
    double wp = 1.0 / std::abs(map.dz(u));
    return wp * ((u + xi) / (u - xi)).real();
}

// ---- FFT ----------------------------------------------------------------

namespace {
std::mutex fftw_plan_mutex;

struct PlanCache {
    int n = 0;
    fftw_plan plan = nullptr;
    fftw_complex* buf = nullptr;

    ~PlanCache() {
        if (plan) {
            std::lock_guard<std::mutex> lock(fftw_plan_mutex);
            fftw_destroy_plan(plan);
            fftw_free(buf);
        }
    }

    void ensure(int m) {
        if (n == m) return;
        std::lock_guard<std::mutex> lock(fftw_plan_mutex);
        if (plan) {
            fftw_destroy_plan(plan);
            fftw_free(buf);
        }
        buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * m));
        plan = fftw_plan_dft_1d(m, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        n = m;
    }
};
}  // namespace

std::vector<cplx> dft_forward(const std::vector<cplx>& x) {
    thread_local PlanCache cache;
    int m = static_cast<int>(x.size());
    cache.ensure(m);
    for (int j = 0; j < m; ++j) {
        cache.buf[j][0] = x[j].real();
        cache.buf[j][1] = x[j].imag();
    }
    fftw_execute(cache.plan);
    std::vector<cplx> out(m);
    for (int j = 0; j < m; ++j) out[j] = cplx(cache.buf[j][0], cache.buf[j][1]) / double(m);
    return out;
}

// ---- Herglotz -----------------------------------------------------------

HerglotzSeries herglotz_series(const std::vector<cplx>& density) {
    HerglotzSeries h;
    h.m = static_cast<int>(density.size());
    h.chat = dft_forward(density);
    return h;
}

HerglotzSeries herglotz_series(const std::vector<double>& density) {
    std::vector<cplx> d(density.begin(), density.end());
    return herglotz_series(d);
}

static cplx sum_series(const std::vector<cplx>& chat, int m, cplx winv, bool negative_k) {
    // -chat0 - 2 sum_{k>=1} chat[+-k] winv^k, adaptive truncation
    cplx acc = -chat[0];
    cplx pw = 1.0;
    int kmax = m / 2 - 1;
    double last = 1e300;
    for (int k = 1; k <= kmax; ++k) {
        pw *= winv;
        cplx c = negative_k ? chat[(m - k) % m] : chat[k];
        cplx term = -2.0 * c * pw;
        double a = std::abs(term);
        if (a < 1e-17 * (1.0 + std::abs(acc)) && k > 8) break;
        if (k > m / 4 && a > 10.0 * last && a > 1e-6)
            throw GridTooCoarse("Herglotz series diverging at k=" + std::to_string(k));
        acc += term;
        last = std::max(a, 1e-300);
    }
    return acc;
}

cplx HerglotzSeries::p(cplx w) const { return sum_series(chat, m, 1.0 / w, true); }
cplx HerglotzSeries::pstar(cplx wstar) const { return sum_series(chat, m, 1.0 / wstar, false); }

cplx herglotz_transform(const std::vector<double>& density, cplx w, HerglotzSide side) {
    HerglotzSeries h = herglotz_series(density);
    double near = 2.0 * TWO_PI / h.m;
    if (std::abs(std::abs(w) - 1.0) < near) {
        // boundary-limit formula: evaluate the series at the projected angle
        // (Re p = -rho, Im p from the conjugate series)
        cplx u = w / std::abs(w);
        return side == HerglotzSide::holomorphic ? h.p(u) : h.pstar(u);
    }
    return side == HerglotzSide::holomorphic ? h.p(w) : h.pstar(w);
}

// ---- moments ------------------------------------------------------------

MomentVector harmonic_moments(const ConformalMap& map, const BoundaryGrid& grid, int kmax) {
    const int m = grid.m;
    double dphi = TWO_PI / m;
    // winding of the boundary around z=0 must be 1 (origin inside the cluster)
    double wind = 0.0;
    for (int j = 0; j < m; ++j) {
        cplx a = grid.z_vals[j], b = grid.z_vals[(j + 1) % m];
        wind += std::arg(b / a);
    }
    if (std::abs(wind - TWO_PI) > 1.0)
        throw DomainContainsOrigin("boundary does not wind once around z=0");

    MomentVector mv;
    mv.tk.assign(kmax, 0.0);
    mv.vk.assign(kmax, 0.0);
    double area = 0.0;
    for (int j = 0; j < m; ++j) {
        cplx z = grid.z_vals[j];
        cplx dz = grid.dz_vals[j] * cplx(0.0, 1.0) * grid.w_vals[j] * dphi;
        cplx zb = std::conj(z);
        area += 0.5 * (zb * dz).imag();
        cplx zk = 1.0;
        for (int k = 1; k <= kmax; ++k) {
            zk *= z;
            mv.tk[k - 1] += zb / zk * dz / (TWO_PI * cplx(0.0, 1.0) * double(k));
            mv.vk[k - 1] += zb * zk * dz / (TWO_PI * cplx(0.0, 1.0));
        }
    }
    // the sweep is open when sum(coeff) != 0 (gap 2 pi i sum b); close with a chord
    cplx gap = 0.0;
    for (const auto& t : map.terms) gap += t.coeff;
    cplx z_end = grid.z_vals[0] + cplx(0.0, TWO_PI) * gap;
    area += 0.5 * (std::conj(z_end) * (grid.z_vals[0] - z_end)).imag();
    mv.t0 = area / M_PI;
    return mv;
}

double schwarz_residual(const ConformalMap& map, const BoundaryGrid& grid) {
    // S(z) = conj-coefficient map at 1/w, unwrapped along its own sweep
    const size_t nt = map.terms.size();
    std::vector<cplx> prev_log(nt);
    double worst = 0.0;
    for (int j = 0; j < grid.m; ++j) {
        cplx wi = 1.0 / grid.w_vals[j];
        cplx s = std::conj(cplx(map.radius)) * wi;
        for (size_t k = 0; k < nt; ++k) {
            cplx l = std::log(wi / std::conj(map.terms[k].sing) - 1.0);
            if (j > 0) {
                double d = std::round((prev_log[k].imag() - l.imag()) / TWO_PI);
                l += cplx(0.0, TWO_PI * d);
            }
            prev_log[k] = l;
            s += std::conj(map.terms[k].coeff) * l;
        }
        worst = std::max(worst, std::abs(s - std::conj(grid.z_vals[j])));
    }
    return worst;
}

}  // namespace slg
