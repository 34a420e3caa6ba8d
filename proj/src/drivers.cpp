#include "slg/drivers.hpp"

#include <cmath>
#include <numeric>

namespace slg {

RateParams RateParams::make(double bigQ, double nu, std::vector<double> alphas,
                            bool generalized) {
    RateParams p;
    p.bigQ = bigQ;
    p.nu = nu;
    p.sigma = bigQ / (2.0 * M_PI * nu);
    for (double a : alphas) p.sigma += 0.5 * a;
    if (generalized) {
        // center driver at index 0 with charge alpha0 = -2 sigma, weight -sigma
        p.lambdas.assign(alphas.size() + 1, 1.0);
        p.lambdas[0] = -p.sigma;
        p.alphas.assign(alphas.size() + 1, 0.0);
        p.alphas[0] = -2.0 * p.sigma;
        std::copy(alphas.begin(), alphas.end(), p.alphas.begin() + 1);
    } else {
        p.alphas = std::move(alphas);
    }
    return p;
}

static void check_distinct(const std::vector<cplx>& xis) {
    for (size_t k = 0; k < xis.size(); ++k)
        for (size_t n = k + 1; n < xis.size(); ++n)
            if (std::abs(xis[k] - xis[n]) < 1e-12)
                throw CoincidentDrivers("drivers " + std::to_string(k) + "," +
                                        std::to_string(n) + " coincide");
}

double z_n_product(const std::vector<cplx>& xis, const std::vector<cplx>& xistars,
                   double kappa) {
    check_distinct(xis);
    const size_t N = xis.size();
    cplx logz = 0.0;
    for (size_t k = 0; k < N; ++k) {
        for (size_t n = k + 1; n < N; ++n)
            logz += std::log(xis[k] - xis[n]) + std::log(xistars[k] - xistars[n]);
        for (size_t n = k; n < N; ++n)
            logz += std::log(1.0 - xis[k] * xistars[n]) + std::log(1.0 - xistars[k] * xis[n]);
    }
    return std::abs(std::exp(2.0 / kappa * logz));
}

// weight of the pair (k, n) inside log Z
static double pair_weight(size_t k, size_t n, const RateParams& p) {
    if (!p.generalized()) return 1.0;
    // center pairs enter with +sigma (sign fixed by the -sigma constant-drift
    // limit at xi0 = 0; the printed product has the opposite exponent)
    if (k == 0 || n == 0) return -p.lambdas[0];
    return 1.0;
}

static double sum_weight(size_t m, const RateParams& p) {
    return p.generalized() ? p.lambdas[m] : 1.0;
}

cplx drift_g(size_t n, const std::vector<cplx>& xis, const std::vector<cplx>& xistars,
             double kappa, const RateParams& params) {
    check_distinct(xis);
    const size_t N = xis.size();
    // d/dxi_n of log Z with the diagonal counted once
    cplx dlz = 0.0;
    for (size_t m = 0; m < N; ++m) {
        double wgt = pair_weight(m, n, params);
        if (m != n) dlz += wgt * (1.0 / (xis[n] - xis[m]) - xistars[m] / (1.0 - xis[n] * xistars[m]));
    }
    dlz -= pair_weight(n, n, params) * xistars[n] / (1.0 - xis[n] * xistars[n]);
    // log Z carries 2/kappa and the prefactor -kappa/2: cancel analytically
    // (keeps the kappa = 0 no-noise limit finite)
    (void)kappa;

    cplx g = -xis[n] * dlz;
    for (size_t m = 0; m < N; ++m) {
        if (m != n) g += 0.5 * sum_weight(m, params) * (xis[n] + xis[m]) / (xis[n] - xis[m]);
        g += 0.5 * sum_weight(m, params) * (xis[n] * xistars[m] + 1.0) / (xis[n] * xistars[m] - 1.0);
    }
    return g;
}

cplx drift_g_star(size_t n, const std::vector<cplx>& xis, const std::vector<cplx>& xistars,
                  double kappa, const RateParams& params) {
    return drift_g(n, xistars, xis, kappa, params);
}

std::vector<double> time_change(const ConformalMap& map, const std::vector<cplx>& anchors,
                                double nu, double dt, const TimeChangeMode& mode) {
    if (dt <= 0.0) throw NonpositiveDt("dt = " + std::to_string(dt));
    std::vector<double> dqs;
    dqs.reserve(anchors.size());
    if (mode.kind == TimeChangeMode::fractal) {
        for (size_t n = 0; n < anchors.size(); ++n)
            dqs.push_back(nu * std::pow(mode.eps.at(n), 2.0 * mode.alpha) * dt);
        return dqs;
    }
    for (const cplx& zeta : anchors) {
        // Once the cluster envelope grows past a tip, w(zeta0) sits within
        // machine epsilon of the circle and |w'| underflows: the tip clock
        // freezes (dq = 0), which is the exact rule's limit. Inversion
        // failure or an inside landing are the numerical signatures.
        cplx w;
        try {
            w = invert_map_unrestricted(map, zeta, zeta / map.radius);
        } catch (const Error&) {
            dqs.push_back(0.0);
            continue;
        }
        if (std::abs(w) <= 1.0) {
            dqs.push_back(0.0);
            continue;
        }
        double wp = 1.0 / std::abs(map.dz(w));
        dqs.push_back(nu * wp * wp * dt);
    }
    return dqs;
}

DriverState step_drivers(const DriverState& state, const std::vector<double>& dqs,
                         double dW, const RateParams& params, double kappa,
                         DriverMode mode, double skew_tol) {
    const size_t N = state.xis.size();
    double qbar = std::accumulate(dqs.begin(), dqs.end(), 0.0) / double(N);
    if (qbar == 0.0) return state;  // all tips frozen: drivers hold
    for (double dq : dqs)
        if (std::abs(dq - qbar) / qbar > skew_tol)
            throw ClockSkew("dq skew " + std::to_string(std::abs(dq - qbar) / qbar));

    DriverState out = state;
    for (size_t n = 0; n < N; ++n) {
        cplx g = drift_g(n, state.xis, state.xistars, kappa, params);
        cplx dlog;
        if (params.generalized())
            dlog = (g + 0.25 * kappa) * dqs[n] + cplx(0.0, dW);
        else
            dlog = (-params.sigma + g + 0.25 * kappa) * dqs[n] + cplx(0.0, dW);
        // polar update keeps the radial increment bit-exactly noise-free
        out.xis[n] = std::polar(std::abs(state.xis[n]) * std::exp(dlog.real()),
                                std::arg(state.xis[n]) + dlog.imag());
        cplx dlogs;
        if (mode == DriverMode::literal_double) {
            cplx gs = drift_g_star(n, state.xis, state.xistars, kappa, params);
            if (params.generalized())
                dlogs = (-gs + 0.25 * kappa) * dqs[n] - cplx(0.0, dW);
            else
                dlogs = (params.sigma - gs + 0.25 * kappa) * dqs[n] - cplx(0.0, dW);
            out.xistars[n] = std::polar(std::abs(state.xistars[n]) * std::exp(dlogs.real()),
                                        std::arg(state.xistars[n]) + dlogs.imag());
        } else {
            dlogs = std::conj(dlog);
            out.xistars[n] = std::conj(out.xis[n]);
        }
        // xi = 0 is a fixed point of the multiplicative update; its log
        // coordinate still moves and the h-function needs the difference
        if (state.xis[n] == 0.0) out.center_log_gap += dlogs - dlog;
        out.qs[n] += dqs[n];
        if (std::abs(out.xis[n]) >= 1.0)
            throw DriverEscaped("driver " + std::to_string(n) + " reached |xi|=" +
                                std::to_string(std::abs(out.xis[n])));
    }
    out.w_accum += dW;
    return out;
}

}  // namespace slg
