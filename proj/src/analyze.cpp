#include "slg/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace slg {

double harmonic_measure_exponent(const std::vector<cplx>& pts, const std::vector<double>& wts,
                                 cplx s, double r_lo, double r_hi) {
    const int nr = 8;
    std::vector<double> lx, ly;
    for (int k = 0; k < nr; ++k) {
        double r = r_lo * std::pow(r_hi / r_lo, double(k) / (nr - 1));
        double p = 0.0;
        for (size_t j = 0; j < pts.size(); ++j)
            if (std::abs(pts[j] - s) < r) p += wts[j];
        if (p <= 0.0) continue;
        lx.push_back(std::log(r));
        ly.push_back(std::log(p));
    }
    if (lx.size() < 3) throw GridTooCoarse("harmonic measure: too few populated radii");
    // least-squares slope
    double n = double(lx.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double harmonic_measure_exponent(const BoundaryGrid& grid, cplx s, double r_lo, double r_hi) {
    std::vector<double> wts(grid.m, 1.0 / grid.m);
    return harmonic_measure_exponent(grid.z_vals, wts, s, r_lo, r_hi);
}

static double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

AnalyzeReport analyze_fjords(const Trajectory& traj, int grid_m) {
    if (traj.snapshots.empty()) throw NoFjordDetected("empty trajectory");
    const Snapshot& last = traj.snapshots.back();
    BoundaryGrid grid = make_grid(last.map, grid_m);

    cplx centroid = 0.0;
    for (const cplx& z : grid.z_vals) centroid += z;
    centroid /= double(grid.m);
    double radius_max = 0.0;
    for (const cplx& z : grid.z_vals) radius_max = std::max(radius_max, std::abs(z - centroid));

    AnalyzeReport rep;
    rep.diameter = 2.0 * radius_max;

    // fjord walls crowd exponentially in the preimage: a uniform grid never
    // samples a channel deeper than a few widths. Augment with a log-spaced
    // ladder of angles on both sides of every singularity, branch-corrected
    // to the continuous sweep via the nearest uniform node.
    const double two_pi = 2.0 * M_PI;
    std::vector<double> angs = grid.phis;
    for (const auto& term : last.map.terms) {
        double th = std::arg(term.sing);
        for (double u = std::max(1.0 - std::abs(term.sing), 1e-14); u < 1.0; u *= 2.0) {
            angs.push_back(th + u);
            angs.push_back(th - u);
        }
    }
    std::vector<cplx> samples(angs.size());
    std::vector<double> wts(angs.size());
    const double dphi = two_pi / grid.m;
    for (size_t j = 0; j < angs.size(); ++j) {
        double a = angs[j] - two_pi * std::floor(angs[j] / two_pi);
        angs[j] = a;
        if (j < size_t(grid.m)) {
            samples[j] = grid.z_vals[j];
        } else {
            int k = int(std::lround(a / dphi)) % grid.m;
            cplx corr = grid.z_vals[k] - last.map.z(grid.w_vals[k]);
            samples[j] = last.map.z(std::polar(1.0, a)) + corr;
        }
    }
    // harmonic-measure weights: circular angular half-gaps
    {
        std::vector<size_t> idx(angs.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return angs[a] < angs[b]; });
        for (size_t r = 0; r < idx.size(); ++r) {
            double prev = angs[idx[(r + idx.size() - 1) % idx.size()]];
            double next = angs[idx[(r + 1) % idx.size()]];
            double gap = next - prev;
            if (gap < 0) gap += two_pi;
            wts[idx[r]] = 0.5 * gap / two_pi;
        }
    }

    const size_t N = traj.zeta_paths.size();
    for (size_t n = 0; n < N; ++n) {
        const auto& path = traj.zeta_paths[n];
        const auto& coeffs = n < traj.coeff_history.size() ? traj.coeff_history[n]
                                                           : std::vector<cplx>{};
        if (path.size() < 10 || coeffs.size() < path.size()) continue;
        // walk outward from the tip (the path start, deepest point); the
        // centerline is equidistant from both walls, so 2 x the boundary
        // distance is the local wall-to-wall width
        std::vector<double> dists(path.size());
        for (size_t i = 0; i < path.size(); ++i) {
            double d = 1e300;
            for (const cplx& z : samples) d = std::min(d, std::abs(z - path[i]));
            dists[i] = d;
        }
        // distances rise leaving the rounded end cap, plateau at the
        // half-width, and rise again at the mouth: measure past the crest
        size_t cap = 0;
        while (cap + 1 < path.size() && dists[cap + 1] > dists[cap]) ++cap;
        double d_min = 1e300;
        for (size_t i = cap; i < path.size(); ++i) d_min = std::min(d_min, dists[i]);
        size_t mouth = cap;
        while (mouth < path.size() && dists[mouth] <= 3.0 * d_min) ++mouth;
        std::vector<double> preds;
        for (size_t i = 0; i < mouth; ++i) preds.push_back(M_PI * std::abs(coeffs[i]));
        FjordReport f;
        f.driver = static_cast<int>(n);
        f.measured_width = 2.0 * d_min;
        f.predicted_width = median(preds);
        f.ratio = f.predicted_width > 0.0 ? f.measured_width / f.predicted_width : 0.0;
        f.depth = mouth > 0 ? std::abs(path[mouth - 1] - path.front()) : 0.0;
        if (f.measured_width <= 0.0 || f.depth <= 5.0 * f.measured_width) continue;
        f.alpha_tip = harmonic_measure_exponent(samples, wts, path.front(),
                                                0.5 * f.measured_width, 5.0 * f.measured_width);
        rep.fjords.push_back(f);
    }
    if (rep.fjords.empty())
        throw NoFjordDetected("no driver has developed parallel-wall geometry");

    // smooth reference point: grid node with maximal angular distance to all fjords
    double best = -1.0;
    int best_j = 0;
    for (int j = 0; j < grid.m; ++j) {
        double d = 1e300;
        for (size_t n = 0; n < N && n < traj.driver_paths.size(); ++n)
            if (!traj.driver_paths[n].empty())
                d = std::min(d, std::abs(std::remainder(
                                    grid.phis[j] - std::arg(traj.driver_paths[n][0]), two_pi)));
        if (d == 1e300)  // manual trajectory: stay away from the singularity angles
            for (const auto& term : last.map.terms)
                d = std::min(d, std::abs(std::remainder(
                                    grid.phis[j] - std::arg(term.sing), two_pi)));
        if (d > best) {
            best = d;
            best_j = j;
        }
    }
    rep.alpha_smooth = harmonic_measure_exponent(grid, grid.z_vals[best_j], rep.diameter / 100.0,
                                                 rep.diameter / 10.0);
    return rep;
}

}  // namespace slg
