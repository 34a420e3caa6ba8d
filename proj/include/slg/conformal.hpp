#pragma once
#include <complex>
#include <vector>

#include "slg/errors.hpp"

namespace slg {

using cplx = std::complex<double>;

// One logarithmic term coeff*log(w/sing - 1) of the map ansatz.
struct LogTerm {
    cplx coeff;
    cplx sing;  // |sing| < 1 strictly
};

// z(w) = radius*w + sum_m coeff_m * log(w/sing_m - 1), |w| >= 1.
// branch_offsets[m] adds 2*pi*i*offset to term m (principal branch at phi=0;
// continuity along boundary sweeps is handled by make_grid's unwrapping).
struct ConformalMap {
    double radius = 1.0;
    std::vector<LogTerm> terms;
    std::vector<int> branch_offsets;  // empty means all zero

    cplx z(cplx w) const;       // principal branches + offsets
    cplx dz(cplx w) const;      // z'(w), branch-free
    void check_singularities(double tol_cusp = 0.0) const;
};

struct BoundaryGrid {
    int m = 0;
    std::vector<double> phis;
    std::vector<cplx> w_vals;    // e^{i phi_j}
    std::vector<cplx> z_vals;    // branch-continuous sweep from phi=0
    std::vector<cplx> dz_vals;   // z'(e^{i phi_j})
    std::vector<double> wprime_abs;  // |w'| = 1/|z'|
};

struct MomentVector {
    double t0 = 0.0;               // area / pi
    std::vector<cplx> tk;          // exterior moments, k = 1..kmax
    std::vector<cplx> vk;          // interior moments, k = 1..kmax
};

enum class HerglotzSide { holomorphic, antiholomorphic };

// Fourier-coefficient form of the Herglotz transform of a density on the
// circle; reusable across many evaluation points.
struct HerglotzSeries {
    std::vector<cplx> chat;  // DFT coefficients chat[k] = (1/m) sum rho_j e^{-ik phi_j}
    int m = 0;

    // p(w)  = -chat0 - 2 sum_{k>=1} chat_{-k} w^{-k}   (|w| >= 1, continues inward)
    // p*(w*) = -chat0 - 2 sum_{k>=1} chat_{k} w*^{-k}
    cplx p(cplx w) const;
    cplx pstar(cplx wstar) const;
};

BoundaryGrid make_grid(const ConformalMap& map, int m);

std::pair<cplx, cplx> eval_map(const ConformalMap& map, cplx w);
cplx invert_map(const ConformalMap& map, cplx z, cplx w_guess);
// inversion used for absorbed/boundary points: accepts |w| < 1 results
cplx invert_map_unrestricted(const ConformalMap& map, cplx z, cplx w_guess);

double green_function(const ConformalMap& map, cplx z1, cplx z2);
double green_function_disk(cplx w1, cplx w2);
// G(z, infinity) = log|w(z)|
double green_function_inf(const ConformalMap& map, cplx z);

// H = |w'(s)| Re[(w(s)+xi)/(w(s)-xi)], xi = 1/conj(w(z))
double poisson_kernel(const ConformalMap& map, cplx z, cplx s);
// same with the boundary point given in the w-plane (u = e^{i phi}); the
// z-plane form must invert s, which is ill-posed for swept-grid values when
// sum(coeff) != 0 (the sweep's branch gap) -- quadratures over a grid should
// use the known u instead
double poisson_kernel_w(const ConformalMap& map, cplx z, cplx u);

HerglotzSeries herglotz_series(const std::vector<double>& density);
HerglotzSeries herglotz_series(const std::vector<cplx>& density);
cplx herglotz_transform(const std::vector<double>& density, cplx w, HerglotzSide side);

MomentVector harmonic_moments(const ConformalMap& map, const BoundaryGrid& grid, int kmax);

// max_j |S(z_j) - conj(z_j)| with S evaluated as the conjugate-coefficient
// map composed with 1/w (independent branch bookkeeping)
double schwarz_residual(const ConformalMap& map, const BoundaryGrid& grid);

// forward DFT, chat[k] = (1/m) sum_j x_j e^{-2 pi i jk/m} (FFTW, cached plans)
std::vector<cplx> dft_forward(const std::vector<cplx>& x);

}  // namespace slg
