#pragma once
#include <string>
#include <tuple>
#include <vector>

#include "slg/growth.hpp"

namespace slg {

// Point on the Schottky double: w (holomorphic side), w* (antiholomorphic),
// with the flow-derivative factors accumulated in log form.
struct DoublePoint {
    cplx w{1.0, 0.0};
    cplx wstar{1.0, 0.0};
    cplx log_wprime{0.0};      // log of d w_t / d w_0 along the flow
    cplx log_wstarprime{0.0};
    cplx lambda{0.0};          // log(w' w*' / (w w*)), increment-accumulated

    cplx wprime() const { return std::exp(log_wprime); }
    cplx wstarprime() const { return std::exp(log_wstarprime); }
};

// boundary anchor: wstar w = 1, primes = 1
DoublePoint make_double_point(cplx w_boundary);

struct MartingaleSample {
    cplx anchor;  // z-plane boundary point s
    DoublePoint dp;
    cplx h{0.0};
    cplx M{1.0, 0.0};
    double q = 0.0;
    std::vector<double> branch;  // cached log imags (h branch continuity)
};

struct SPoint {
    int grid_index = 0;
    cplx z;
    cplx w;
    double wprime_abs = 0.0;
    int pole_term = -1;    // index into history_sings
    double pole_gap = 0.0; // 1 - |pole|
};

// grid extrema of |w'| whose node lies in the shadow |e^{i phi} - p| < 2(1-|p|)
// of the nearest-in-angle history singularity p
std::vector<SPoint> find_S_points(const ConformalMap& map, const BoundaryGrid& grid,
                                  const std::vector<cplx>& history_sings);

// Euler step of the double flow: w *= e^{p dt}, w* *= e^{-p* dt}; conformal
// factors by the closed-form Lemma 2 increment (coefficient 1 on the alpha
// sum: the paper's printed 2 fails its own finite-difference oracle)
DoublePoint evolve_double(const DoublePoint& dp, const HerglotzSeries& density,
                          const std::vector<cplx>& xis, const std::vector<cplx>& xistars,
                          const std::vector<double>& alphas, double dt, double dq);

// h = (g1 - g2)/sqrt(kappa) + (sqrt(kappa)/4) lambda,
// g1 = sum alpha_n [log(w - xi_n) + log(1 - w* xi_n) - log xi_n], g2 starred.
// xi_n = 0 (generalized center) contributes alpha_n (log w - log w*
// + center_gap), center_gap the accumulated -log xi_0 + log xi*_0 of the
// driver state (the divergent modulus constant is dropped; the angular part
// carries noise). branch: 6 cached imags per driver, updated in place.
cplx h_function(const DoublePoint& dp, const std::vector<cplx>& xis,
                const std::vector<cplx>& xistars, const std::vector<double>& alphas,
                double kappa, std::vector<double>* branch = nullptr,
                cplx center_gap = cplx(0.0));

inline cplx martingale_M(cplx h, double kappa) { return std::exp(h / std::sqrt(kappa)); }

// predicted noise increment as printed: -(2i/sqrt(kappa)) M sum alpha_n R_n dW,
// R_n = (K_n + L_n)/2 the double-sided Re of the Poisson kernel. (The
// increments realized by the flow carry -(2i/kappa); the diagnostics report
// both, see the decisions in the tests.)
cplx predicted_dM(cplx M, const DoublePoint& dp, const std::vector<cplx>& xis,
                  const std::vector<cplx>& xistars, const std::vector<double>& alphas,
                  double kappa, double dW);

// P(z) = sigma G(z, infinity) - (1/2) sum alpha_n G(z, zeta_n); zetas are the
// physical source points (generalized center excluded)
double pressure(const ConformalMap& map, const std::vector<cplx>& zetas,
                const RateParams& params, cplx z);

// dP/dq at boundary point s: [sigma - (1/2) sum alpha_n Re K_n]^2
double pressure_variation(const ConformalMap& map, const std::vector<cplx>& xis,
                          const RateParams& params, cplx s);

// Hadamard (Hvf): delta G(z1,z2) = (1/2pi) oint dnG(z1,s) dnG(z2,s) dh |ds|,
// dh = rho |z'| dt on the growth density rho
double hadamard_variation(const ConformalMap& map, const BoundaryGrid& grid,
                          const std::vector<double>& density_grid, cplx z1, cplx z2,
                          double dt);

// nabla(zeta) G(z1,z2) = -(1/4pi) oint dnG(zeta,s) dnG(z1,s) dnG(z2,s) |ds|
double elementary_deformation(const ConformalMap& map, cplx zeta, cplx z1, cplx z2,
                              int grid_m = 4096);
// boundary form: (1/2) dnG(zeta,s) dnG(z1,s)
double elementary_deformation_boundary(const ConformalMap& map, cplx zeta, cplx z1, cplx s);

enum class MartingaleCheck { mean_M, prop2_cov, corollary };

struct MartingaleConfig {
    double kappa = 6.0;
    double bigQ = 2.0 * M_PI;
    double nu = 1.0;
    double r0 = 1.0;
    std::vector<double> alphas;  // physical charges
    std::vector<cplx> xis0;      // physical initial drivers
    cplx anchor_w{1.0, 0.0};     // boundary anchor on the initial circle (w-plane)
    double dt = 1e-6;
    int steps = 50;
    int grid_m = 256;
    uint64_t seed = 1;
    DriverMode driver_mode = DriverMode::literal_double;
    int n_threads = 1;
    int record_every = 1;
};

struct EnsembleStats {
    int n_paths = 0;
    cplx mean{0.0};
    double stderr_ = 0.0;
    std::vector<std::tuple<std::string, double, double>> cov_entries;
    std::vector<double> times;     // recorded q times
    std::vector<double> zscores;   // per recorded time (mean_M) / per identity
    std::vector<double> drift_zscores;  // realized-vs-predicted dM per step
    double max_abs_z = 0.0;
    int gap_steps = 0;  // steps where the anchor left S (path 0 diagnostic)
};

EnsembleStats ensemble_verify(const MartingaleConfig& config, MartingaleCheck check,
                              int n_paths);

}  // namespace slg
