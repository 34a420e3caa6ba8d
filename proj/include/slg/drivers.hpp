#pragma once
#include <vector>

#include "slg/conformal.hpp"
#include "slg/rng.hpp"

namespace slg {

enum class DriverMode { conjugate_slice, literal_double };

struct RateParams {
    double bigQ = 2.0 * M_PI;  // total sink rate Q
    double nu = 1.0;           // rate quantum
    std::vector<double> alphas;
    double sigma = 0.0;        // Q/(2 pi nu) + sum(alpha)/2
    std::vector<double> lambdas;  // nonempty => generalized N+1 drivers (lambda0 = -sigma)

    static RateParams make(double bigQ, double nu, std::vector<double> alphas,
                           bool generalized = false);
    bool generalized() const { return !lambdas.empty(); }
};

struct DriverState {
    std::vector<cplx> xis;
    std::vector<cplx> xistars;
    std::vector<double> qs;
    std::vector<cplx> anchors;  // fjord-tip constants zeta_n^0 (z-plane)
    double w_accum = 0.0;
    // accumulated -log xi_0 + log xi*_0 of a generalized center at xi_0 = 0:
    // the modulus part is a divergent constant (dropped), but the angular part
    // evolves with the noise and enters the h-function
    cplx center_log_gap{0.0};
};

// Z_N of the vertex product, starred coordinates independent (|f|^2 = f times
// its starred mirror); full diagonal factor (1 - xi_n xi*_n)^{4/kappa}.
double z_n_product(const std::vector<cplx>& xis, const std::vector<cplx>& xistars,
                   double kappa);

// Interaction drift g_n. The log-derivative of Z counts the diagonal pair
// once (half weight); with the full diagonal the -(2N-1)/2 constant is lost
// (exponent-convention gap recorded in the tests). In generalized mode
// params.lambdas weights the sums, the center driver sits at index 0, and
// pairs involving the center enter log Z with weight +sigma so the center's
// contribution to a test driver is the -sigma constant of the plain SDE.
cplx drift_g(size_t n, const std::vector<cplx>& xis, const std::vector<cplx>& xistars,
             double kappa, const RateParams& params);
// starred-coordinate drift (roles of xi and xi* exchanged)
cplx drift_g_star(size_t n, const std::vector<cplx>& xis, const std::vector<cplx>& xistars,
                  double kappa, const RateParams& params);

struct TimeChangeMode {
    enum Kind { exact, fractal } kind = exact;
    double alpha = 1.0;             // fractal exponent
    std::vector<double> eps;        // fractal length scales per anchor
};

std::vector<double> time_change(const ConformalMap& map, const std::vector<cplx>& anchors,
                                double nu, double dt, const TimeChangeMode& mode = {});

// One Euler-Maruyama step in log coordinates (Ito correction +kappa/4 dq).
DriverState step_drivers(const DriverState& state, const std::vector<double>& dqs,
                         double dW, const RateParams& params, double kappa,
                         DriverMode mode, double skew_tol = 0.25);

}  // namespace slg
