#pragma once
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "slg/drivers.hpp"

namespace slg {

enum class GrowthMode { deterministic, stochastic };

struct Tolerances {
    double newton = 1e-12;     // scaled residual
    double cusp = 1e-9;        // 1 - |sing| floor
    double skew = 0.25;        // clock-skew bound
    int max_newton = 40;
};

struct StepReport {
    int newton_iters = 0;
    double max_residual = 0.0;
    double min_density = 0.0;
    double area_closed_form = 0.0;
    double area_quadrature = 0.0;
    double dt_used = 0.0;
    double dq_mean = 0.0;
    int pruned_terms = 0;
};

struct NewtonCache;  // Eigen LU, reused across steps when the dimension allows

struct GrowthState {
    ConformalMap map;
    DriverState drivers;
    RateParams params;
    double kappa = 0.0;
    DriverMode driver_mode = DriverMode::conjugate_slice;
    GrowthMode mode = GrowthMode::stochastic;
    double t = 0.0;
    double r0 = 1.0;
    size_t n_initial_terms = 0;
    uint64_t step_index = 0;

    // conserved targets, aligned with map.terms
    std::vector<cplx> targets;
    // branch bookkeeping: committed imag of log(v_j/s_m - 1) per (probe j, term m)
    std::vector<std::vector<double>> probe_log_imag;
    // branch-continuous log imags for the zeta_n evaluations, per driver per term
    std::vector<std::vector<double>> zeta_log_imag;

    std::vector<cplx> prev_zeta;        // zeta_n(t_I), pre-solve map convention
    std::vector<cplx> prev_delta_zeta;  // previous increment (0 before the 2nd step)
    std::vector<std::vector<cplx>> coeff_history;  // c_{n,i}

    double area_const0 = 0.0;  // chord-closed area / 2 pi at t = 0, per (a:A)
    double area0_quad = 0.0;   // chord-closed quadrature area at t = 0
    int grid_m = 4096;

    std::shared_ptr<NewtonCache> newton;
};

GrowthState make_growth_state(double r0, const std::vector<LogTerm>& initial_perturbations,
                              const std::vector<cplx>& xis0, const std::vector<cplx>& anchors,
                              const RateParams& params, double kappa, DriverMode driver_mode,
                              GrowthMode mode, int grid_m);

// rho on the grid; stochastic form needs conjugate-slice coordinates for a
// real result (literal_double xistars deviate at O(q); the real part is used)
std::vector<double> density(const ConformalMap& map, const DriverState& drivers,
                            const RateParams& params, GrowthMode mode,
                            const BoundaryGrid& grid);
// double-cover form (sigma - (1/4) sum alpha (K(u,xi) + K(1/u,xi*))), complex
// when xi* != conj(xi); feeds the Schottky-double Herglotz flow
std::vector<cplx> density_double(const ConformalMap& map, const DriverState& drivers,
                                 const RateParams& params, const BoundaryGrid& grid);

// dqs_override replaces the anchor-inversion clock (used by martingale
// ensembles, whose anchors get absorbed by the boundary)
StepReport grow_step(GrowthState& state, double dt, const NoiseStream& noise,
                     const Tolerances& tol = {},
                     const std::vector<double>* dqs_override = nullptr);

int prune_terms(GrowthState& state, double tau, const Tolerances& tol = {});

struct Snapshot {
    uint64_t step = 0;
    double t = 0.0;
    ConformalMap map;
    DriverState drivers;
};

struct Trajectory {
    std::vector<Snapshot> snapshots;
    std::vector<StepReport> reports;
    std::vector<std::vector<cplx>> zeta_paths;     // per driver: zeta_n(t_i)
    std::vector<std::vector<cplx>> driver_paths;   // per driver: xi_n(t_i)
    std::vector<std::vector<cplx>> coeff_history;  // per driver: c_{n,i}
    std::vector<cplx> final_targets;
    std::string termination = "completed";
    bool aborted = false;
};

struct RunConfig;  // cli module
Trajectory run_simulation(const RunConfig& config);

// Im[dt_zbar * dphi_z] - Q/(2 pi) on the first snapshot's grid
std::vector<double> lg_residual(const Snapshot& a, const Snapshot& b, double bigQ, int grid_m);

}  // namespace slg
