#pragma once
#include <string>
#include <tuple>

#include "slg/growth.hpp"
#include "slg/martingale.hpp"

namespace slg {

struct RunConfig {
    double bigQ = 2.0 * M_PI;
    double nu = 1.0;
    double kappa = 0.0;
    int n_drivers = 0;
    std::vector<double> alphas;
    double initial_radius = 1.0;
    std::vector<LogTerm> initial_perturbations;
    std::vector<cplx> initial_drivers;  // resolved; default: ring at driver_radius
    double driver_radius = 0.7;
    std::vector<cplx> anchors;  // resolved; default: z0(1/conj(xi_n))
    double dt = 1e-3;
    int steps = 100;
    int snapshot_every = 10;
    int grid_m = 4096;
    uint64_t seed = 1;
    GrowthMode mode = GrowthMode::stochastic;
    DriverMode driver_mode = DriverMode::conjugate_slice;
    Tolerances tolerances;
    double prune_tau = 0.0;  // 0 = pruning off
    double sigma = 0.0;      // derived on resolve
};

// fills defaults (driver ring, anchors), validates, computes sigma
void resolve_config(RunConfig& c);

RunConfig config_from_json(const std::string& text);
std::string config_to_json(const RunConfig& c);  // resolved echo, round-trips bit-exact
RunConfig load_config(const std::string& path);

// martingale-check settings (same JSON document, "mcheck" section)
struct McheckConfig {
    RunConfig run;
    std::vector<std::string> checks{"mean_M", "prop2_cov", "corollary"};
    int n_paths = 1000;
    cplx anchor_w{1.0, 0.0};
    int record_every = 1;
    int n_threads = 1;
    int mc_steps = 50;
    double mc_dt = 1e-6;
    int mc_grid_m = 256;
};
McheckConfig mcheck_from_json(const std::string& text);
MartingaleConfig to_martingale_config(const McheckConfig& mc);

void write_manifest(const std::string& path, const RunConfig& cfg, const Trajectory& traj);
void write_contours(const std::string& path, const Trajectory& traj, int grid_m);
void write_map_params(const std::string& path, const Trajectory& traj);
std::vector<ConformalMap> read_map_params(const std::string& path);

// rows: (check, estimate, stderr, z)
using StatRow = std::tuple<std::string, double, double, double>;
void write_stats(const std::string& path, const std::vector<StatRow>& rows);

}  // namespace slg
