#include "slg/config.hpp"

#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace slg {

using json = nlohmann::ordered_json;

static json cplx_json(cplx z) { return json::array({z.real(), z.imag()}); }

static cplx cplx_from(const json& j) {
    if (!j.is_array() || j.size() != 2) throw ConfigError("complex values are [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
}

void resolve_config(RunConfig& c) {
    if (c.bigQ <= 0.0 || c.nu <= 0.0) throw ConfigError("Q and nu must be positive");
    if (c.kappa < 0.0) throw ConfigError("kappa must be non-negative");
    if (c.n_drivers < 0) throw ConfigError("n_drivers must be >= 0");
    if (c.initial_radius <= 0.0) throw ConfigError("initial_radius must be positive");
    if (c.dt <= 0.0) throw ConfigError("dt must be positive");
    if (c.steps < 1) throw ConfigError("steps must be >= 1");
    if (c.snapshot_every < 1) throw ConfigError("snapshot_every must be >= 1");
    if (c.grid_m < 16 || (c.grid_m & (c.grid_m - 1)) != 0)
        throw ConfigError("grid_m must be a power of two >= 16");
    if (c.prune_tau < 0.0) throw ConfigError("prune tau must be >= 0");
    for (const auto& t : c.initial_perturbations)
        if (std::abs(t.sing) >= 1.0)
            throw ConfigError("perturbation singularities must satisfy |sing| < 1");
    if (c.alphas.empty() && c.n_drivers > 0) c.alphas.assign(c.n_drivers, 1.0);
    if (static_cast<int>(c.alphas.size()) != c.n_drivers)
        throw ConfigError("alphas must have n_drivers entries");
    if (c.initial_drivers.empty() && c.n_drivers > 0) {
        if (c.driver_radius <= 0.0 || c.driver_radius >= 1.0)
            throw ConfigError("driver_radius must be in (0, 1)");
        for (int n = 0; n < c.n_drivers; ++n)
            c.initial_drivers.push_back(std::polar(c.driver_radius,
                                                   2.0 * M_PI * n / c.n_drivers));
    }
    if (static_cast<int>(c.initial_drivers.size()) != c.n_drivers)
        throw ConfigError("initial_drivers must have n_drivers entries");
    for (const cplx& xi : c.initial_drivers)
        if (std::abs(xi) >= 1.0 || xi == 0.0)
            throw ConfigError("drivers must satisfy 0 < |xi| < 1");
    if (c.anchors.empty() && c.n_drivers > 0) {
        ConformalMap m0{c.initial_radius, c.initial_perturbations, {}};
        for (const cplx& xi : c.initial_drivers) c.anchors.push_back(m0.z(1.0 / std::conj(xi)));
    }
    if (static_cast<int>(c.anchors.size()) != c.n_drivers)
        throw ConfigError("anchors must have n_drivers entries");
    if (c.mode == GrowthMode::stochastic && c.n_drivers > 0 && c.kappa <= 0.0)
        throw ConfigError("stochastic mode with drivers needs kappa > 0");
    c.sigma = RateParams::make(c.bigQ, c.nu, c.alphas).sigma;
}

static json config_json(const RunConfig& c) {
    json j;
    j["Q"] = c.bigQ;
    j["nu"] = c.nu;
    j["kappa"] = c.kappa;
    j["n_drivers"] = c.n_drivers;
    j["alphas"] = c.alphas;
    j["initial_radius"] = c.initial_radius;
    json perts = json::array();
    for (const auto& t : c.initial_perturbations)
        perts.push_back({{"coeff", cplx_json(t.coeff)}, {"sing", cplx_json(t.sing)}});
    j["initial_perturbations"] = perts;
    json drv = json::array();
    for (const cplx& x : c.initial_drivers) drv.push_back(cplx_json(x));
    j["initial_drivers"] = drv;
    j["driver_radius"] = c.driver_radius;
    json anc = json::array();
    for (const cplx& a : c.anchors) anc.push_back(cplx_json(a));
    j["anchors"] = anc;
    j["dt"] = c.dt;
    j["steps"] = c.steps;
    j["snapshot_every"] = c.snapshot_every;
    j["grid_m"] = c.grid_m;
    j["seed"] = c.seed;
    j["mode"] = c.mode == GrowthMode::deterministic ? "deterministic" : "stochastic";
    j["driver_mode"] =
        c.driver_mode == DriverMode::conjugate_slice ? "conjugate_slice" : "literal_double";
    j["tolerances"] = {{"newton", c.tolerances.newton},
                       {"cusp", c.tolerances.cusp},
                       {"skew", c.tolerances.skew},
                       {"max_newton", c.tolerances.max_newton}};
    j["prune"] = {{"tau", c.prune_tau}};
    j["sigma"] = c.sigma;
    return j;
}

static RunConfig config_from(const json& j) {
    RunConfig c;
    try {
        if (j.contains("Q")) c.bigQ = j["Q"].get<double>();
        if (j.contains("nu")) c.nu = j["nu"].get<double>();
        if (j.contains("kappa")) c.kappa = j["kappa"].get<double>();
        if (j.contains("n_drivers")) c.n_drivers = j["n_drivers"].get<int>();
        if (j.contains("alphas")) c.alphas = j["alphas"].get<std::vector<double>>();
        if (j.contains("initial_radius")) c.initial_radius = j["initial_radius"].get<double>();
        if (j.contains("initial_perturbations"))
            for (const auto& p : j["initial_perturbations"])
                c.initial_perturbations.push_back({cplx_from(p["coeff"]), cplx_from(p["sing"])});
        if (j.contains("initial_drivers"))
            for (const auto& x : j["initial_drivers"]) c.initial_drivers.push_back(cplx_from(x));
        if (j.contains("driver_radius")) c.driver_radius = j["driver_radius"].get<double>();
        if (j.contains("anchors"))
            for (const auto& a : j["anchors"]) c.anchors.push_back(cplx_from(a));
        if (j.contains("dt")) c.dt = j["dt"].get<double>();
        if (j.contains("steps")) c.steps = j["steps"].get<int>();
        if (j.contains("snapshot_every")) c.snapshot_every = j["snapshot_every"].get<int>();
        if (j.contains("grid_m")) c.grid_m = j["grid_m"].get<int>();
        if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
        if (j.contains("mode")) {
            std::string m = j["mode"].get<std::string>();
            if (m == "deterministic")
                c.mode = GrowthMode::deterministic;
            else if (m == "stochastic")
                c.mode = GrowthMode::stochastic;
            else
                throw ConfigError("mode must be deterministic|stochastic");
        }
        if (j.contains("driver_mode")) {
            std::string m = j["driver_mode"].get<std::string>();
            if (m == "conjugate_slice")
                c.driver_mode = DriverMode::conjugate_slice;
            else if (m == "literal_double")
                c.driver_mode = DriverMode::literal_double;
            else
                throw ConfigError("driver_mode must be conjugate_slice|literal_double");
        }
        if (j.contains("tolerances")) {
            const auto& t = j["tolerances"];
            if (t.contains("newton")) c.tolerances.newton = t["newton"].get<double>();
            if (t.contains("cusp")) c.tolerances.cusp = t["cusp"].get<double>();
            if (t.contains("skew")) c.tolerances.skew = t["skew"].get<double>();
            if (t.contains("max_newton")) c.tolerances.max_newton = t["max_newton"].get<int>();
        }
        if (j.contains("prune") && j["prune"].contains("tau"))
            c.prune_tau = j["prune"]["tau"].get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse: ") + e.what());
    }
    resolve_config(c);
    return c;
}

RunConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    return config_from(j);
}

std::string config_to_json(const RunConfig& c) { return config_json(c).dump(2) + "\n"; }

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

McheckConfig mcheck_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    McheckConfig mc;
    mc.run = config_from(j);
    try {
        if (j.contains("mcheck")) {
            const auto& m = j["mcheck"];
            if (m.contains("checks")) mc.checks = m["checks"].get<std::vector<std::string>>();
            if (m.contains("n_paths")) mc.n_paths = m["n_paths"].get<int>();
            if (m.contains("anchor_w")) mc.anchor_w = cplx_from(m["anchor_w"]);
            if (m.contains("record_every")) mc.record_every = m["record_every"].get<int>();
            if (m.contains("n_threads")) mc.n_threads = m["n_threads"].get<int>();
            if (m.contains("steps")) mc.mc_steps = m["steps"].get<int>();
            if (m.contains("dt")) mc.mc_dt = m["dt"].get<double>();
            if (m.contains("grid_m")) mc.mc_grid_m = m["grid_m"].get<int>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("mcheck parse: ") + e.what());
    }
    for (const std::string& c : mc.checks)
        if (c != "mean_M" && c != "prop2_cov" && c != "corollary")
            throw ConfigError("unknown check: " + c);
    if (mc.n_paths < 1) throw ConfigError("n_paths must be >= 1");
    return mc;
}

MartingaleConfig to_martingale_config(const McheckConfig& mc) {
    MartingaleConfig m;
    m.kappa = mc.run.kappa;
    m.bigQ = mc.run.bigQ;
    m.nu = mc.run.nu;
    m.r0 = mc.run.initial_radius;
    m.alphas = mc.run.alphas;
    m.xis0 = mc.run.initial_drivers;
    m.anchor_w = mc.anchor_w;
    m.dt = mc.mc_dt;
    m.steps = mc.mc_steps;
    m.grid_m = mc.mc_grid_m;
    m.seed = mc.run.seed;
    m.driver_mode = mc.run.driver_mode;
    m.n_threads = mc.n_threads;
    m.record_every = mc.record_every;
    return m;
}

// ---- simulation driver ----------------------------------------------------

Trajectory run_simulation(const RunConfig& config) {
    RunConfig cfg = config;
    resolve_config(cfg);
    RateParams params = RateParams::make(cfg.bigQ, cfg.nu, cfg.alphas);
    std::vector<cplx> xis0 = cfg.mode == GrowthMode::stochastic
                                 ? cfg.initial_drivers
                                 : std::vector<cplx>{};
    std::vector<cplx> anchors =
        cfg.mode == GrowthMode::stochastic ? cfg.anchors : std::vector<cplx>{};
    GrowthState st = make_growth_state(cfg.initial_radius, cfg.initial_perturbations, xis0,
                                       anchors, params, cfg.kappa, cfg.driver_mode, cfg.mode,
                                       cfg.grid_m);
    st.grid_m = cfg.grid_m;
    NoiseStream noise{cfg.seed, 0, cfg.kappa};

    Trajectory traj;
    const size_t N = xis0.size();
    traj.zeta_paths.resize(N);
    traj.driver_paths.resize(N);
    for (size_t n = 0; n < N; ++n) traj.driver_paths[n].push_back(st.drivers.xis[n]);
    traj.snapshots.push_back({0, 0.0, st.map, st.drivers});

    for (int step = 1; step <= cfg.steps; ++step) {
        StepReport rep;
        try {
            rep = grow_step(st, cfg.dt, noise, cfg.tolerances);
            if (cfg.prune_tau > 0.0)
                rep.pruned_terms = prune_terms(st, cfg.prune_tau, cfg.tolerances);
        } catch (const Error& e) {
            traj.aborted = true;
            traj.termination = e.what();
            break;
        }
        traj.reports.push_back(rep);
        for (size_t n = 0; n < N; ++n) {
            traj.zeta_paths[n].push_back(st.prev_zeta[n]);
            traj.driver_paths[n].push_back(st.drivers.xis[n]);
        }
        if (step % cfg.snapshot_every == 0 || step == cfg.steps)
            traj.snapshots.push_back({static_cast<uint64_t>(step), st.t, st.map, st.drivers});
    }
    traj.coeff_history = st.coeff_history;
    traj.final_targets = st.targets;
    return traj;
}

// ---- output files ----------------------------------------------------------

void write_manifest(const std::string& path, const RunConfig& cfg, const Trajectory& traj) {
    RunConfig resolved = cfg;
    resolve_config(resolved);
    json j;
    j["format"] = "slg-manifest-1";
    j["config"] = config_json(resolved);
    j["termination"] = traj.termination;
    j["aborted"] = traj.aborted;
    j["steps_completed"] = traj.reports.size();
    j["conventions"] = {
        {"c_def_endpoints", "pre-solve map at both endpoints; first step 1/delta_zeta(t0) := 0"},
        {"area", "(a:A) residual literal, scaled Q t/(2 pi); quadrature closed with chord"}};
    json reps = json::array();
    for (size_t i = 0; i < traj.reports.size(); ++i) {
        const StepReport& r = traj.reports[i];
        reps.push_back({{"step", i + 1},
                        {"dt_used", r.dt_used},
                        {"dq_mean", r.dq_mean},
                        {"newton_iters", r.newton_iters},
                        {"max_residual", r.max_residual},
                        {"min_density", r.min_density},
                        {"area_quadrature", r.area_quadrature},
                        {"area_closed_form", r.area_closed_form},
                        {"pruned_terms", r.pruned_terms}});
    }
    j["reports"] = reps;
    json snaps = json::array();
    for (const Snapshot& s : traj.snapshots) {
        json e = {{"step", s.step},
                  {"t", s.t},
                  {"radius", s.map.radius},
                  {"n_terms", s.map.terms.size()}};
        if (resolved.mode == GrowthMode::deterministic)
            e["radius_law"] = std::sqrt(resolved.initial_radius * resolved.initial_radius +
                                        resolved.bigQ * s.t / M_PI);
        snaps.push_back(e);
    }
    j["snapshots"] = snaps;
    json targets = json::array();
    for (const cplx& t : traj.final_targets) targets.push_back(cplx_json(t));
    j["conserved_targets"] = targets;
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << "\n";
}

void write_contours(const std::string& path, const Trajectory& traj, int grid_m) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot write " + path);
    std::fputs("step,t,phi,re_z,im_z\n", f);
    for (const Snapshot& s : traj.snapshots) {
        BoundaryGrid g = make_grid(s.map, grid_m);
        for (int j = 0; j < g.m; ++j)
            std::fprintf(f, "%" PRIu64 ",%.17g,%.17g,%.17g,%.17g\n", s.step, s.t, g.phis[j],
                         g.z_vals[j].real(), g.z_vals[j].imag());
    }
    std::fclose(f);
}

void write_map_params(const std::string& path, const Trajectory& traj) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot write " + path);
    std::fputs("step,t,radius,term,re_coeff,im_coeff,re_sing,im_sing\n", f);
    for (const Snapshot& s : traj.snapshots) {
        std::fprintf(f, "%" PRIu64 ",%.17g,%.17g,-1,0,0,0,0\n", s.step, s.t, s.map.radius);
        for (size_t k = 0; k < s.map.terms.size(); ++k)
            std::fprintf(f, "%" PRIu64 ",%.17g,%.17g,%zu,%.17g,%.17g,%.17g,%.17g\n", s.step,
                         s.t, s.map.radius, k, s.map.terms[k].coeff.real(),
                         s.map.terms[k].coeff.imag(), s.map.terms[k].sing.real(),
                         s.map.terms[k].sing.imag());
    }
    std::fclose(f);
}

std::vector<ConformalMap> read_map_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || line != "step,t,radius,term,re_coeff,im_coeff,re_sing,im_sing")
        throw Error("bad map_params header in " + path);
    std::vector<ConformalMap> maps;
    long long cur_step = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        unsigned long long step;
        double t, radius, rc, ic, rs, is;
        long long term;
        if (std::sscanf(line.c_str(), "%llu,%lg,%lg,%lld,%lg,%lg,%lg,%lg", &step, &t, &radius,
                        &term, &rc, &ic, &rs, &is) != 8)
            throw Error("bad map_params row: " + line);
        if (static_cast<long long>(step) != cur_step) {
            maps.emplace_back();
            maps.back().radius = radius;
            cur_step = static_cast<long long>(step);
        }
        if (term >= 0) maps.back().terms.push_back({{rc, ic}, {rs, is}});
    }
    return maps;
}

void write_stats(const std::string& path, const std::vector<StatRow>& rows) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot write " + path);
    std::fputs("check,estimate,stderr,z\n", f);
    for (const auto& [name, est, se, z] : rows)
        std::fprintf(f, "%s,%.17g,%.17g,%.17g\n", name.c_str(), est, se, z);
    std::fclose(f);
}

}  // namespace slg
