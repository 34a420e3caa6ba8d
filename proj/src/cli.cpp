#include "slg/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "slg/analyze.hpp"
#include "slg/config.hpp"

namespace slg {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_growth(const std::string& config_path, const std::string& out_dir,
               const uint64_t* seed, const int* steps, GrowthMode* force_mode) {
    RunConfig cfg;
    try {
        cfg = config_from_json(read_file(config_path));
        if (seed) cfg.seed = *seed;
        if (steps) cfg.steps = *steps;
        if (force_mode) cfg.mode = *force_mode;
        resolve_config(cfg);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }
    fs::create_directories(out_dir);
    Trajectory traj = run_simulation(cfg);
    write_manifest(out_dir + "/manifest.json", cfg, traj);
    write_contours(out_dir + "/contours.csv", traj, cfg.grid_m);
    write_map_params(out_dir + "/map_params.csv", traj);
    if (traj.aborted) {
        std::fprintf(stderr, "numerical abort: %s\n", traj.termination.c_str());
        return 3;
    }
    return 0;
}

int run_analyze(const std::string& config_path, const std::string& out_dir,
                const uint64_t* seed, const int* steps) {
    RunConfig cfg;
    try {
        cfg = config_from_json(read_file(config_path));
        if (seed) cfg.seed = *seed;
        if (steps) cfg.steps = *steps;
        resolve_config(cfg);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }
    fs::create_directories(out_dir);
    Trajectory traj = run_simulation(cfg);
    write_manifest(out_dir + "/manifest.json", cfg, traj);
    write_contours(out_dir + "/contours.csv", traj, cfg.grid_m);
    write_map_params(out_dir + "/map_params.csv", traj);
    if (traj.aborted) {
        std::fprintf(stderr, "numerical abort: %s\n", traj.termination.c_str());
        return 3;
    }
    std::vector<StatRow> rows;
    try {
        AnalyzeReport rep = analyze_fjords(traj, cfg.grid_m);
        for (const FjordReport& f : rep.fjords) {
            std::string p = "fjord" + std::to_string(f.driver);
            rows.emplace_back(p + "_width", f.measured_width, 0.0, 0.0);
            rows.emplace_back(p + "_predicted_width", f.predicted_width, 0.0, 0.0);
            rows.emplace_back(p + "_ratio", f.ratio, 0.0, 0.0);
            rows.emplace_back(p + "_depth", f.depth, 0.0, 0.0);
            rows.emplace_back(p + "_alpha_tip", f.alpha_tip, 0.0, 0.0);
        }
        rows.emplace_back("alpha_smooth", rep.alpha_smooth, 0.0, 0.0);
        rows.emplace_back("diameter", rep.diameter, 0.0, 0.0);
    } catch (const Error& e) {
        write_stats(out_dir + "/stats.csv", rows);
        std::fprintf(stderr, "numerical abort: %s\n", e.what());
        return 3;
    }
    write_stats(out_dir + "/stats.csv", rows);
    return 0;
}

void append_stats(std::vector<StatRow>& rows, const std::string& prefix,
                  const EnsembleStats& st) {
    rows.emplace_back(prefix, std::abs(st.mean), st.stderr_, st.max_abs_z);
    for (const auto& [name, est, se] : st.cov_entries)
        rows.emplace_back(prefix + "." + name, est, se, 0.0);
    for (size_t i = 0; i < st.zscores.size(); ++i)
        rows.emplace_back(prefix + ".z[" + std::to_string(i) + "]", st.zscores[i], 0.0,
                          st.zscores[i]);
    if (!st.drift_zscores.empty()) {
        double worst = 0.0;
        for (double z : st.drift_zscores) worst = std::max(worst, z);
        rows.emplace_back(prefix + ".drift_max_z", worst, 0.0, worst);
    }
    if (st.gap_steps > 0)
        rows.emplace_back(prefix + ".S_gap_steps", double(st.gap_steps), 0.0, 0.0);
}

int run_mcheck(const std::string& config_path, const std::string& out_dir,
               const uint64_t* seed, const int* paths) {
    McheckConfig mc;
    try {
        mc = mcheck_from_json(read_file(config_path));
        if (seed) mc.run.seed = *seed;
        if (paths) mc.n_paths = *paths;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }
    fs::create_directories(out_dir);
    std::vector<StatRow> rows;
    std::string failure;
    try {
        for (const std::string& name : mc.checks) {
            MartingaleConfig m = to_martingale_config(mc);
            if (name == "prop2_cov") {
                append_stats(rows, "prop2_cov",
                             ensemble_verify(m, MartingaleCheck::prop2_cov, mc.n_paths));
                continue;
            }
            MartingaleCheck kind =
                name == "mean_M" ? MartingaleCheck::mean_M : MartingaleCheck::corollary;
            // mode pairing: report both driver-mode conventions
            for (DriverMode dm : {DriverMode::literal_double, DriverMode::conjugate_slice}) {
                m.driver_mode = dm;
                std::string prefix =
                    name + (dm == DriverMode::literal_double ? ".literal_double"
                                                             : ".conjugate_slice");
                append_stats(rows, prefix, ensemble_verify(m, kind, mc.n_paths));
            }
        }
    } catch (const Error& e) {
        failure = e.what();
    }
    write_stats(out_dir + "/stats.csv", rows);
    json j;
    j["format"] = "slg-mcheck-manifest-1";
    j["config"] = json::parse(config_to_json(mc.run));
    j["n_paths"] = mc.n_paths;
    j["checks"] = mc.checks;
    j["termination"] = failure.empty() ? "completed" : failure;
    j["aborted"] = !failure.empty();
    json stats = json::array();
    for (const auto& [name, est, se, z] : rows)
        stats.push_back({{"check", name}, {"estimate", est}, {"stderr", se}, {"z", z}});
    j["stats"] = stats;
    std::ofstream out(out_dir + "/manifest.json");
    out << j.dump(2) << "\n";
    if (!failure.empty()) {
        std::fprintf(stderr, "numerical abort: %s\n", failure.c_str());
        return 3;
    }
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"stochastic Laplacian growth laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    uint64_t seed = 0;
    int steps = 0, paths = 0;
    bool have_seed = false, have_steps = false, have_paths = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "config JSON path")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
            have_seed = true;
        });
    };
    CLI::App* sim = app.add_subcommand("simulate", "stochastic growth run");
    CLI::App* det = app.add_subcommand("deterministic", "deterministic (kappa-free) run");
    CLI::App* mch = app.add_subcommand("martingale-check", "Monte Carlo identity checks");
    CLI::App* ana = app.add_subcommand("analyze", "fjord geometry & measure scaling");
    for (CLI::App* sub : {sim, det, ana}) {
        add_common(sub);
        sub->add_option("--steps", steps, "steps override")->each([&](const std::string&) {
            have_steps = true;
        });
    }
    add_common(mch);
    mch->add_option("--paths", paths, "path count override")->each([&](const std::string&) {
        have_paths = true;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const uint64_t* sp = have_seed ? &seed : nullptr;
    const int* stp = have_steps ? &steps : nullptr;
    const int* pp = have_paths ? &paths : nullptr;
    try {
        if (sim->parsed()) return run_growth(config_path, out_dir, sp, stp, nullptr);
        if (det->parsed()) {
            GrowthMode m = GrowthMode::deterministic;
            return run_growth(config_path, out_dir, sp, stp, &m);
        }
        if (mch->parsed()) return run_mcheck(config_path, out_dir, sp, pp);
        if (ana->parsed()) return run_analyze(config_path, out_dir, sp, stp);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "numerical abort: %s\n", e.what());
        return 3;
    }
    return 2;
}

}  // namespace slg
