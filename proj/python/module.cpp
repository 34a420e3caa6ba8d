#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "slg/analyze.hpp"
#include "slg/config.hpp"

namespace py = pybind11;
using namespace slg;

PYBIND11_MODULE(pyslg, m) {
    m.doc() = "stochastic Laplacian growth laboratory";

    py::register_exception<Error>(m, "SlgError");

    py::class_<ConformalMap>(m, "ConformalMap")
        .def(py::init([](double radius, const std::vector<std::pair<cplx, cplx>>& terms) {
                 ConformalMap map;
                 map.radius = radius;
                 for (const auto& [c, s] : terms) map.terms.push_back({c, s});
                 map.check_singularities();
                 return map;
             }),
             py::arg("radius"), py::arg("terms") = std::vector<std::pair<cplx, cplx>>{})
        .def_readonly("radius", &ConformalMap::radius)
        .def_property_readonly("terms",
                               [](const ConformalMap& map) {
                                   std::vector<std::pair<cplx, cplx>> out;
                                   for (const auto& t : map.terms)
                                       out.emplace_back(t.coeff, t.sing);
                                   return out;
                               })
        .def("z", [](const ConformalMap& map, cplx w) { return map.z(w); })
        .def("dz", [](const ConformalMap& map, cplx w) { return map.dz(w); });

    m.def("boundary_contour", [](const ConformalMap& map, int grid_m) {
        BoundaryGrid g = make_grid(map, grid_m);
        return std::make_pair(g.phis, g.z_vals);
    });
    m.def("invert_map", [](const ConformalMap& map, cplx z) {
        return invert_map(map, z, z / map.radius);
    });
    m.def("green_function", &green_function);
    m.def("green_function_inf", &green_function_inf);
    m.def("poisson_kernel", &poisson_kernel);
    m.def("harmonic_moments", [](const ConformalMap& map, int grid_m, int kmax) {
        BoundaryGrid g = make_grid(map, grid_m);
        MomentVector mv = harmonic_moments(map, g, kmax);
        return std::make_tuple(mv.t0, mv.tk, mv.vk);
    });
    m.def("elementary_deformation", &elementary_deformation, py::arg("map"), py::arg("zeta"),
          py::arg("z1"), py::arg("z2"), py::arg("grid_m") = 4096);

    m.def("config_roundtrip", [](const std::string& text) {
        return config_to_json(config_from_json(text));
    });

    m.def("run_simulation", [](const std::string& config_json) {
        RunConfig cfg = config_from_json(config_json);
        Trajectory traj = run_simulation(cfg);
        py::dict out;
        out["aborted"] = traj.aborted;
        out["termination"] = traj.termination;
        out["steps_completed"] = traj.reports.size();
        out["final_radius"] = traj.snapshots.back().map.radius;
        out["final_t"] = traj.snapshots.back().t;
        out["n_terms"] = traj.snapshots.back().map.terms.size();
        return out;
    });

    m.def("ensemble_verify",
          [](const std::string& config_json, const std::string& check, int n_paths) {
              McheckConfig mc = mcheck_from_json(config_json);
              MartingaleConfig m2 = to_martingale_config(mc);
              MartingaleCheck kind;
              if (check == "mean_M")
                  kind = MartingaleCheck::mean_M;
              else if (check == "prop2_cov")
                  kind = MartingaleCheck::prop2_cov;
              else if (check == "corollary")
                  kind = MartingaleCheck::corollary;
              else
                  throw ConfigError("unknown check: " + check);
              EnsembleStats st = ensemble_verify(m2, kind, n_paths);
              py::dict out;
              out["n_paths"] = st.n_paths;
              out["mean"] = st.mean;
              out["stderr"] = st.stderr_;
              out["max_abs_z"] = st.max_abs_z;
              out["zscores"] = st.zscores;
              out["gap_steps"] = st.gap_steps;
              py::dict entries;
              for (const auto& [name, est, se] : st.cov_entries)
                  entries[name.c_str()] = std::make_pair(est, se);
              out["entries"] = entries;
              return out;
          });
}
