#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "fracg/config.hpp"
#include "fracg/error.hpp"
#include "fracg/funcspace.hpp"
#include "fracg/pipeline.hpp"
#include "fracg/regularity.hpp"
#include "fracg/solver.hpp"

namespace py = pybind11;
using namespace fracg;

namespace {

using Json = nlohmann::json;

Point to_point(const std::vector<double>& v) {
    if (v.empty() || v.size() > 3) throw DomainError("points have 1 to 3 coordinates");
    Point p{0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < v.size(); ++k) p[k] = v[k];
    return p;
}

Region to_region(const std::optional<std::vector<double>>& center, std::optional<double> radius) {
    if (!center && !radius) return Region::whole();
    if (!center || !radius) throw DomainError("region needs both center and radius");
    return Region::of(Ball{to_point(*center), *radius});
}

SolveOptions solve_opts(double tol, int max_iter, const std::string& method) {
    SolveOptions o;
    o.tol = tol;
    o.max_iter = max_iter;
    if (method == "cg") o.method = SolveMethod::ConjugateGradient;
    else if (method == "steepest") o.method = SolveMethod::SteepestDescent;
    else throw DomainError("method must be 'cg' or 'steepest'");
    return o;
}

}  // namespace

PYBIND11_MODULE(_fracg, m) {
    m.doc() = "Native core of fracg";

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<RangeError>(m, "RangeError", PyExc_OverflowError);
    py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Json::exception& e) {
            py::set_error(py::module_::import("fracg._fracg").attr("ConfigError"), e.what());
        }
    });

    py::class_<NFunction>(m, "NFunction")
        .def_static("power", &NFunction::power, py::arg("p"))
        .def_static("power_log", &NFunction::power_log, py::arg("p"))
        .def_static("table", [](std::vector<std::pair<double, double>> pts) { return NFunction::table(std::move(pts)); },
                    py::arg("points"))
        .def_static("_from_json", [](const std::string& s) { return NFunction::from_json(Json::parse(s)); })
        .def("g", &NFunction::g)
        .def("G", &NFunction::G)
        .def("inv_G", &NFunction::inv_G)
        .def("inv_g", &NFunction::inv_g)
        .def("conjugate", &NFunction::conjugate)
        .def_property_readonly("p", &NFunction::p)
        .def_property_readonly("q", &NFunction::q)
        .def_property_readonly("kappa", &NFunction::kappa)
        .def_property_readonly("ell", &NFunction::ell)
        .def("_to_json", [](const NFunction& nf) { return nf.to_json().dump(); });

    py::class_<GridFunction>(m, "GridFunction")
        .def_property_readonly("values", [](const GridFunction& f) { return f.values(); })
        .def_property_readonly("dim", [](const GridFunction& f) { return f.lattice().dim(); })
        .def_property_readonly("h", [](const GridFunction& f) { return f.lattice().h(); })
        .def("coords", [](const GridFunction& f) {
            std::vector<std::vector<double>> out;
            const auto& lat = f.lattice();
            for (std::size_t i = 0; i < lat.size(); ++i) {
                const Point x = lat.coord(i);
                out.emplace_back(x.begin(), x.begin() + lat.dim());
            }
            return out;
        })
        .def("__len__", &GridFunction::size);

    m.def("_centered_grid", [](int dim, double h, int half, std::vector<double> values, const std::string& ext) {
        const auto lat = Lattice::centered(dim, h, half);
        if (values.size() != lat.size()) throw DomainError("values must have one entry per lattice node");
        return GridFunction(lat, std::move(values), ExteriorModel::from_json(Json::parse(ext), dim));
    });

    py::class_<NonlocalProblem>(m, "Problem")
        .def_static("_from_json", [](const std::string& s) { return build_problem(Json::parse(s)); })
        .def_property_readonly("dim", [](const NonlocalProblem& p) { return p.lattice().dim(); })
        .def_property_readonly("s", &NonlocalProblem::s)
        .def_property_readonly("R_ext", &NonlocalProblem::R_ext)
        .def_property_readonly("nf", &NonlocalProblem::nf)
        .def_property_readonly("omega_size", [](const NonlocalProblem& p) { return p.omega_nodes().size(); })
        .def_property_readonly("datum", &NonlocalProblem::exterior_datum)
        .def("extend", &NonlocalProblem::extend, py::arg("omega_values"))
        .def("restrict", &NonlocalProblem::restrict_to_omega, py::arg("f"))
        .def("_to_json", [](const NonlocalProblem& p) { return p.to_json().dump(); });

    py::class_<SolveReport>(m, "SolveReport")
        .def_readonly("minimizer", &SolveReport::minimizer)
        .def_readonly("final_energy", &SolveReport::final_energy)
        .def_readonly("relative_residual", &SolveReport::relative_residual)
        .def_readonly("iterations", &SolveReport::iterations)
        .def_readonly("converged", &SolveReport::converged)
        .def_readonly("message", &SolveReport::message)
        .def_readonly("energy_history", &SolveReport::energy_history)
        .def("_to_json", [](const SolveReport& r, bool history) { return r.to_json(history).dump(); },
             py::arg("history") = false);

    m.def("solve", [](const NonlocalProblem& p, double tol, int max_iter, const std::string& method) {
              py::gil_scoped_release release;
              return solve(p, solve_opts(tol, max_iter, method));
          },
          py::arg("problem"), py::arg("tol") = 1e-10, py::arg("max_iter") = 20000, py::arg("method") = "cg");
    m.def("energy", [](const NonlocalProblem& p, const GridFunction& v) { return energy(p, v); });
    m.def("linear_oracle", &linear_oracle);

    m.def("gagliardo_modular",
          [](const GridFunction& f, double s, const NFunction& nf, std::optional<std::vector<double>> c,
             std::optional<double> r) { return gagliardo_modular(f, to_region(c, r), s, nf); },
          py::arg("f"), py::arg("s"), py::arg("nf"), py::arg("center") = py::none(), py::arg("radius") = py::none());
    m.def("luxemburg_norm",
          [](const GridFunction& f, const NFunction& nf, std::optional<std::vector<double>> c,
             std::optional<double> r) { return luxemburg_norm(f, to_region(c, r), nf); },
          py::arg("f"), py::arg("nf"), py::arg("center") = py::none(), py::arg("radius") = py::none());
    m.def("tail",
          [](const GridFunction& f, const std::vector<double>& x0, double R, double s, const NFunction& nf) {
              return tail(f, to_point(x0), R, s, nf);
          },
          py::arg("f"), py::arg("x0"), py::arg("R"), py::arg("s"), py::arg("nf"));

    m.def("_de_giorgi", [](double C, double B, double beta, double A0, std::size_t steps) {
        return de_giorgi_iterate(C, B, beta, A0, steps).to_json().dump();
    });
    m.def("_holder_fit", [](const GridFunction& u, const std::vector<double>& x0, double r0, double sigma,
                            std::size_t levels, double s, const NFunction& nf) {
        return holder_decay_fit(u, to_point(x0), r0, sigma, levels, RegularityContext(s, nf)).to_json().dump();
    });
    m.def("_holder_fit_problem", [](const NonlocalProblem& p, const GridFunction& u, const std::vector<double>& x0,
                                    double r0, double sigma, std::size_t levels) {
        return holder_decay_fit(u, to_point(x0), r0, sigma, levels, RegularityContext::from_problem(p))
            .to_json()
            .dump();
    });
    m.def("_sobolev_poincare", [](const GridFunction& f, const std::vector<double>& c, double r, double s,
                                  const NFunction& nf, double theta) {
        return to_json(sobolev_poincare_check(f, Ball{to_point(c), r}, s, nf, theta)).dump();
    });

    m.def("_run_config", [](const std::string& cfg, const std::string& mode, std::optional<std::string> out) {
        static const std::map<std::string, RunMode> modes{
            {"all", RunMode::All}, {"solve", RunMode::Solve}, {"verify", RunMode::Verify}, {"sweep", RunMode::Sweep}};
        const auto it = modes.find(mode);
        if (it == modes.end()) throw DomainError("unknown run mode " + mode);
        const RunConfig rc = RunConfig::parse(Json::parse(cfg));
        rc.validate();
        RunOverrides ov;
        ov.out = std::move(out);
        RunResult r;
        {
            py::gil_scoped_release release;
            r = run(rc, it->second, ov);
        }
        return py::make_tuple(r.exit_code, r.output_dir.string(), r.written, r.messages);
    });
    m.def("run_config_schema", &run_config_schema);
}
