#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "smcsynth/errors.hpp"
#include "smcsynth/io.hpp"
#include "smcsynth/polytope.hpp"
#include "smcsynth/sim.hpp"
#include "smcsynth/synthesis.hpp"

namespace py = pybind11;
using namespace smcsynth;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
    if (a.ndim() != 2) throw InvalidInput("expected a 2-D array");
    Matrix m(a.shape(0), a.shape(1));
    auto r = a.unchecked<2>();
    for (py::ssize_t i = 0; i < r.shape(0); ++i)
        for (py::ssize_t j = 0; j < r.shape(1); ++j) m(i, j) = r(i, j);
    return m;
}

py::array_t<double> to_array(const Matrix& m) {
    py::array_t<double> a({m.rows(), m.cols()});
    auto w = a.mutable_unchecked<2>();
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) w(i, j) = m(i, j);
    return a;
}

py::array_t<double> rows_array(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
    py::array_t<double> a({rows, cols});
    std::copy(flat.begin(), flat.end(), a.mutable_data());
    return a;
}

py::object json_to_py(const Json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

SynthesisOptions make_options(double param, double phi, bool optimize, std::optional<double> rho_fixed) {
    SynthesisOptions o;
    o.param = param;
    o.phi = phi;
    o.optimize = optimize;
    o.rho_fixed = rho_fixed;
    return o;
}

py::dict report_dict(const EmpiricalReport& r) {
    py::dict d;
    d["trials"] = r.trials;
    d["max_ratio"] = r.max_ratio;
    d["bound_violations"] = r.bound_violations;
    d["t_bound_violations"] = r.t_bound_violations;
    d["lyapunov_violations"] = r.lyapunov_violations;
    py::list reach;
    for (const auto& t : r.results) reach.append(t.reach_time ? py::cast(*t.reach_time) : py::none());
    d["reach_times"] = reach;
    return d;
}

template <class D>
void bind_design(py::class_<D>& c) {
    c.def_property_readonly("K", [](const D& d) { return to_array(d.K); })
        .def_property_readonly("P", [](const D& d) { return to_array(d.P); })
        .def_property_readonly("Q", [](const D& d) { return to_array(d.Q); })
        .def_readonly("lambda_min_Q", &D::lambda_min_Q)
        .def_readonly("rho", &D::rho)
        .def_readonly("phi", &D::phi)
        .def_readonly("T_bound", &D::T_bound)
        .def_readonly("margin", &D::margin)
        .def("to_dict", [](const D& d) { return json_to_py(design_to_json(d)); });
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Sliding-mode reaching-law synthesis on polytopic plants";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
    py::register_exception<InvalidParameter>(m, "InvalidParameter", base.ptr());
    py::register_exception<SynthesisInfeasible>(m, "SynthesisInfeasible", base.ptr());
    py::register_exception<NumericalFailure>(m, "NumericalFailure", base.ptr());
    py::register_exception<SimulationDiverged>(m, "SimulationDiverged", base.ptr());

    py::class_<PolytopicSystem>(m, "PolytopicSystem")
        .def(py::init([](const std::vector<Array>& vs) {
            std::vector<Matrix> v;
            for (const auto& a : vs) v.push_back(to_matrix(a));
            return PolytopicSystem(std::move(v));
        }))
        .def_property_readonly("vertex_count", &PolytopicSystem::vertex_count)
        .def_property_readonly("state_dim", &PolytopicSystem::state_dim)
        .def_property_readonly("input_dim", &PolytopicSystem::input_dim)
        .def("vertex", [](const PolytopicSystem& s, std::size_t k) {
            if (k >= s.vertex_count()) throw py::index_error("vertex index out of range");
            return to_array(s.vertex(k));
        })
        .def("combine", [](const PolytopicSystem& s, const std::vector<double>& alpha) {
            return to_array(combine(s, SimplexPoint(alpha)));
        });

    m.def("visual_servo_polytope", &visual_servo_polytope, py::arg("phi_bar"), py::arg("delta_bar"));
    m.def(
        "rov_polytope",
        [](double m0, double Iz) {
            RovParameters p;
            p.m0 = m0;
            p.Iz = Iz;
            return rov_polytope(p);
        },
        py::arg("m0") = RovParameters{}.m0, py::arg("Iz") = RovParameters{}.Iz);

    py::class_<VscDesign> vsc(m, "VscDesign");
    bind_design(vsc);
    vsc.def_readonly("xi", &VscDesign::xi);
    py::class_<UvcDesign> uvc(m, "UvcDesign");
    bind_design(uvc);
    uvc.def_readonly("mu", &UvcDesign::mu);

    m.def(
        "synth_vsc",
        [](const PolytopicSystem& s, double xi, double phi, bool optimize, std::optional<double> rho_fixed) {
            return synth_vsc(s, make_options(xi, phi, optimize, rho_fixed));
        },
        py::arg("system"), py::arg("xi"), py::arg("phi") = 0.0, py::arg("optimize") = false,
        py::arg("rho_fixed") = py::none());
    m.def(
        "synth_uvc",
        [](const PolytopicSystem& s, double mu, double phi, bool optimize, std::optional<double> rho_fixed) {
            return synth_uvc(s, make_options(mu, phi, optimize, rho_fixed));
        },
        py::arg("system"), py::arg("mu"), py::arg("phi") = 0.0, py::arg("optimize") = false,
        py::arg("rho_fixed") = py::none());
    m.def(
        "certify_gain_vsc",
        [](const PolytopicSystem& s, const Array& K, double xi) { return certify_gain_vsc(s, to_matrix(K), xi); },
        py::arg("system"), py::arg("K"), py::arg("xi"));
    m.def(
        "certify_gain_uvc",
        [](const PolytopicSystem& s, const Array& K, double mu) { return certify_gain_uvc(s, to_matrix(K), mu); },
        py::arg("system"), py::arg("K"), py::arg("mu"));
    m.def("verify_vsc", [](const VscDesign& d, const PolytopicSystem& s) { return verify_vsc(d, s); });
    m.def("verify_uvc", [](const UvcDesign& d, const PolytopicSystem& s) { return verify_uvc(d, s); });
    m.def("reaching_bound_vsc", &reaching_bound_vsc);
    m.def("reaching_bound_uvc", &reaching_bound_uvc);
    m.def("in_omega_vsc", &in_omega_vsc);
    m.def("in_omega_uvc", &in_omega_uvc);

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init<>())
        .def_readwrite("dt", &SimConfig::dt)
        .def_readwrite("horizon", &SimConfig::horizon)
        .def_readwrite("reg_eps", &SimConfig::reg_eps)
        .def_readwrite("reach_tol", &SimConfig::reach_tol)
        .def_readwrite("resolve_layer", &SimConfig::resolve_layer);

    m.def(
        "simulate",
        [](const std::string& law, const Array& B, const Array& K, const std::vector<double>& sigma0,
           const SimConfig& cfg, std::optional<Array> P) {
            std::optional<Matrix> Pm;
            if (P) Pm = to_matrix(*P);
            SimTrace tr;
            {
                py::gil_scoped_release release;
                tr = simulate(parse_control_law(law), to_matrix(B), to_matrix(K), sigma0, cfg, Pm);
            }
            py::dict d;
            d["times"] = tr.times;
            d["states"] = rows_array(tr.states, tr.steps(), tr.n);
            d["inputs"] = rows_array(tr.inputs, tr.steps(), tr.m);
            d["lyapunov"] = tr.lyapunov;
            d["reach_time"] = tr.reach_time;
            return d;
        },
        py::arg("law"), py::arg("B"), py::arg("K"), py::arg("sigma0"), py::arg("config") = SimConfig{},
        py::arg("P") = py::none());

    m.def(
        "empirical_vs_bound",
        [](const VscDesign& d, const PolytopicSystem& s, std::size_t trials, const SimConfig& cfg,
           std::uint64_t seed) { return report_dict(empirical_vs_bound(d, s, trials, cfg, seed)); },
        py::arg("design"), py::arg("system"), py::arg("trials"), py::arg("config"), py::arg("seed") = 0);
    m.def(
        "empirical_vs_bound",
        [](const UvcDesign& d, const PolytopicSystem& s, std::size_t trials, const SimConfig& cfg,
           std::uint64_t seed) { return report_dict(empirical_vs_bound(d, s, trials, cfg, seed)); },
        py::arg("design"), py::arg("system"), py::arg("trials"), py::arg("config"), py::arg("seed") = 0);
}
