#include "obeam/beams.hpp"
#include "obeam/doctor.hpp"
#include "obeam/error.hpp"
#include "obeam/scenario.hpp"
#include "obeam/solver.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace obeam;

namespace {

py::dict check_dict(const BoundCheck& c) {
    py::dict d;
    d["name"] = c.name;
    d["lhs"] = c.lhs;
    d["rhs"] = c.rhs;
    d["fitted_constant"] = c.fitted_constant;
    d["pass"] = c.pass;
    return d;
}

py::list check_list(const std::vector<BoundCheck>& v) {
    py::list out;
    for (const auto& c : v) out.append(check_dict(c));
    return out;
}

}  // namespace

PYBIND11_MODULE(obeam, m) {
    m.doc() = "Wave packets, curvature-matched reflected beams and a grid oracle outside convex obstacles.";
    m.attr("__version__") = OBEAM_VERSION;

    static py::exception<Error> error(m, "Error");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            error(e.what());
        }
    });

    py::class_<FrameParams>(m, "FrameParams")
        .def_readonly("epsilon", &FrameParams::epsilon)
        .def_readonly("delta", &FrameParams::delta)
        .def_readonly("sigma", &FrameParams::sigma)
        .def_readonly("L", &FrameParams::L)
        .def_readonly("loglog", &FrameParams::loglog)
        .def_readonly("relaxed", &FrameParams::relaxed)
        .def("xi_of", [](const FrameParams& p, int i, int j, int k) { return p.xi_of({i, j, k}); });
    m.def("frame_params", &frame_params, py::arg("epsilon"), py::arg("delta"), py::arg("relaxed") = false);

    py::class_<ConvexBody>(m, "ConvexBody")
        .def("level", &ConvexBody::level)
        .def("inside", &ConvexBody::inside)
        .def("describe", &ConvexBody::describe)
        .def("distance", [](const ConvexBody& b, const Vec3& x) { return distance(b, x); });
    m.def("make_sphere", &make_sphere, py::arg("center"), py::arg("radius"));
    m.def("make_ellipsoid", &make_ellipsoid, py::arg("center"), py::arg("semi_axes"));
    m.def("make_superellipsoid", &make_superellipsoid, py::arg("center"), py::arg("semi_axes"), py::arg("exponent"));

    py::class_<FreePacket>(m, "FreePacket")
        .def_readonly("xi", &FreePacket::xi)
        .def_property_readonly("sigma", [](const FreePacket& p) { return p.params.sigma; })
        .def("eval", [](const FreePacket& p, double t, const Vec3& x) { return free_packet_eval(p, t, x); })
        .def("halfspace_eval", [](const FreePacket& p, const Vec3& c, double t, const Vec3& x) {
            return halfspace_eval(p, c, t, x);
        });
    m.def("make_packet", [](const FrameParams& p, int i, int j, int k) { return make_packet(p, {i, j, k}); });

    py::class_<RayEvent>(m, "RayEvent")
        .def_property_readonly("cls", [](const RayEvent& e) { return std::string(to_string(e.cls)); })
        .def_readonly("t_c", &RayEvent::t_c)
        .def_readonly("x_c", &RayEvent::x_c)
        .def_readonly("incidence", &RayEvent::incidence)
        .def_readonly("min_distance", &RayEvent::min_distance);
    m.def(
        "classify",
        [](const ConvexBody& b, const Vec3& origin, const Vec3& xi, double kappa, double clearance) {
            return classify(b, origin, xi, {kappa, clearance, 0.0});
        },
        py::arg("body"), py::arg("origin"), py::arg("xi"), py::arg("kappa") = 0.1, py::arg("clearance") = 0.1);
    m.def("reflect", &reflect);

    py::class_<ReflectedBeam>(m, "ReflectedBeam")
        .def_readonly("eta", &ReflectedBeam::eta)
        .def_readonly("B", &ReflectedBeam::B)
        .def_readonly("eigvals_B", &ReflectedBeam::eigvals_B)
        .def("eval", [](const ReflectedBeam& b, double t, const Vec3& x) { return reflected_eval(b, t, x); });
    m.def("build_reflected", &build_reflected);
    m.def("curvature_matrix", &curvature_matrix);

    m.def("free_green", py::overload_cast<double, double>(&free_green));
    m.def("halfspace_free_gap", [](double s0, double d) {
        const auto g = halfspace_free_gap(s0, d);
        return py::make_tuple(g.difference, g.free_norm);
    });

    m.def("doctor", [] {
        const auto r = doctor();
        py::dict d;
        d["pass"] = r.pass();
        d["seconds"] = r.seconds;
        d["checks"] = check_list(r.checks);
        return d;
    });
    m.def(
        "run_scenario",
        [](const std::string& config, const std::string& out, const std::string& constants) {
            ScenarioConfig c = load_config(config);
            if (!out.empty()) c.output_dir = out;
            std::optional<FrozenConstants> fc;
            if (!constants.empty()) fc = read_constants(constants);
            ScenarioReport r;
            {
                py::gil_scoped_release release;
                r = run_scenario(c, fc ? &*fc : nullptr);
            }
            py::dict d;
            d["name"] = r.name;
            d["scenario"] = r.scenario;
            d["pass"] = r.pass();
            d["checks"] = check_list(r.checks);
            d["monitors"] = check_list(r.monitors);
            d["metrics"] = r.metrics;
            d["files"] = r.files;
            return d;
        },
        py::arg("config"), py::arg("out") = "", py::arg("constants") = "");
}
