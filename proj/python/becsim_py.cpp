// Python bindings: parameter and region types, the corner calculators, and
// the Monte Carlo driver. Protocols are addressed by their CLI names so the
// python surface and the command line stay interchangeable.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "becsim/regions.hpp"
#include "becsim/sim.hpp"

namespace py = pybind11;
using namespace becsim;

namespace {

ProtocolId id_from(const std::string& name) {
    const std::optional<ProtocolId> id = protocol_from_name(name);
    if (!id) throw std::invalid_argument("unknown protocol: " + name);
    return *id;
}

std::string params_repr(const ChannelParams& p) {
    return "ChannelParams(delta1=" + std::to_string(p.delta1) +
           ", delta2=" + std::to_string(p.delta2) + ", eps1=" + std::to_string(p.eps1) +
           ", eps2=" + std::to_string(p.eps2) + ")";
}

}  // namespace

PYBIND11_MODULE(becsim_py, m) {
    m.doc() = "Two-user broadcast erasure channel simulator with receiver-side caches";

    py::class_<ChannelParams>(m, "ChannelParams")
        .def(py::init([](double delta1, double delta2, double eps1, double eps2) {
                 ChannelParams p{delta1, delta2, eps1, eps2};
                 p.validate();
                 return p;
             }),
             py::arg("delta1"), py::arg("delta2"), py::arg("eps1") = 0.0, py::arg("eps2") = 0.0)
        .def_readwrite("delta1", &ChannelParams::delta1)
        .def_readwrite("delta2", &ChannelParams::delta2)
        .def_readwrite("eps1", &ChannelParams::eps1)
        .def_readwrite("eps2", &ChannelParams::eps2)
        .def("__repr__", &params_repr);

    py::class_<RatePair>(m, "RatePair")
        .def(py::init([](double r1, double r2) { return RatePair{r1, r2}; }), py::arg("r1"),
             py::arg("r2"))
        .def_readwrite("r1", &RatePair::r1)
        .def_readwrite("r2", &RatePair::r2)
        .def("__iter__",
             [](const RatePair& r) { return py::iter(py::make_tuple(r.r1, r.r2)); })
        .def("__repr__", [](const RatePair& r) {
            return "RatePair(r1=" + std::to_string(r.r1) + ", r2=" + std::to_string(r.r2) + ")";
        });

    py::class_<RateRegion>(m, "RateRegion")
        .def_readonly("label", &RateRegion::label)
        .def_property_readonly("halfplanes",
                               [](const RateRegion& r) {
                                   py::list out;
                                   for (const HalfPlane& h : r.halfplanes)
                                       out.append(py::make_tuple(h.c1, h.c2, h.bound));
                                   return out;
                               })
        .def("vertices",
             [](const RateRegion& r) {
                 py::list out;
                 for (const RatePair& v : vertices(r)) out.append(py::make_tuple(v.r1, v.r2));
                 return out;
             })
        .def(
            "contains",
            [](const RateRegion& r, double r1, double r2, double tol) {
                return contains(r, {r1, r2}, tol);
            },
            py::arg("r1"), py::arg("r2"), py::arg("tol") = 1e-9)
        .def("max_sum_rate_vertex", [](const RateRegion& r) { return max_sum_rate_vertex(r); })
        .def("csv", [](const RateRegion& r) { return region_csv(r); })
        .def("__repr__", [](const RateRegion& r) {
            return "RateRegion(label='" + r.label + "', " +
                   std::to_string(r.halfplanes.size()) + " halfplanes)";
        });

    m.def("region_nn_nonblind", &region_nn_nonblind, py::arg("params"));
    m.def("region_dd_outer", &region_dd_outer, py::arg("params"));
    m.def("region_nn_blind_inner", &region_nn_blind_inner, py::arg("params"));
    m.def("corner_case_b", &corner_case_b, py::arg("params"));

    m.def("protocols", [] {
        std::vector<std::string> out;
        for (const ProtocolId id : all_protocols()) out.emplace_back(protocol_name(id));
        return out;
    });
    m.def(
        "default_corner",
        [](const std::string& protocol, const ChannelParams& p) {
            return default_corner(id_from(protocol), p);
        },
        py::arg("protocol"), py::arg("params"));
    m.def(
        "outer_region",
        [](const std::string& protocol, const ChannelParams& p) {
            return outer_region(id_from(protocol), p);
        },
        py::arg("protocol"), py::arg("params"));
    m.def(
        "message_sizes",
        [](const std::string& protocol, size_t m, const RatePair& corner) {
            return message_sizes(id_from(protocol), m, corner);
        },
        py::arg("protocol"), py::arg("m"), py::arg("corner"));

    py::class_<SimStats>(m, "SimStats")
        .def_property_readonly(
            "protocol", [](const SimStats& s) { return std::string(protocol_name(s.protocol)); })
        .def_readonly("params", &SimStats::params)
        .def_readonly("m1", &SimStats::m1)
        .def_readonly("m2", &SimStats::m2)
        .def_readonly("corner", &SimStats::corner)
        .def_readonly("trials", &SimStats::trials)
        .def_readonly("failures", &SimStats::failures)
        .def_readonly("failure_prob", &SimStats::failure_prob)
        .def_readonly("mean_rate", &SimStats::mean_rate)
        .def_readonly("stderr_rate", &SimStats::stderr_rate)
        .def_readonly("ci95_rate", &SimStats::ci95_rate)
        .def_readonly("mean_slots", &SimStats::mean_slots)
        .def_readonly("phase_ids", &SimStats::phase_ids)
        .def_readonly("mean_phase_lengths", &SimStats::mean_phase_lengths)
        .def_readonly("mean_rx2_receptions", &SimStats::mean_rx2_receptions)
        .def_readonly("mean_excess_receptions", &SimStats::mean_excess_receptions)
        .def("to_json", [](const SimStats& s) { return to_json(s); })
        .def("__repr__", [](const SimStats& s) {
            return "SimStats(protocol='" + std::string(protocol_name(s.protocol)) +
                   "', trials=" + std::to_string(s.trials) + ")";
        });

    py::class_<ComparisonReport>(m, "ComparisonReport")
        .def_readonly("corner", &ComparisonReport::corner)
        .def_readonly("mean_rate", &ComparisonReport::mean_rate)
        .def_readonly("rel_err", &ComparisonReport::rel_err)
        .def_readonly("failure_prob", &ComparisonReport::failure_prob)
        .def_readonly("failure_ceiling", &ComparisonReport::failure_ceiling)
        .def_readonly("rates_ok", &ComparisonReport::rates_ok)
        .def_readonly("failures_ok", &ComparisonReport::failures_ok)
        // "pass" is a python keyword, so the verdict lands on "passed".
        .def_readonly("passed", &ComparisonReport::pass)
        .def("to_json", [](const ComparisonReport& r) { return to_json(r); });

    m.def(
        "run_trials",
        [](const std::string& protocol, const ChannelParams& params, size_t m, size_t trials,
           uint64_t seed, double slack_coeff, std::optional<RatePair> corner) {
            SimConfig cfg;
            cfg.protocol = id_from(protocol);
            cfg.params = params;
            cfg.m = m;
            cfg.trials = trials;
            cfg.seed = seed;
            cfg.slack_coeff = slack_coeff;
            cfg.target_corner = corner;
            return run_trials(cfg);
        },
        py::arg("protocol"), py::arg("params"), py::arg("m"), py::arg("trials") = 20,
        py::arg("seed") = 1, py::arg("slack_coeff") = 3.0, py::arg("corner") = py::none(),
        py::call_guard<py::gil_scoped_release>());

    m.def("compare_to_corner", &compare_to_corner, py::arg("stats"), py::arg("corner"),
          py::arg("rel_tol"), py::arg("failure_ceiling") = 0.01);
}
