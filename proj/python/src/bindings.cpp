#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "spadfuse/deblur.hpp"
#include "spadfuse/errors.hpp"
#include "spadfuse/metrics.hpp"
#include "spadfuse/pipeline.hpp"
#include "spadfuse/scene.hpp"
#include "spadfuse/snr.hpp"
#include "spadfuse/spad.hpp"

namespace py = pybind11;
using namespace spadfuse;
using nlohmann::json;

namespace {

// Configs and reports cross the boundary as JSON text; the Python side
// wraps these with json.dumps / json.loads.
RunConfig config_from(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return run_config_from_json(j);
}

py::array_t<double> to_array(const Image& img) {
    py::array_t<double> out({img.height(), img.width()});
    std::memcpy(out.mutable_data(), img.storage().data(), img.size() * sizeof(double));
    return out;
}

Image from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw DataError("expected a 2-D array");
    Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::memcpy(img.storage().data(), a.data(), img.size() * sizeof(double));
    return img;
}

std::vector<ExposureSegment> segments_from(const std::vector<std::pair<double, int>>& s) {
    std::vector<ExposureSegment> out;
    out.reserve(s.size());
    for (const auto& [length, e] : s) out.push_back(ExposureSegment{length, e});
    return out;
}

std::string e2e_json(const std::string& config) {
    const E2eReport r = run_e2e(config_from(config));
    json rows = json::array();
    for (const auto& m : r.rows) {
        rows.push_back({{"method", m.method}, {"psnr_db", m.psnr_db}, {"frames_used", m.frames_used},
                        {"frames_total", m.frames_total}, {"bits", m.bits}, {"u_threshold", m.u_threshold}});
    }
    json sweep = json::array();
    for (const auto& s : r.sweep.rows) {
        sweep.push_back({{"u_threshold", s.u_threshold}, {"frames_used", s.frames_used},
                         {"frames_total", s.frames_total}, {"psnr_db", s.psnr_db}});
    }
    return json{{"rows", rows}, {"sweep", sweep}, {"selected", r.sweep.selected}, {"manifest", r.manifest}}.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "SPAD and event camera fusion toolkit";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<SolverError>(m, "SolverError", base.ptr());

    py::class_<SensorParams>(m, "SensorParams")
        .def(py::init<>())
        .def_readwrite("q", &SensorParams::q)
        .def_readwrite("T_bin", &SensorParams::T_bin)
        .def_readwrite("tau", &SensorParams::tau)
        .def_readwrite("phi_dark", &SensorParams::phi_dark)
        .def_readwrite("n_fwc", &SensorParams::n_fwc)
        .def_readwrite("T_exp", &SensorParams::T_exp)
        .def_readwrite("sigma_f", &SensorParams::sigma_f)
        .def_readwrite("c", &SensorParams::c)
        .def_readwrite("sigma_theta", &SensorParams::sigma_theta)
        .def_readwrite("rho", &SensorParams::rho)
        .def_readwrite("sigma_iso", &SensorParams::sigma_iso)
        .def_readwrite("sigma_shot", &SensorParams::sigma_shot)
        .def_readwrite("phi_0", &SensorParams::phi_0)
        .def_readwrite("rho_ref", &SensorParams::rho_ref)
        .def_readwrite("R_bar", &SensorParams::R_bar)
        .def_readwrite("N_0", &SensorParams::N_0)
        .def("validate", &SensorParams::validate);

    py::class_<SnrParams>(m, "SnrParams")
        .def(py::init<>())
        .def_readwrite("q", &SnrParams::q)
        .def_readwrite("phi_dark", &SnrParams::phi_dark)
        .def_readwrite("t_exp", &SnrParams::t_exp)
        .def_readwrite("sigma_f", &SnrParams::sigma_f)
        .def_readwrite("n_fwc", &SnrParams::n_fwc)
        .def_readwrite("t_int", &SnrParams::t_int)
        .def_readwrite("tau_d", &SnrParams::tau_d)
        .def_readwrite("tau_readout", &SnrParams::tau_readout)
        .def_readwrite("c", &SnrParams::c)
        .def_readwrite("sigma_theta", &SnrParams::sigma_theta)
        .def_readwrite("k_shot", &SnrParams::k_shot);

    m.def("spad_response", &spad_response, py::arg("n"), py::arg("params"));
    m.def("spad_response_inverse", &spad_response_inverse, py::arg("flux"), py::arg("params"));
    m.def("matched_r_bar", &matched_r_bar, py::arg("params"), py::arg("n_bins"));

    m.def(
        "nedi_forward",
        [](double n_f, const std::vector<std::pair<double, int>>& segments, double T, const SensorParams& p) {
            const auto s = segments_from(segments);
            return nedi_forward(n_f, s, T, p);
        },
        py::arg("n_f"), py::arg("segments"), py::arg("T"), py::arg("params"),
        "Blur-averaged flux for latent count n_f; segments are (length, E) pairs.");
    m.def(
        "edi_pixel",
        [](double blur, const std::vector<std::pair<double, int>>& segments, double T, const SensorParams& p) {
            const auto s = segments_from(segments);
            return edi_pixel(blur, s, T, p);
        },
        py::arg("blur"), py::arg("segments"), py::arg("T"), py::arg("params"));
    m.def(
        "nedi_pixel",
        [](double blur, const std::vector<std::pair<double, int>>& segments, double T, const SensorParams& p) {
            const auto s = segments_from(segments);
            return nedi_pixel(blur, s, T, p).n_f;
        },
        py::arg("blur"), py::arg("segments"), py::arg("T"), py::arg("params"));

    m.def("snr_camera", &snr_camera, py::arg("flux"), py::arg("params") = SnrParams{});
    m.def(
        "snr_spad", [](double flux, const SnrParams& p) { return snr_spad(flux, p).db; }, py::arg("flux"),
        py::arg("params") = SnrParams{});
    m.def("snr_event", &snr_event, py::arg("flux"), py::arg("delta_phi"), py::arg("params") = SnrParams{});
    m.def("reference_grid", &reference_grid);

    m.def(
        "psnr", [](py::array_t<double> a, py::array_t<double> b, double peak) { return psnr(from_array(a), from_array(b), peak); },
        py::arg("reconstruction"), py::arg("ground_truth"), py::arg("peak"));
    m.def("bits_per_sample", [](const std::string& kind) {
        for (StreamKind k : {StreamKind::Events, StreamKind::SpadBinary, StreamKind::SpadAggregate, StreamKind::Conventional}) {
            if (to_string(k) == kind) return bits_per_sample(k);
        }
        throw ConfigError("unknown stream kind: " + kind);
    });
    m.def(
        "office_scene", [](int w, int h, unsigned long long seed) { return to_array(make_office_scene(w, h, seed)); },
        py::arg("width"), py::arg("height"), py::arg("seed"));

    m.def("_default_config", [] { return to_json(RunConfig{}).dump(); });
    m.def("_config_hash", [](const std::string& c) { return config_hash(config_from(c)); });
    m.def("_run_simulate", [](const std::string& c) { return run_simulate(config_from(c)).dump(); });
    m.def("_run_deblur", [](const std::string& c) { return run_deblur(config_from(c)).dump(); });
    m.def("_run_fuse", [](const std::string& c) { return run_fuse(config_from(c)).dump(); });
    m.def("_run_eval", [](const std::string& c) { return run_eval(config_from(c)).dump(); });
    m.def("_run_mtf", [](const std::string& c) { return run_mtf(config_from(c)).dump(); });
    m.def("_run_snr", [](const std::string& c, const std::string& ref) { return run_snr(config_from(c), ref).dump(); });
    m.def("_run_e2e", &e2e_json, py::call_guard<py::gil_scoped_release>());
}
