#include "spadfuse/snr.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "spadfuse/errors.hpp"

namespace spadfuse {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

SnrParams SnrParams::from_sensor(const SensorParams& sensor) {
    SnrParams p;
    p.q = sensor.q;
    p.phi_dark = sensor.phi_dark;
    p.t_exp = sensor.T_exp;
    p.sigma_f = sensor.sigma_f;
    p.n_fwc = sensor.n_fwc;
    p.c = sensor.c;
    p.sigma_theta = sensor.sigma_theta;
    return p;
}

SnrParams SnrParams::single_dead_time(const SensorParams& sensor) {
    SnrParams p = from_sensor(sensor);
    p.tau_d = sensor.tau;
    p.tau_readout = sensor.tau;
    return p;
}

double camera_cutoff(const SnrParams& p) { return p.n_fwc / (p.q * p.t_exp); }

double snr_camera(double flux, const SnrParams& p) {
    if (flux >= camera_cutoff(p)) return kNegInf;
    return 10.0 * std::log10(flux / (p.q * flux * p.t_exp + p.sigma_f * p.sigma_f));
}

SpadSnr snr_spad(double flux, const SnrParams& p) {
    const double x = p.q * flux * p.tau_readout;
    if (x * x >= 1.0) return SpadSnr{kNegInf, false};
    const double bias = p.phi_dark / flux;
    const double shot = (1.0 + p.q * flux * p.tau_d) / (p.q * flux * p.t_int);
    const double saturation = x * x / (1.0 - x * x);
    return SpadSnr{-10.0 * std::log10(bias * bias + shot + saturation), true};
}

double event_probability(double flux, double delta_phi, const SnrParams& p) {
    switch (p.pe_model) {
        case EventPeModel::Hard:
            if (delta_phi < p.c) return 0.0;
            return -std::expm1(-(delta_phi - p.c) / p.sigma_theta * p.pe_scale);
        case EventPeModel::Stochastic: {
            const double sigma = std::sqrt(p.k_shot / flux);
            const double z = (std::log1p(delta_phi) - p.c) / sigma;
            return 0.5 * std::erfc(-z / std::sqrt(2.0));
        }
    }
    return 0.0;
}

double event_noise_floor(double flux, const SnrParams& p) { return p.noise_a / (flux + p.noise_b) + p.noise_floor; }

double snr_event(double flux, double delta_phi, const SnrParams& p) {
    const double pe = event_probability(flux, delta_phi, p);
    if (pe <= 0.0) return kNegInf;
    return 10.0 * std::log10(pe * (delta_phi / p.c) / event_noise_floor(flux, p));
}

std::vector<double> log_grid(double lo, double hi, int n) {
    if (!(lo > 0.0) || !(hi > lo) || n < 2) throw DataError("log grid needs 0 < lo < hi and n >= 2");
    std::vector<double> g(static_cast<std::size_t>(n));
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (n - 1));
    return g;
}

std::vector<double> reference_grid() { return log_grid(10.0, 212095088792.01926, 47); }

SnrCurve snr_curve(const SnrCurveRequest& request) {
    for (std::size_t i = 0; i < request.flux.size(); ++i) {
        if (!(request.flux[i] > 0.0)) throw DataError("flux grid must be positive");
        if (i > 0 && !(request.flux[i] > request.flux[i - 1])) throw DataError("flux grid must be increasing");
    }
    if (request.sensor == SnrSensor::Event && !(request.delta_phi > 0.0)) throw DataError("delta_phi must be > 0");
    SnrCurve curve;
    curve.flux = request.flux;
    for (double phi : request.flux) {
        switch (request.sensor) {
            case SnrSensor::Camera:
                curve.db.push_back(snr_camera(phi, request.params));
                curve.domain_ok.push_back(true);
                break;
            case SnrSensor::Spad: {
                const SpadSnr s = snr_spad(phi, request.params);
                curve.db.push_back(s.db);
                curve.domain_ok.push_back(s.domain_ok);
                break;
            }
            case SnrSensor::Event:
                curve.db.push_back(snr_event(phi, request.delta_phi, request.params));
                curve.domain_ok.push_back(true);
                break;
        }
    }
    return curve;
}

std::string curve_csv(const SnrCurve& curve, bool clip_at_zero) {
    std::ostringstream out;
    out << "flux,snr_db\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < curve.flux.size(); ++i) {
        out << curve.flux[i] << ',';
        const double v = curve.db[i];
        if (std::isinf(v) && v < 0) {
            out << "-inf";
        } else {
            out << (clip_at_zero && v < 0.0 ? 0.0 : v);
        }
        out << '\n';
    }
    return out.str();
}

void emit_curve_csv(const SnrCurve& curve, const std::filesystem::path& path, bool clip_at_zero) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path.string() + " for writing");
    f << curve_csv(curve, clip_at_zero);
    if (!f) throw DataError("failed writing " + path.string());
}

ReferenceCurves load_reference_curves(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open reference curves " + path.string());
    std::string line;
    std::getline(f, line);
    if (line.rfind("flux,event_30,event_100,camera,spad", 0) != 0) throw DataError("unexpected reference header");
    ReferenceCurves ref;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(row, cell, ',')) v.push_back(std::stod(cell));
        if (v.size() != 5) throw DataError("reference row must have 5 columns");
        ref.flux.push_back(v[0]);
        ref.event_30.push_back(v[1]);
        ref.event_100.push_back(v[2]);
        ref.camera.push_back(v[3]);
        ref.spad.push_back(v[4]);
    }
    return ref;
}

namespace {

template <typename F>
double clipped_rmse(const std::vector<double>& flux, const std::vector<double>& ref, F&& model) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < flux.size(); ++i) {
        double m = model(flux[i]);
        if (std::isnan(m)) continue;
        if (m < 0.0) m = 0.0;  // the reference clips at 0 dB, -inf included
        sum += (m - ref[i]) * (m - ref[i]);
        ++n;
    }
    return n > 0 ? std::sqrt(sum / n) : 0.0;
}

}  // namespace

CalibrationReport compare_to_reference(const ReferenceCurves& ref, const SnrParams& params) {
    CalibrationReport r;
    r.rmse_camera = clipped_rmse(ref.flux, ref.camera, [&](double f) { return snr_camera(f, params); });
    r.rmse_spad = clipped_rmse(ref.flux, ref.spad, [&](double f) { return snr_spad(f, params).db; });
    r.rmse_event_30 = clipped_rmse(ref.flux, ref.event_30, [&](double f) { return snr_event(f, 0.3, params); });
    r.rmse_event_100 = clipped_rmse(ref.flux, ref.event_100, [&](double f) { return snr_event(f, 1.0, params); });
    return r;
}

}  // namespace spadfuse
