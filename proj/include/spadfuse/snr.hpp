#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spadfuse/params.hpp"

namespace spadfuse {

/// Event trigger-probability model.
enum class EventPeModel {
    /// P_e = 0 below the contrast threshold, 1 - exp(-(dphi - C) / sigma_theta * scale) above.
    Hard,
    /// Threshold crossing of the log change ln(1 + dphi) under shot noise
    /// with std sqrt(k_shot / phi): P_e = Phi_N((ln(1 + dphi) - C) / sqrt(k_shot / phi)).
    Stochastic,
};

/// Constants of the analytic SNR curves. Defaults are calibrated against the
/// reference curves in data/snr_reference.csv.
struct SnrParams {
    double q = 0.4;
    double phi_dark = 100.0;

    // conventional camera
    double t_exp = 1e-2;
    double sigma_f = 36.0;
    double n_fwc = 4.0e4;

    // SPAD: integration time, detector dead time and readout time constant
    double t_int = 9.8366e-3;
    double tau_d = 3.2270e-7;
    double tau_readout = 2.8745e-12;

    // event camera
    double c = 0.3;
    double sigma_theta = 0.03;
    EventPeModel pe_model = EventPeModel::Stochastic;
    double pe_scale = 1.0;      ///< Hard model slope
    double k_shot = 6.815;      ///< Stochastic model shot-noise constant (photons/sec)
    double noise_a = 215.14;    ///< N(phi) = noise_a / (phi + noise_b) + noise_floor
    double noise_b = 1.0;
    double noise_floor = 9.4168e-3;

    /// Camera and shared fields taken from sensor params; SPAD time constants
    /// keep their calibrated values.
    static SnrParams from_sensor(const SensorParams& sensor);
    /// Every SPAD time constant set to the single dead time tau.
    static SnrParams single_dead_time(const SensorParams& sensor);
};

/// Conventional camera: 10 log10(phi / (q phi T + sigma_f^2)) below the
/// full-well cutoff N_fwc / (q T), -inf at and above it.
double snr_camera(double flux, const SnrParams& p);

/// Flux at which the camera saturates.
double camera_cutoff(const SnrParams& p);

struct SpadSnr {
    double db = 0.0;
    bool domain_ok = true;  ///< false when q^2 phi^2 tau^2 >= 1
};

/// SPAD: -10 log10 of the summed squared relative errors
///   (phi_dark/phi)^2 + (1 + q phi tau_d) / (q phi T) + x^2 / (1 - x^2),  x = q phi tau_readout.
SpadSnr snr_spad(double flux, const SnrParams& p);

/// Trigger probability for a relative change delta_phi at flux phi.
double event_probability(double flux, double delta_phi, const SnrParams& p);

/// Static event noise N(phi).
double event_noise_floor(double flux, const SnrParams& p);

/// Event camera: 10 log10(P_e * (delta_phi / C) / N(phi)); -inf when P_e = 0.
double snr_event(double flux, double delta_phi, const SnrParams& p);

enum class SnrSensor { Camera, Spad, Event };

struct SnrCurveRequest {
    std::vector<double> flux;  ///< strictly increasing, positive
    SnrSensor sensor = SnrSensor::Camera;
    double delta_phi = 1.0;
    SnrParams params;
};

struct SnrCurve {
    std::vector<double> flux;
    std::vector<double> db;           ///< raw, unclipped
    std::vector<bool> domain_ok;
};

/// n log-spaced points from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int n);

/// Flux grid of the reference figure: 47 points, 10 to 2.12e11.
std::vector<double> reference_grid();

SnrCurve snr_curve(const SnrCurveRequest& request);

/// Writes "flux,snr_db" rows. With clip_at_zero the negative values are
/// written as 0 and -inf stays the literal "-inf"; otherwise raw values.
void emit_curve_csv(const SnrCurve& curve, const std::filesystem::path& path, bool clip_at_zero = false);
std::string curve_csv(const SnrCurve& curve, bool clip_at_zero = false);

/// Reference curve data: column name -> (flux, db) rows.
struct ReferenceCurves {
    std::vector<double> flux;
    std::vector<double> camera;
    std::vector<double> spad;
    std::vector<double> event_30;
    std::vector<double> event_100;
};

ReferenceCurves load_reference_curves(const std::filesystem::path& path);

struct CalibrationReport {
    double rmse_camera = 0.0;
    double rmse_spad = 0.0;
    double rmse_event_30 = 0.0;
    double rmse_event_100 = 0.0;
};

/// RMSE (dB) of the zero-clipped model curves against the reference, over
/// grid points where both are finite.
CalibrationReport compare_to_reference(const ReferenceCurves& ref, const SnrParams& params);

}  // namespace spadfuse
