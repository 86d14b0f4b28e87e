#pragma once

namespace spadfuse {

/// Physical constants shared by the SPAD, event and conventional-camera models.
///
/// Times are in seconds, fluxes in photons/sec, log quantities in natural-log
/// units. Defaults describe a SwissSPAD2-like gated SPAD (10 us binary frames)
/// next to a DVS with a 0.3 contrast threshold.
struct SensorParams {
    // SPAD
    double q = 0.4;           ///< quantum efficiency, (0, 1]
    double T_bin = 1e-5;      ///< binary-frame exposure
    double tau = 1e-7;        ///< dead time
    double phi_dark = 100.0;  ///< dark count rate

    // conventional camera
    double n_fwc = 4.0e4;     ///< full-well capacity (electrons)
    double T_exp = 1e-2;      ///< exposure
    double sigma_f = 36.0;    ///< read noise std (electrons)

    // event camera
    double c = 0.3;             ///< nominal contrast threshold
    double sigma_theta = 0.03;  ///< per-pixel threshold mismatch std
    double rho = 1e-6;          ///< refractory period

    // event process-noise model
    double sigma_iso = 0.1;     ///< isolated-pixel noise, log/sqrt(s)
    double sigma_shot = 30.0;   ///< shot-noise numerator, f(phi) = sigma_shot^2 / (phi + phi_0)
    double phi_0 = 1.0e3;
    double rho_ref = 0.01;      ///< refractory-period noise, log^2

    // SPAD measurement covariance R = R_bar / (phi + N_0)
    double R_bar = 1.0e3;
    double N_0 = 1.0e3;

    /// Throws ConfigError when a field violates its domain.
    void validate() const;

    /// Flux at which the dead-time response saturates.
    double saturation_flux() const noexcept { return 1.0 / tau; }
};

/// R_bar that makes R(phi) match the Poisson log-variance 1 / (q * phi * T)
/// of an aggregate spanning n_bins binary frames.
double matched_r_bar(const SensorParams& params, int n_bins);

}  // namespace spadfuse
