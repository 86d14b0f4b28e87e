#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spadfuse/grid.hpp"
#include "spadfuse/params.hpp"
#include "spadfuse/scene.hpp"

namespace spadfuse {

/// One gate of the SPAD: bits(x, y) == 1 iff a photon was detected in
/// [t_start, t_start + T_bin).
struct SpadBinaryFrame {
    double t_start = 0.0;
    Grid<std::uint8_t> bits;
};

/// Per-pixel detection counts summed over n_bins consecutive binary frames.
struct SpadAggregateFrame {
    double t_center = 0.0;  ///< window midpoint
    double T = 0.0;         ///< n_bins * T_bin
    int n_bins = 0;
    Grid<std::uint16_t> counts;

    double t_begin() const noexcept { return t_center - 0.5 * T; }
    double t_end() const noexcept { return t_center + 0.5 * T; }
};

/// Dead-time SPAD response: flux estimate from N detections per binary frame,
///     phi = N / (q T_bin + tau N).
/// N may be fractional (a mean over several frames).
double spad_response(double n, const SensorParams& params);

/// Algebraic inverse of spad_response: N = q T_bin phi / (1 - tau phi).
/// Throws SaturationError when phi * tau >= 1.
double spad_response_inverse(double flux, const SensorParams& params);

/// Flux estimate of an aggregate pixel holding `counts` detections over
/// `n_bins` frames, i.e. spad_response(counts / n_bins).
double aggregate_flux(double counts, int n_bins, const SensorParams& params);

/// Probability that a single gate records a detection at flux phi.
double detection_probability(double flux, const SensorParams& params);

/// Simulates every binary frame whose gate starts in [t0, t1 - T_bin].
/// Detection at pixel i in gate k is Bernoulli(1 - exp(-(q phi + phi_dark) T_bin))
/// with phi sampled at the gate midpoint. Draws are keyed by (seed, pixel,
/// global gate index round(t_start / T_bin)), so splitting [t0, t1) into
/// pieces reproduces the single-call output.
std::vector<SpadBinaryFrame> simulate_binary_frames(const SceneClip& clip, const SensorParams& params,
                                                    double t0, double t1, std::uint64_t seed);

/// Sums the first n_bins frames. Throws UnderflowError when fewer are given.
SpadAggregateFrame aggregate(std::span<const SpadBinaryFrame> frames, int n_bins, const SensorParams& params);

/// Splits frames into consecutive windows of n_bins; a trailing partial
/// window is dropped.
std::vector<SpadAggregateFrame> aggregate_all(std::span<const SpadBinaryFrame> frames, int n_bins,
                                              const SensorParams& params);

/// Flux estimate image of an aggregate frame.
Image aggregate_flux_image(const SpadAggregateFrame& frame, const SensorParams& params);

/// SPAD measurement variance in log-intensity units: R = R_bar / (phi + N_0).
double measurement_covariance(double flux, const SensorParams& params);

}  // namespace spadfuse
