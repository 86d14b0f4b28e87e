#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spadfuse/events.hpp"
#include "spadfuse/grid.hpp"
#include "spadfuse/params.hpp"
#include "spadfuse/spad.hpp"

namespace spadfuse {

enum class DeblurMethod { EDI, NEDI };

std::string to_string(DeblurMethod method);

/// Sharp latent image anchored at time f, in detections per binary frame.
struct LatentImage {
    double f = 0.0;
    double T = 0.0;
    DeblurMethod method = DeblurMethod::NEDI;
    double tol = 0.0;
    Image n_latent;
    Grid<std::uint8_t> saturated;  ///< 1 where the blur was at or above 1/tau
};

/// Motion-blurred SPAD measurement: B is the mean response (photons/sec) over
/// the exposure [f - T/2, f + T/2].
struct BlurObservation {
    double f = 0.0;
    double T = 0.0;
    Image blur;
};

/// B = aggregate_flux(counts, n_bins) per pixel, anchored at the window midpoint.
BlurObservation make_observation(const SpadAggregateFrame& frame, const SensorParams& params);

/// Piece of the exposure over which the signed event count E (relative to f)
/// is constant.
struct ExposureSegment {
    double length = 0.0;
    int e = 0;
};

/// Splits [f - T/2, f + T/2] at the pixel's events. E(t) sums polarities in
/// (f, t] for t >= f and is minus the sum over (t, f] for t < f.
std::vector<ExposureSegment> exposure_segments(const PixelEventIndex& events, std::size_t pixel, double f,
                                               double T);

/// Integral of exp(c E(t)) over the exposure.
double edi_integral(std::span<const ExposureSegment> segments, double c);

/// Predicted mean response for latent counts n_f at anchor f:
///   B = (n_f / T) * integral of exp(c E) / (q T_bin + tau n_f exp(c E)) dt.
double nedi_forward(double n_f, std::span<const ExposureSegment> segments, double T, const SensorParams& params);
double nedi_forward(double n_f, const PixelEventIndex& events, std::size_t pixel, double f, double T,
                    const SensorParams& params);

struct NediOptions {
    double tol = 1e-6;              ///< relative residual tolerance
    double b_floor_fraction = 1e-3; ///< B_floor = fraction / tau
    int max_doublings = 64;
    int max_iterations = 200;
};

struct PixelSolve {
    double n_f = 0.0;
    int iterations = 0;
    bool saturated = false;
};

/// Linear-response deblurring: latent flux B T / integral exp(c E), returned
/// as counts through spad_response_inverse (clamped just below saturation).
double edi_pixel(double blur, std::span<const ExposureSegment> segments, double T, const SensorParams& params);

/// Solves nedi_forward(n_f) = blur by bracket doubling from the EDI estimate
/// followed by bisection. Without events the two models coincide and the EDI
/// value is returned as is. Saturated blur (>= 1/tau) returns the EDI value
/// with saturated = true. Throws SolverError when no bracket is found or the
/// iteration budget runs out.
PixelSolve nedi_pixel(double blur, std::span<const ExposureSegment> segments, double T, const SensorParams& params,
                      const NediOptions& options = {});

LatentImage edi_deblur(const BlurObservation& obs, const PixelEventIndex& events, const SensorParams& params);
LatentImage nedi_deblur(const BlurObservation& obs, const PixelEventIndex& events, const SensorParams& params,
                        const NediOptions& options = {});

/// Propagates the latent counts to time t: N(t) = N(f) exp(c E(f, t)).
Image latent_at(const LatentImage& latent, const PixelEventIndex& events, double t, double c);

}  // namespace spadfuse
