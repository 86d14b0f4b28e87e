#include "spadfuse/deblur.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spadfuse/errors.hpp"

namespace spadfuse {

std::string to_string(DeblurMethod method) { return method == DeblurMethod::EDI ? "EDI" : "NEDI"; }

BlurObservation make_observation(const SpadAggregateFrame& frame, const SensorParams& params) {
    return BlurObservation{frame.t_center, frame.T, aggregate_flux_image(frame, params)};
}

std::vector<ExposureSegment> exposure_segments(const PixelEventIndex& events, std::size_t pixel, double f,
                                               double T) {
    const double a = f - 0.5 * T;
    const double b = f + 0.5 * T;
    const auto list = events.pixel(pixel);
    auto lo = std::upper_bound(list.begin(), list.end(), a,
                               [](double t, const PixelEventIndex::Entry& e) { return t < e.t; });
    auto hi = std::upper_bound(list.begin(), list.end(), b,
                               [](double t, const PixelEventIndex::Entry& e) { return t < e.t; });

    int e = 0;
    for (auto it = lo; it != hi && it->t <= f; ++it) e -= it->polarity;

    std::vector<ExposureSegment> out;
    out.reserve(static_cast<std::size_t>(hi - lo) + 1);
    double t = a;
    for (auto it = lo; it != hi; ++it) {
        if (it->t > t) out.push_back(ExposureSegment{it->t - t, e});
        t = std::max(t, it->t);
        e += it->polarity;
    }
    if (b > t) out.push_back(ExposureSegment{b - t, e});
    return out;
}

double edi_integral(std::span<const ExposureSegment> segments, double c) {
    double sum = 0.0;
    for (const auto& s : segments) sum += s.length * std::exp(c * s.e);
    return sum;
}

double nedi_forward(double n_f, std::span<const ExposureSegment> segments, double T, const SensorParams& params) {
    if (n_f <= 0.0) return 0.0;
    const double qt = params.q * params.T_bin;
    double sum = 0.0;
    for (const auto& s : segments) {
        const double g = std::exp(params.c * s.e);
        sum += s.length * g / (qt + params.tau * n_f * g);
    }
    return n_f / T * sum;
}

double nedi_forward(double n_f, const PixelEventIndex& events, std::size_t pixel, double f, double T,
                    const SensorParams& params) {
    const auto segments = exposure_segments(events, pixel, f, T);
    return nedi_forward(n_f, segments, T, params);
}

namespace {

double clamp_below_saturation(double flux, const SensorParams& params) {
    return std::min(flux, (1.0 - 1e-9) / params.tau);
}

}  // namespace

double edi_pixel(double blur, std::span<const ExposureSegment> segments, double T, const SensorParams& params) {
    if (blur <= 0.0) return 0.0;
    const double flux = blur * T / edi_integral(segments, params.c);
    return spad_response_inverse(clamp_below_saturation(flux, params), params);
}

PixelSolve nedi_pixel(double blur, std::span<const ExposureSegment> segments, double T, const SensorParams& params,
                      const NediOptions& options) {
    PixelSolve out;
    if (!(blur > 0.0)) return out;
    if (blur * params.tau >= 1.0) {
        out.n_f = edi_pixel(blur, segments, T, params);
        out.saturated = true;
        return out;
    }
    if (std::all_of(segments.begin(), segments.end(), [](const ExposureSegment& s) { return s.e == 0; })) {
        // E == 0 across the exposure: both models reduce to inverting spad_response
        out.n_f = edi_pixel(blur, segments, T, params);
        return out;
    }

    const double tolerance = options.tol * std::max(blur, options.b_floor_fraction / params.tau);
    double lo = 0.0;
    double hi = std::max(edi_pixel(blur, segments, T, params), 1e-300);
    int doublings = 0;
    while (nedi_forward(hi, segments, T, params) < blur) {
        if (++doublings > options.max_doublings) {
            throw SolverError("NEDI could not bracket blur value " + std::to_string(blur));
        }
        lo = hi;
        hi *= 2.0;
    }

    for (int it = 1; it <= options.max_iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double residual = nedi_forward(mid, segments, T, params) - blur;
        if (std::abs(residual) <= tolerance) {
            out.n_f = mid;
            out.iterations = it;
            return out;
        }
        if (residual < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    throw SolverError("NEDI bisection did not converge for blur value " + std::to_string(blur));
}

namespace {

LatentImage make_latent(const BlurObservation& obs, DeblurMethod method, double tol) {
    LatentImage out;
    out.f = obs.f;
    out.T = obs.T;
    out.method = method;
    out.tol = tol;
    out.n_latent = Image(obs.blur.width(), obs.blur.height());
    out.saturated = Grid<std::uint8_t>(obs.blur.width(), obs.blur.height());
    return out;
}

void check_observation(const BlurObservation& obs, const PixelEventIndex& events) {
    if (!(obs.T > 0.0)) throw DataError("blur observation needs a positive exposure");
    if (obs.blur.width() != events.width() || obs.blur.height() != events.height()) {
        throw DataError("blur observation and event stream differ in resolution");
    }
}

}  // namespace

LatentImage edi_deblur(const BlurObservation& obs, const PixelEventIndex& events, const SensorParams& params) {
    check_observation(obs, events);
    LatentImage out = make_latent(obs, DeblurMethod::EDI, 0.0);
    for (std::size_t i = 0; i < obs.blur.size(); ++i) {
        const auto segments = exposure_segments(events, i, obs.f, obs.T);
        out.n_latent[i] = edi_pixel(obs.blur[i], segments, obs.T, params);
        out.saturated[i] = obs.blur[i] * params.tau >= 1.0 ? 1 : 0;
    }
    return out;
}

LatentImage nedi_deblur(const BlurObservation& obs, const PixelEventIndex& events, const SensorParams& params,
                        const NediOptions& options) {
    check_observation(obs, events);
    LatentImage out = make_latent(obs, DeblurMethod::NEDI, options.tol);
    for (std::size_t i = 0; i < obs.blur.size(); ++i) {
        const auto segments = exposure_segments(events, i, obs.f, obs.T);
        const PixelSolve s = nedi_pixel(obs.blur[i], segments, obs.T, params, options);
        out.n_latent[i] = s.n_f;
        out.saturated[i] = s.saturated ? 1 : 0;
    }
    return out;
}

Image latent_at(const LatentImage& latent, const PixelEventIndex& events, double t, double c) {
    Image out(latent.n_latent.width(), latent.n_latent.height());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = latent.n_latent[i] * std::exp(c * events.integrate(i, latent.f, t));
    }
    return out;
}

}  // namespace spadfuse
