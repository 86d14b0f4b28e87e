#include "spadfuse/spad.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "spadfuse/errors.hpp"
#include "spadfuse/rng.hpp"

namespace spadfuse {

double spad_response(double n, const SensorParams& params) {
    if (n <= 0.0) return 0.0;
    if (std::isinf(n)) return 1.0 / params.tau;
    return n / (params.q * params.T_bin + params.tau * n);
}

double spad_response_inverse(double flux, const SensorParams& params) {
    if (flux < 0.0 || std::isnan(flux)) throw DataError("flux must be >= 0");
    if (flux * params.tau >= 1.0) {
        throw SaturationError("flux " + std::to_string(flux) + " at or above the dead-time limit 1/tau");
    }
    return params.q * params.T_bin * flux / (1.0 - params.tau * flux);
}

double aggregate_flux(double counts, int n_bins, const SensorParams& params) {
    if (n_bins < 1) throw DataError("n_bins must be >= 1");
    return spad_response(counts / static_cast<double>(n_bins), params);
}

double detection_probability(double flux, const SensorParams& params) {
    const double rate = params.q * flux + params.phi_dark;
    return -std::expm1(-rate * params.T_bin);
}

std::vector<SpadBinaryFrame> simulate_binary_frames(const SceneClip& clip, const SensorParams& params,
                                                    double t0, double t1, std::uint64_t seed) {
    clip.validate();
    if (!(t1 - t0 >= params.T_bin * (1.0 - 1e-9))) throw DataError("simulation window shorter than one gate");
    const auto n_frames = static_cast<long long>(std::floor((t1 - t0) / params.T_bin + 1e-9));

    std::vector<SpadBinaryFrame> frames;
    frames.reserve(static_cast<std::size_t>(n_frames));
    Image flux;
    const int w = clip.width();
    const int h = clip.height();
    for (long long k = 0; k < n_frames; ++k) {
        const double t_start = t0 + static_cast<double>(k) * params.T_bin;
        const double t_mid = std::min(t_start + 0.5 * params.T_bin, clip.duration);
        render_flux_into(clip, t_mid, flux);
        const auto gate = static_cast<std::uint64_t>(std::llround(t_start / params.T_bin));

        SpadBinaryFrame frame{t_start, Grid<std::uint8_t>(w, h)};
        for (std::size_t i = 0; i < flux.size(); ++i) {
            const double p = detection_probability(flux[i], params);
            frame.bits[i] = rng::uniform(seed, i, gate) < p ? 1 : 0;
        }
        frames.push_back(std::move(frame));
    }
    return frames;
}

SpadAggregateFrame aggregate(std::span<const SpadBinaryFrame> frames, int n_bins, const SensorParams& params) {
    if (n_bins < 1) throw DataError("n_bins must be >= 1");
    if (frames.size() < static_cast<std::size_t>(n_bins)) {
        throw UnderflowError("aggregation needs " + std::to_string(n_bins) + " binary frames, got " +
                             std::to_string(frames.size()));
    }
    if (n_bins > std::numeric_limits<std::uint16_t>::max()) throw DataError("n_bins exceeds 16-bit counts");
    const auto& first = frames.front().bits;
    SpadAggregateFrame out;
    out.n_bins = n_bins;
    out.T = n_bins * params.T_bin;
    out.t_center = frames.front().t_start + 0.5 * out.T;
    out.counts = Grid<std::uint16_t>(first.width(), first.height());
    for (int k = 0; k < n_bins; ++k) {
        const auto& bits = frames[static_cast<std::size_t>(k)].bits;
        if (!bits.same_shape(first)) throw DataError("binary frames differ in shape");
        for (std::size_t i = 0; i < bits.size(); ++i) out.counts[i] = static_cast<std::uint16_t>(out.counts[i] + bits[i]);
    }
    return out;
}

std::vector<SpadAggregateFrame> aggregate_all(std::span<const SpadBinaryFrame> frames, int n_bins,
                                              const SensorParams& params) {
    if (n_bins < 1) throw DataError("n_bins must be >= 1");
    std::vector<SpadAggregateFrame> out;
    const std::size_t n = static_cast<std::size_t>(n_bins);
    for (std::size_t start = 0; start + n <= frames.size(); start += n) {
        out.push_back(aggregate(frames.subspan(start, n), n_bins, params));
    }
    return out;
}

Image aggregate_flux_image(const SpadAggregateFrame& frame, const SensorParams& params) {
    Image out(frame.counts.width(), frame.counts.height());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = aggregate_flux(frame.counts[i], frame.n_bins, params);
    return out;
}

double measurement_covariance(double flux, const SensorParams& params) {
    if (flux < 0.0 || std::isnan(flux)) throw DataError("flux must be >= 0");
    return params.R_bar / (flux + params.N_0);
}

}  // namespace spadfuse
