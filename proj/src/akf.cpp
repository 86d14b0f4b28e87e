#include "spadfuse/akf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spadfuse/errors.hpp"

namespace spadfuse {

void FusionConfig::validate() const {
    if (!(publish_rate > 0.0) || !std::isfinite(publish_rate)) throw ConfigError("publish_rate must be > 0");
    if (!(u_threshold >= 0.0)) throw ConfigError("u_threshold must be >= 0");
    if (n_bins_per_frame < 1 || n_bins_per_frame > 65535) throw ConfigError("n_bins_per_frame must lie in [1, 65535]");
    if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
    if (!(p0 > 0.0) || !std::isfinite(p0)) throw ConfigError("p0 must be > 0");
}

PixelFilterState initial_state(double t0, double p0) {
    PixelFilterState s;
    s.n_hat = std::log(kLogFloor);
    s.p = p0;
    s.t_last = t0;
    s.flux_est = kLogFloor;
    return s;
}

namespace {

double fold_information(double p, double dt, double r_last) {
    if (!std::isfinite(r_last) || dt <= 0.0) return p;
    return 1.0 / (1.0 / p + dt / r_last);
}

}  // namespace

PixelFilterState propagate(const PixelFilterState& state, double t, const SensorParams& params, CovarianceMode mode) {
    if (t < state.t_last) throw OrderingError("propagation target precedes the filter state");
    PixelFilterState out = state;
    const double dt = t - state.t_last;
    if (mode == CovarianceMode::ContinuousInformation) out.p = fold_information(out.p, dt, state.r_last);
    out.p += drift_noise(dt, state.flux_est, params);
    out.t_last = t;
    return out;
}

PixelFilterState event_update(const PixelFilterState& state, const Event& event, const SensorParams& params,
                              CovarianceMode mode) {
    if (event.t < state.t_last) throw OrderingError("event precedes the filter state");
    NoiseBreakdown q = event_noise(event, state.t_last, state.flux_est, params);
    q.q_ref = event.t - state.t_last_event > params.rho ? 0.0 : params.rho_ref;

    PixelFilterState out = state;
    if (mode == CovarianceMode::ContinuousInformation) {
        out.p = fold_information(out.p, event.t - state.t_last, state.r_last);
    }
    out.n_hat += params.c * event.polarity;
    out.p += q.total();
    out.t_last = event.t;
    out.t_last_event = event.t;
    out.flux_est = std::exp(out.n_hat);
    return out;
}

PixelFilterState frame_update(const PixelFilterState& state, double measurement, double r, double t, bool* skipped) {
    if (skipped != nullptr) *skipped = false;
    if (t < state.t_last) throw OrderingError("measurement precedes the filter state");
    if (!(r > 0.0)) throw DataError("measurement variance must be > 0");
    if (!std::isfinite(measurement)) {
        if (skipped != nullptr) *skipped = true;
        return state;
    }
    PixelFilterState out = state;
    const double gain = std::isinf(r) ? 0.0 : state.p / (state.p + r);
    out.n_hat += gain * (measurement - state.n_hat);
    out.p = (1.0 - gain) * state.p;
    out.t_last = t;
    out.flux_est = std::exp(out.n_hat);
    out.r_last = r;
    return out;
}

PixelFilterState initialize_from_measurement(const PixelFilterState& state, double measurement, double r, double t,
                                             bool* skipped) {
    if (skipped != nullptr) *skipped = false;
    if (t < state.t_last) throw OrderingError("measurement precedes the filter state");
    if (!(r > 0.0)) throw DataError("measurement variance must be > 0");
    if (!std::isfinite(measurement) || std::isinf(r)) {
        if (skipped != nullptr) *skipped = true;
        return state;
    }
    PixelFilterState out = state;
    out.n_hat = measurement;
    out.p = r;
    out.t_last = t;
    out.flux_est = std::exp(measurement);
    out.r_last = r;
    return out;
}

double uncertainty(std::span<const PixelFilterState> states) {
    double u = 0.0;
    for (const auto& s : states) u += s.p;
    return u;
}

bool adaptive_trigger(double u, const FusionConfig& config) { return u > config.u_threshold; }

AsyncKalmanFilter::AsyncKalmanFilter(int width, int height, const SensorParams& params, CovarianceMode mode,
                                     double t0, double p0)
    : width_(width),
      height_(height),
      params_(params),
      mode_(mode),
      states_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), initial_state(t0, p0)) {}

void AsyncKalmanFilter::process_event(const Event& event) {
    if (event.x >= width_ || event.y >= height_) throw DataError("event outside the filter grid");
    auto& s = states_[static_cast<std::size_t>(event.y) * width_ + event.x];
    s = event_update(s, event, params_, mode_);
}

std::size_t AsyncKalmanFilter::apply_measurement(double t, const Image& log_measurement, const Image& r) {
    if (log_measurement.width() != width_ || log_measurement.height() != height_ || !r.same_shape(log_measurement)) {
        throw DataError("measurement shape differs from the filter grid");
    }
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < states_.size(); ++i) {
        bool skip = false;
        const PixelFilterState moved = propagate(states_[i], t, params_, mode_);
        // The first measurement replaces the uninformative prior outright.
        const PixelFilterState corrected = std::isinf(moved.r_last)
                                               ? initialize_from_measurement(moved, log_measurement[i], r[i], t, &skip)
                                               : frame_update(moved, log_measurement[i], r[i], t, &skip);
        states_[i] = corrected;
        if (skip) ++skipped;
    }
    return skipped;
}

void AsyncKalmanFilter::propagate_all(double t) {
    for (auto& s : states_) s = propagate(s, t, params_, mode_);
}

ReconstructedFrame AsyncKalmanFilter::snapshot(double t) const {
    ReconstructedFrame f{t, Image(width_, height_), Image(width_, height_)};
    for (std::size_t i = 0; i < states_.size(); ++i) {
        f.log_intensity[i] = states_[i].n_hat;
        f.variance[i] = states_[i].p;
    }
    return f;
}

double AsyncKalmanFilter::uncertainty() const { return spadfuse::uncertainty(states_); }

MeasurementFrame measurement_from_latent(const Image& counts, double t, const SensorParams& params) {
    MeasurementFrame m{t, Image(counts.width(), counts.height()), Image(counts.width(), counts.height())};
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double flux = spad_response(counts[i], params);
        m.log_intensity[i] = std::log(std::max(flux, kLogFloor));
        m.variance[i] = measurement_covariance(std::isfinite(flux) ? flux : 0.0, params);
    }
    return m;
}

FusionResult fuse(const std::vector<SpadAggregateFrame>& spad_frames, const EventStream& events,
                  const SensorParams& params, const FusionConfig& config) {
    config.validate();
    for (std::size_t i = 1; i < events.events.size(); ++i) {
        if (event_before(events.events[i], events.events[i - 1])) throw OrderingError("event stream is not sorted");
    }
    for (std::size_t k = 1; k < spad_frames.size(); ++k) {
        if (spad_frames[k].t_begin() < spad_frames[k - 1].t_end() - 1e-12) {
            throw OrderingError("SPAD windows overlap or are unsorted");
        }
    }
    for (const auto& f : spad_frames) {
        if (f.counts.width() != events.width || f.counts.height() != events.height) {
            throw DataError("SPAD frame and event stream differ in resolution");
        }
    }

    FusionResult result;
    if (spad_frames.empty()) result.warnings.push_back("no SPAD frames: running events-only");

    const PixelEventIndex index(events);
    AsyncKalmanFilter filter(events.width, events.height, params, config.covariance_mode, events.t0, config.p0);

    const double tick_dt = 1.0 / config.publish_rate;
    const auto n_ticks = static_cast<long long>(std::floor((events.t1 - events.t0) * config.publish_rate + 1e-9));
    long long next_tick = 1;
    auto tick_time = [&](long long k) { return events.t0 + static_cast<double>(k) * tick_dt; };

    double controller_u = filter.uncertainty();
    std::size_t next_event = 0;
    std::size_t next_decision = 0;       // window awaiting a capture decision at its start
    std::vector<std::size_t> in_flight;  // captured windows awaiting arrival, in time order
    std::size_t next_arrival = 0;

    constexpr double kNever = std::numeric_limits<double>::infinity();
    while (true) {
        const double t_event = next_event < events.events.size() ? events.events[next_event].t : kNever;
        const double t_arrival = next_arrival < in_flight.size() ? spad_frames[in_flight[next_arrival]].t_end() : kNever;
        const double t_tick = next_tick <= n_ticks ? tick_time(next_tick) : kNever;
        const double t_decision = next_decision < spad_frames.size() ? spad_frames[next_decision].t_begin() : kNever;
        const double t_next = std::min({t_event, t_arrival, t_tick, t_decision});
        if (t_next == kNever) break;

        // ties: events, then arrivals, then publication, then capture decisions
        if (t_event == t_next) {
            filter.process_event(events.events[next_event++]);
        } else if (t_arrival == t_next) {
            const SpadAggregateFrame& frame = spad_frames[in_flight[next_arrival++]];
            const BlurObservation obs = make_observation(frame, params);
            NediOptions options;
            options.tol = config.tol;
            const LatentImage latent = config.deblur == DeblurMethod::NEDI ? nedi_deblur(obs, index, params, options)
                                                                           : edi_deblur(obs, index, params);
            for (auto s : latent.saturated.values()) result.saturated_pixels += s;
            const double t = frame.t_end();
            MeasurementFrame m = measurement_from_latent(latent_at(latent, index, t, params.c), t, params);
            result.skipped_pixels += filter.apply_measurement(t, m.log_intensity, m.variance);
            ++result.frames_used;
            if (config.record_measurements) result.measurements.push_back(std::move(m));
        } else if (t_tick == t_next) {
            filter.propagate_all(t_tick);
            result.frames.push_back(filter.snapshot(t_tick));
            controller_u = filter.uncertainty();
            ++next_tick;
        } else {
            const std::size_t w = next_decision++;
            const bool capture = !config.adaptive || w == 0 || adaptive_trigger(controller_u, config);
            result.triggers.push_back(TriggerRecord{static_cast<int>(w), spad_frames[w].t_begin(), controller_u, capture});
            if (capture) in_flight.push_back(w);
        }
    }
    return result;
}

}  // namespace spadfuse
