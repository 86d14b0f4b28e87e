#include "spadfuse/events.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "spadfuse/errors.hpp"
#include "spadfuse/rng.hpp"

namespace spadfuse {

void EventStream::validate() const {
    for (std::size_t i = 0; i < events.size(); ++i) {
        const Event& e = events[i];
        if (e.x >= width || e.y >= height) throw DataError("event outside the sensor");
        if (e.polarity != 1 && e.polarity != -1) throw DataError("event polarity must be +1 or -1");
        if (e.t < t0 || e.t > t1) throw DataError("event timestamp outside the stream span");
        if (i > 0 && event_before(e, events[i - 1])) throw OrderingError("event stream is not sorted");
    }
}

namespace {

double simulation_step(const SensorParams& params, const EventSimOptions& options) {
    if (options.step > 0.0) {
        if (params.rho > 0.0 && options.step > params.rho * (1.0 + 1e-12)) {
            throw DataError("event supersampling step must not exceed the refractory period");
        }
        return options.step;
    }
    double step = params.T_bin / 10.0;
    if (params.rho > 0.0) step = std::min(step, params.rho);
    return step;
}

}  // namespace

std::vector<double> pixel_thresholds(int width, int height, const SensorParams& params, std::uint64_t seed) {
    std::vector<double> out(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    const std::uint64_t s = rng::derive(seed, "threshold");
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::max(params.c + params.sigma_theta * rng::normal(s, i, 0), ChangeDetector::kMinThreshold);
    }
    return out;
}

EventStream simulate_events(const SceneClip& clip, const SensorParams& params, std::uint64_t seed,
                            const EventSimOptions& options) {
    clip.validate();
    if (clip.width() > 65535 || clip.height() > 65535) throw DataError("event coordinates are 16-bit");
    const double step = simulation_step(params, options);
    const int w = clip.width();
    const int h = clip.height();
    const std::size_t n_pixels = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);

    const std::vector<double> thresholds = pixel_thresholds(w, h, params, seed);
    std::vector<ChangeDetector> pixels;
    pixels.reserve(n_pixels);
    for (std::size_t i = 0; i < n_pixels; ++i) pixels.emplace_back(thresholds[i], params.rho);

    Image flux;
    render_flux_into(clip, 0.0, flux);
    std::vector<double> l_prev(n_pixels);
    for (std::size_t i = 0; i < n_pixels; ++i) {
        l_prev[i] = std::log(flux[i] + kLogFloor);
        pixels[i].reset(l_prev[i]);
    }

    std::vector<std::vector<Event>> per_pixel(n_pixels);
    const auto n_steps = static_cast<long long>(std::ceil(clip.duration / step - 1e-9));
    double ta = 0.0;
    for (long long k = 1; k <= n_steps; ++k) {
        const double tb = std::min(static_cast<double>(k) * step, clip.duration);
        render_flux_into(clip, tb, flux);
        for (std::size_t i = 0; i < n_pixels; ++i) {
            const double lb = std::log(flux[i] + kLogFloor);
            const auto x = static_cast<std::uint16_t>(i % static_cast<std::size_t>(w));
            const auto y = static_cast<std::uint16_t>(i / static_cast<std::size_t>(w));
            pixels[i].advance(ta, l_prev[i], tb, lb, [&](double t, int polarity) {
                per_pixel[i].push_back(Event{t, x, y, static_cast<std::int8_t>(polarity)});
            });
            l_prev[i] = lb;
        }
        ta = tb;
    }

    if (options.inject_hot_pixels && options.hot_pixel_rate > 0.0) {
        const std::uint64_t s = rng::derive(seed, "hot_pixel");
        for (std::size_t i = 0; i < n_pixels; ++i) {
            std::vector<Event> hot;
            std::uint64_t counter = 0;
            double t = 0.0;
            while (true) {
                const double u = rng::uniform(s, i, counter++);
                t += -std::log1p(-u) / options.hot_pixel_rate;
                if (t > clip.duration) break;
                const int polarity = rng::uniform(s, i, counter++) < 0.5 ? -1 : 1;
                hot.push_back(Event{t, static_cast<std::uint16_t>(i % static_cast<std::size_t>(w)),
                                    static_cast<std::uint16_t>(i / static_cast<std::size_t>(w)),
                                    static_cast<std::int8_t>(polarity)});
            }
            if (hot.empty()) continue;
            std::vector<Event> merged;
            std::merge(per_pixel[i].begin(), per_pixel[i].end(), hot.begin(), hot.end(), std::back_inserter(merged),
                       event_before);
            per_pixel[i].clear();
            for (const Event& e : merged) {
                if (!per_pixel[i].empty() && e.t - per_pixel[i].back().t < params.rho) continue;
                per_pixel[i].push_back(e);
            }
        }
    }

    EventStream stream;
    stream.width = w;
    stream.height = h;
    stream.t0 = 0.0;
    stream.t1 = clip.duration;
    std::size_t total = 0;
    for (const auto& v : per_pixel) total += v.size();
    stream.events.reserve(total);
    for (auto& v : per_pixel) stream.events.insert(stream.events.end(), v.begin(), v.end());
    std::sort(stream.events.begin(), stream.events.end(), event_before);
    return stream;
}

NoiseBreakdown event_noise(const Event& event, double prev_t, double flux_estimate, const SensorParams& params) {
    if (event.t < prev_t) throw OrderingError("event precedes the previous update");
    if (flux_estimate < 0.0 || std::isnan(flux_estimate)) throw DataError("flux estimate must be >= 0");
    const double dt = event.t - prev_t;
    NoiseBreakdown out;
    out.q_shot = params.sigma_shot * params.sigma_shot / (flux_estimate + params.phi_0) * dt;
    out.q_isol = params.sigma_iso * params.sigma_iso * dt;
    out.q_ref = dt > params.rho ? 0.0 : params.rho_ref;
    out.q_thresh = params.sigma_theta * params.sigma_theta;
    return out;
}

double drift_noise(double dt, double flux_estimate, const SensorParams& params) {
    return (params.sigma_shot * params.sigma_shot / (flux_estimate + params.phi_0) +
            params.sigma_iso * params.sigma_iso) *
           dt;
}

int integrate_events(const EventStream& stream, int x, int y, double t_a, double t_b) {
    if (t_a > t_b) return -integrate_events(stream, x, y, t_b, t_a);
    int sum = 0;
    for (const Event& e : stream.events) {
        if (e.x == x && e.y == y && e.t > t_a && e.t <= t_b) sum += e.polarity;
    }
    return sum;
}

PixelEventIndex::PixelEventIndex(const EventStream& stream) : width_(stream.width), height_(stream.height) {
    const std::size_t n = static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    offsets_.assign(n + 1, 0);
    for (const Event& e : stream.events) ++offsets_[static_cast<std::size_t>(e.y) * width_ + e.x + 1];
    for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] += offsets_[i];
    entries_.resize(stream.events.size());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (const Event& e : stream.events) {
        const std::size_t p = static_cast<std::size_t>(e.y) * width_ + e.x;
        entries_[cursor[p]++] = Entry{e.t, e.polarity};
    }
    // a stream sorted by (t, y, x) is already time-sorted within each pixel
}

std::span<const PixelEventIndex::Entry> PixelEventIndex::pixel(std::size_t index) const {
    return std::span<const Entry>(entries_).subspan(offsets_[index], offsets_[index + 1] - offsets_[index]);
}

std::span<const PixelEventIndex::Entry> PixelEventIndex::pixel(int x, int y) const {
    return pixel(static_cast<std::size_t>(y) * width_ + x);
}

int PixelEventIndex::integrate(std::size_t pixel_index, double t_a, double t_b) const {
    if (t_a > t_b) return -integrate(pixel_index, t_b, t_a);
    const auto events = pixel(pixel_index);
    auto lo = std::upper_bound(events.begin(), events.end(), t_a, [](double t, const Entry& e) { return t < e.t; });
    auto hi = std::upper_bound(events.begin(), events.end(), t_b, [](double t, const Entry& e) { return t < e.t; });
    int sum = 0;
    for (auto it = lo; it != hi; ++it) sum += it->polarity;
    return sum;
}

}  // namespace spadfuse
