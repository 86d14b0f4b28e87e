#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spadfuse/params.hpp"
#include "spadfuse/scene.hpp"

namespace spadfuse {

struct Event {
    double t = 0.0;  ///< seconds
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::int8_t polarity = 1;  ///< +1 or -1

    bool operator==(const Event&) const = default;
};

/// Stream order: by time, ties broken by (y, x).
inline bool event_before(const Event& a, const Event& b) noexcept {
    if (a.t != b.t) return a.t < b.t;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
}

struct EventStream {
    int width = 0;
    int height = 0;
    double t0 = 0.0;
    double t1 = 0.0;
    std::vector<Event> events;

    /// Throws DataError when events are unsorted, out of span, or off-sensor.
    void validate() const;
};

/// Variance contributions of one event to the filter covariance.
struct NoiseBreakdown {
    double q_shot = 0.0;
    double q_isol = 0.0;
    double q_ref = 0.0;
    double q_thresh = 0.0;

    double total() const noexcept { return q_shot + q_isol + q_ref + q_thresh; }
};

struct EventSimOptions {
    /// Supersampling step; <= 0 selects min(T_bin / 10, rho) (T_bin / 10 when rho == 0).
    double step = 0.0;
    /// Injects spurious isolated-pixel events at hot_pixel_rate events/sec/pixel.
    bool inject_hot_pixels = false;
    double hot_pixel_rate = 0.0;
};

/// Change detector of one event pixel.
class ChangeDetector {
public:
    static constexpr double kCrossingTolerance = 1e-9;
    static constexpr double kMinThreshold = 1e-3;

    ChangeDetector(double threshold, double rho) : threshold_(threshold < kMinThreshold ? kMinThreshold : threshold), rho_(rho) {}

    void reset(double log_flux) { l_ref_ = log_flux; }
    double reference() const noexcept { return l_ref_; }

    /// Log flux moves linearly from la at ta to lb at tb; emit(t, polarity)
    /// is called for every crossing in order.
    template <typename Emit>
    void advance(double ta, double la, double tb, double lb, Emit&& emit) {
        while (true) {
            const double diff = lb - l_ref_;
            if ((diff < 0.0 ? -diff : diff) < threshold_ - kCrossingTolerance) break;
            const int polarity = diff > 0.0 ? 1 : -1;
            const double target = l_ref_ + polarity * threshold_;
            double s = 0.0;
            if (lb != la) {
                s = (target - la) / (lb - la);
                s = s < 0.0 ? 0.0 : (s > 1.0 ? 1.0 : s);
            }
            double te = ta + s * (tb - ta);
            if (has_fired_ && te < last_t_ + rho_) te = last_t_ + rho_;
            if (te > tb) break;  // still refractory, retry on a later step
            emit(te, polarity);
            l_ref_ = target;
            last_t_ = te;
            has_fired_ = true;
        }
    }

private:
    double threshold_;
    double rho_;
    double l_ref_ = 0.0;
    double last_t_ = 0.0;
    bool has_fired_ = false;
};

/// Log-domain floor added to the flux before taking logarithms.
inline constexpr double kLogFloor = 1e-3;

/// Change-detection event simulator over [0, clip.duration].
///
/// Each pixel keeps a reference log flux; whenever log(phi + kLogFloor)
/// departs from it by the pixel's threshold c_p ~ N(c, sigma_theta^2) an event
/// of that sign fires, the reference moves by one threshold and the pixel is
/// blind for rho seconds. Crossing times are interpolated linearly in log
/// flux inside each supersampling step.
EventStream simulate_events(const SceneClip& clip, const SensorParams& params, std::uint64_t seed,
                            const EventSimOptions& options = {});

/// Per-pixel contrast thresholds drawn by simulate_events for this seed.
std::vector<double> pixel_thresholds(int width, int height, const SensorParams& params, std::uint64_t seed);

/// Per-event process noise. The time-proportional terms use dt = t - prev_t;
/// the refractory term fires when dt <= rho.
/// Throws OrderingError when event.t < prev_t.
NoiseBreakdown event_noise(const Event& event, double prev_t, double flux_estimate, const SensorParams& params);

/// Time-proportional part of the process noise accrued over dt with no event.
double drift_noise(double dt, double flux_estimate, const SensorParams& params);

/// Signed polarity sum of pixel (x, y) over (t_a, t_b]; antisymmetric in the bounds.
int integrate_events(const EventStream& stream, int x, int y, double t_a, double t_b);

/// Events regrouped per pixel for fast interval queries.
class PixelEventIndex {
public:
    struct Entry {
        double t;
        int polarity;
    };

    PixelEventIndex() = default;
    explicit PixelEventIndex(const EventStream& stream);

    std::span<const Entry> pixel(int x, int y) const;
    std::span<const Entry> pixel(std::size_t index) const;

    /// Same contract as integrate_events.
    int integrate(std::size_t pixel_index, double t_a, double t_b) const;

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<Entry> entries_;
};

}  // namespace spadfuse
