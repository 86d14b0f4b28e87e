#pragma once

#include <limits>
#include <string>
#include <vector>

#include "spadfuse/deblur.hpp"
#include "spadfuse/events.hpp"
#include "spadfuse/grid.hpp"
#include "spadfuse/params.hpp"
#include "spadfuse/spad.hpp"

namespace spadfuse {

/// Per-pixel filter state. n_hat is a natural-log flux (log photons/sec).
struct PixelFilterState {
    double n_hat = 0.0;
    double p = 1.0;
    double t_last = 0.0;  ///< time of the last covariance propagation
    double t_last_event = -std::numeric_limits<double>::infinity();
    double flux_est = 0.0;
    double r_last = std::numeric_limits<double>::infinity();  ///< last measurement variance
};

/// How the covariance evolves between measurements.
enum class CovarianceMode {
    /// p grows by the event process noise; information enters only at frames.
    Discrete,
    /// Also folds in measurement information continuously:
    /// p <- 1 / (1/p + dt / r_last) + Q.
    ContinuousInformation,
};

struct FusionConfig {
    double publish_rate = 1000.0;  ///< Hz
    bool adaptive = false;
    double u_threshold = 0.0;      ///< capture when sum of variances exceeds this
    int n_bins_per_frame = 256;
    double tol = 1e-6;             ///< NEDI tolerance
    double p0 = 1.0;               ///< initial variance, log^2
    CovarianceMode covariance_mode = CovarianceMode::Discrete;
    DeblurMethod deblur = DeblurMethod::NEDI;
    bool record_measurements = false;

    /// Throws ConfigError on invalid values.
    void validate() const;
};

struct ReconstructedFrame {
    double t = 0.0;
    Image log_intensity;
    Image variance;
};

/// Fresh state before any measurement: n_hat = log(kLogFloor).
PixelFilterState initial_state(double t0, double p0);

/// Grows p by the time-proportional process noise up to t.
PixelFilterState propagate(const PixelFilterState& state, double t, const SensorParams& params,
                           CovarianceMode mode = CovarianceMode::Discrete);

/// Event prediction: n_hat += c * polarity and p grows by the event noise.
/// The refractory term is keyed to the previous event of the pixel.
/// Throws OrderingError when event.t < state.t_last.
PixelFilterState event_update(const PixelFilterState& state, const Event& event, const SensorParams& params,
                              CovarianceMode mode = CovarianceMode::Discrete);

/// Discrete Kalman correction with gain p / (p + r). A non-finite measurement
/// leaves the state unchanged and sets *skipped.
PixelFilterState frame_update(const PixelFilterState& state, double measurement, double r, double t,
                              bool* skipped = nullptr);

/// First measurement of a pixel: n_hat takes the measurement and p takes r.
PixelFilterState initialize_from_measurement(const PixelFilterState& state, double measurement, double r, double t,
                                             bool* skipped = nullptr);

/// Sum of per-pixel variances.
double uncertainty(std::span<const PixelFilterState> states);

bool adaptive_trigger(double u, const FusionConfig& config);

/// Grid of pixel filters driven by events and measurement frames in time order.
class AsyncKalmanFilter {
public:
    AsyncKalmanFilter(int width, int height, const SensorParams& params, CovarianceMode mode, double t0,
                      double p0);

    void process_event(const Event& event);
    /// Propagates every pixel to t, then applies the correction. Returns the
    /// number of pixels skipped for non-finite measurements.
    std::size_t apply_measurement(double t, const Image& log_measurement, const Image& r);
    void propagate_all(double t);
    ReconstructedFrame snapshot(double t) const;

    double uncertainty() const;
    const std::vector<PixelFilterState>& states() const noexcept { return states_; }
    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

private:
    int width_;
    int height_;
    SensorParams params_;
    CovarianceMode mode_;
    std::vector<PixelFilterState> states_;
};

/// Measurement handed to the filter for one captured SPAD window.
struct MeasurementFrame {
    double t = 0.0;
    Image log_intensity;
    Image variance;
};

struct TriggerRecord {
    int window = 0;
    double t_start = 0.0;
    double u = 0.0;  ///< uncertainty seen by the controller at decision time
    bool captured = false;
};

struct FusionResult {
    std::vector<ReconstructedFrame> frames;
    std::vector<TriggerRecord> triggers;
    std::vector<MeasurementFrame> measurements;  ///< filled when record_measurements
    int frames_used = 0;
    std::size_t skipped_pixels = 0;
    std::size_t saturated_pixels = 0;
    std::vector<std::string> warnings;
};

/// Converts latent counts at time t into a filter measurement: log flux via
/// spad_response (floored at kLogFloor) and variance via measurement_covariance.
MeasurementFrame measurement_from_latent(const Image& counts, double t, const SensorParams& params);

/// Event/SPAD fusion. Events are consumed in time order; each captured
/// aggregate window is deblurred on arrival (window end), propagated to the
/// arrival time with the events, and applied as a Kalman correction. A frame
/// is published every 1 / publish_rate seconds after events.t0. In adaptive
/// mode a window is captured only when the uncertainty at the latest
/// decision point not after its start exceeds u_threshold; the first window
/// is always captured.
FusionResult fuse(const std::vector<SpadAggregateFrame>& spad_frames, const EventStream& events,
                  const SensorParams& params, const FusionConfig& config);

}  // namespace spadfuse
