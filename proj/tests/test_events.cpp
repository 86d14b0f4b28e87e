#include <gtest/gtest.h>

#include <cmath>

#include "spadfuse/errors.hpp"
#include "spadfuse/events.hpp"

using namespace spadfuse;

namespace {

// Two-pixel clip where pixel (1, 0) moves from `lo` to `hi` over the clip
// while pixel (0, 0) stays at `hi`.
SceneClip two_pixel_ramp(double lo, double hi, double duration) {
    Image r(2, 1);
    r(0, 0) = hi;
    r(1, 0) = lo;
    return SceneClip{r, Trajectory::linear_pan(duration, 1.0 / duration, 0.0), 1.0, duration};
}

EventStream stream_of(std::vector<Event> events, double t1 = 1.0) {
    return EventStream{4, 4, 0.0, t1, std::move(events)};
}

}  // namespace

TEST(EventSim, StaticClipHasNoEvents) {
    const SceneClip clip{Image(8, 8, 2.0), Trajectory::identity(0.01), 1e5, 0.01};
    EXPECT_TRUE(simulate_events(clip, SensorParams{}, 1).events.empty());
}

TEST(EventSim, DetectorStepGivesThreeEvents) {
    ChangeDetector d(0.3, 0.0);
    d.reset(0.0);
    std::vector<int> pol;
    d.advance(0.0, 0.0, 1.0, 0.9, [&](double, int p) { pol.push_back(p); });
    EXPECT_EQ(pol, (std::vector<int>{1, 1, 1}));
}

TEST(EventSim, FluxStepGivesThreeEvents) {
    SensorParams p;
    p.sigma_theta = 0.0;
    p.rho = 0.0;
    const double phi = 1e6;
    const EventStream s = simulate_events(two_pixel_ramp(phi, phi * std::exp(0.9), 1e-3), p, 3);
    ASSERT_EQ(s.events.size(), 3u);
    for (const Event& e : s.events) {
        EXPECT_EQ(e.x, 1);
        EXPECT_EQ(e.polarity, 1);
    }
}

TEST(EventSim, RefractoryRampMatchesDenseReference) {
    SensorParams p;
    p.sigma_theta = 0.0;
    p.rho = 1e-6;
    const double duration = 3e-6;
    const double lo = 1e5;
    const double hi = lo * std::exp(3.0);  // ten thresholds
    EventSimOptions opt;
    opt.step = 1e-8;
    const EventStream s = simulate_events(two_pixel_ramp(lo, hi, duration), p, 5, opt);

    // dense reference at a ten times finer step
    const double h = opt.step / 10.0;
    double ref = std::log(lo + kLogFloor);
    double last = -1.0;
    int count = 0;
    for (long k = 0; k * h <= duration; ++k) {
        const double t = k * h;
        const double flux = lo + (hi - lo) * (t / duration);
        const double l = std::log(flux + kLogFloor);
        if (l - ref >= p.c && (last < 0.0 || t >= last + p.rho)) {
            ref += p.c;
            last = t;
            ++count;
        }
    }
    EXPECT_LT(static_cast<int>(s.events.size()), 10);
    EXPECT_EQ(static_cast<int>(s.events.size()), count);
    for (std::size_t i = 1; i < s.events.size(); ++i) {
        EXPECT_GE(s.events[i].t - s.events[i - 1].t, p.rho - 1e-15);
    }
}

TEST(EventSim, Deterministic) {
    const SceneClip clip{Image(16, 16, 1.0), Trajectory::linear_pan(0.01, 300.0, 100.0), 1e4, 0.01};
    SceneClip textured = clip;
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) textured.radiance(x, y) = 1.0 + ((x / 3 + y / 4) % 2) * 3.0;
    }
    const EventStream a = simulate_events(textured, SensorParams{}, 42);
    const EventStream b = simulate_events(textured, SensorParams{}, 42);
    ASSERT_FALSE(a.events.empty());
    EXPECT_EQ(a.events, b.events);
    EXPECT_NO_THROW(a.validate());
}

TEST(EventSim, ThresholdsAreFloored) {
    SensorParams p;
    p.c = 0.0;
    p.sigma_theta = 0.0;
    for (double c : pixel_thresholds(4, 4, p, 1)) EXPECT_GE(c, ChangeDetector::kMinThreshold);
}

TEST(EventNoise, Examples) {
    const SensorParams p;
    const Event e{1.0, 0, 0, 1};
    const NoiseBreakdown zero = event_noise(e, 1.0, 1e4, p);
    EXPECT_EQ(zero.q_shot, 0.0);
    EXPECT_EQ(zero.q_isol, 0.0);
    EXPECT_EQ(zero.q_ref, p.rho_ref);
    EXPECT_EQ(zero.q_thresh, p.sigma_theta * p.sigma_theta);

    EXPECT_EQ(event_noise(e, 1.0 - 2.0 * p.rho, 1e4, p).q_ref, 0.0);
    EXPECT_THROW(event_noise(e, 1.5, 1e4, p), OrderingError);
}

TEST(EventNoise, ShotTermVanishesAtHighFlux) {
    const SensorParams p;
    const Event e{1.0, 0, 0, 1};
    double prev = 1e300;
    for (double flux = 1.0; flux < 1e15; flux *= 10.0) {
        const NoiseBreakdown q = event_noise(e, 0.5, flux, p);
        EXPECT_LT(q.q_shot, prev);
        EXPECT_DOUBLE_EQ(q.q_isol, p.sigma_iso * p.sigma_iso * 0.5);
        prev = q.q_shot;
    }
    EXPECT_LT(prev, 1e-9);
}

TEST(EventNoise, DriftMatchesTimeTerms) {
    const SensorParams p;
    const Event e{0.3, 0, 0, -1};
    const NoiseBreakdown q = event_noise(e, 0.1, 5e3, p);
    EXPECT_NEAR(drift_noise(0.2, 5e3, p), q.q_shot + q.q_isol, 1e-15);
}

TEST(Integrate, Examples) {
    const EventStream s = stream_of({{0.1, 1, 2, 1}, {0.2, 1, 2, 1}, {0.3, 1, 2, -1}, {0.4, 1, 2, 1}, {0.5, 3, 3, 1}});
    EXPECT_EQ(integrate_events(s, 1, 2, 0.45, 0.45), 0);
    EXPECT_EQ(integrate_events(s, 1, 2, 0.6, 0.9), 0);
    EXPECT_EQ(integrate_events(s, 1, 2, 0.0, 0.45), 2);
    EXPECT_EQ(integrate_events(s, 1, 2, 0.45, 0.0), -2);
    // half-open (t_a, t_b]
    EXPECT_EQ(integrate_events(s, 1, 2, 0.1, 0.2), 1);
}

TEST(Integrate, IndexMatchesScanAndIsAdditive) {
    std::vector<Event> ev;
    for (int k = 0; k < 200; ++k) {
        ev.push_back(Event{k * 0.004, static_cast<std::uint16_t>(k % 4), static_cast<std::uint16_t>((k / 4) % 4),
                           static_cast<std::int8_t>((k * 7) % 3 == 0 ? -1 : 1)});
    }
    const EventStream s = stream_of(ev);
    const PixelEventIndex idx(s);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * 4 + x;
            for (double a : {0.0, 0.13, 0.4}) {
                for (double b : {0.2, 0.55, 0.8}) {
                    EXPECT_EQ(idx.integrate(i, a, b), integrate_events(s, x, y, a, b));
                    EXPECT_EQ(integrate_events(s, x, y, a, 0.5) + integrate_events(s, x, y, 0.5, b),
                              integrate_events(s, x, y, a, b));
                }
            }
        }
    }
}

TEST(EventStreamValidate, RejectsBadStreams) {
    EXPECT_THROW(stream_of({{0.2, 0, 0, 1}, {0.1, 0, 0, 1}}).validate(), DataError);
    EXPECT_THROW(stream_of({{0.2, 9, 0, 1}}).validate(), DataError);
    EXPECT_THROW(stream_of({{1.5, 0, 0, 1}}).validate(), DataError);
}
