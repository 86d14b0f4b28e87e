#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "spadfuse/deblur.hpp"
#include "spadfuse/errors.hpp"
#include "spadfuse/rng.hpp"

using namespace spadfuse;

namespace {

constexpr double kT = 2.56e-3;
constexpr double kF = 1.0;  // window anchor

EventStream pixel_stream(std::vector<Event> events) {
    return EventStream{1, 1, 0.0, 2.0, std::move(events)};
}

std::vector<Event> random_events(std::uint64_t seed, int n) {
    std::vector<Event> ev;
    for (int k = 0; k < n; ++k) {
        const double t = kF - 0.5 * kT + kT * rng::uniform(seed, 0, k);
        ev.push_back(Event{t, 0, 0, static_cast<std::int8_t>(rng::uniform(seed, 1, k) < 0.5 ? -1 : 1)});
    }
    std::sort(ev.begin(), ev.end(), event_before);
    return ev;
}

}  // namespace

TEST(Edi, NoEventsIsIdentity) {
    const SensorParams p;
    const PixelEventIndex idx(pixel_stream({}));
    const auto seg = exposure_segments(idx, 0, kF, kT);
    ASSERT_EQ(seg.size(), 1u);
    EXPECT_NEAR(edi_integral(seg, p.c), kT, 4.0 * std::numeric_limits<double>::epsilon() * kF);  // endpoint cancellation
    const double blur = 3.3e5;
    EXPECT_NEAR(spad_response(edi_pixel(blur, seg, kT, p), p), blur, 1e-9 * blur);
}

TEST(Edi, SingleEventHalfway) {
    SensorParams p;
    p.c = std::numbers::ln2;
    const std::vector<ExposureSegment> seg{{0.5 * kT, 0}, {0.5 * kT, 1}};
    EXPECT_NEAR(edi_integral(seg, p.c), 1.5 * kT, 1e-15);
    const double blur = 6e5;
    EXPECT_NEAR(spad_response(edi_pixel(blur, seg, kT, p), p), blur / 1.5, 1e-6);

    // the same split built from an event just after the anchor
    const PixelEventIndex idx(pixel_stream({Event{kF + 1e-12, 0, 0, 1}}));
    EXPECT_NEAR(edi_integral(exposure_segments(idx, 0, kF, kT), p.c), 1.5 * kT - 1e-12, 1e-12 * kT);
}

TEST(Edi, SegmentsMatchRiemannSum) {
    const SensorParams p;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const EventStream s = pixel_stream(random_events(seed, 12));
        const PixelEventIndex idx(s);
        const double exact = edi_integral(exposure_segments(idx, 0, kF, kT), p.c);
        const int n = 100000;
        const double h = kT / n;
        double sum = 0.0;
        for (int k = 0; k < n; ++k) {
            const double t = kF - 0.5 * kT + (k + 0.5) * h;
            sum += std::exp(p.c * integrate_events(s, 0, 0, kF, t)) * h;
        }
        // midpoint rule on a step function: each jump costs at most h/2 times its height
        double bound = 0.0;
        for (const Event& e : s.events) {
            const double before = std::exp(p.c * integrate_events(s, 0, 0, kF, e.t - 1e-15));
            bound += 0.5 * h * before * std::abs(std::exp(p.c * e.polarity) - 1.0);
        }
        EXPECT_NEAR(sum, exact, bound + 1e-12 * exact) << "seed " << seed;
    }
}

TEST(NediForward, Examples) {
    const SensorParams p;
    const PixelEventIndex none(pixel_stream({}));
    EXPECT_EQ(nedi_forward(0.0, none, 0, kF, kT, p), 0.0);
    for (double n : {0.01, 1.0, 50.0, 400.0}) {
        EXPECT_NEAR(nedi_forward(n, none, 0, kF, kT, p), spad_response(n, p), 1e-9 * spad_response(n, p));
    }
}

TEST(NediForward, IncreasingAndBounded) {
    const SensorParams p;
    const PixelEventIndex idx(pixel_stream(random_events(9, 8)));
    const auto seg = exposure_segments(idx, 0, kF, kT);
    double prev = 0.0;
    for (double n = 1e-3; n < 1e9; n *= 3.0) {
        const double b = nedi_forward(n, seg, kT, p);
        EXPECT_GT(b, prev);
        EXPECT_LT(b, 1.0 / p.tau);
        prev = b;
    }
}

TEST(Nedi, NoEventsInvertsResponse) {
    const SensorParams p;
    const std::vector<ExposureSegment> seg{{kT, 0}};
    for (double blur : {1e3, 1e5, 6e6}) {
        EXPECT_NEAR(nedi_pixel(blur, seg, kT, p).n_f, spad_response_inverse(blur, p),
                    1e-9 * spad_response_inverse(blur, p));
    }
}

TEST(Nedi, RoundTripRecoversLatent) {
    const SensorParams p;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const PixelEventIndex idx(pixel_stream(random_events(seed, 1 + static_cast<int>(seed % 6))));
        const auto seg = exposure_segments(idx, 0, kF, kT);
        const double n_true = std::exp(std::log(1e-3) + 11.0 * rng::uniform(seed, 7, 0));
        const double blur = nedi_forward(n_true, seg, kT, p);
        const PixelSolve s = nedi_pixel(blur, seg, kT, p);
        EXPECT_FALSE(s.saturated);
        // the residual tolerance maps to at most ~tol / slope in n
        EXPECT_NEAR(s.n_f, n_true, 1e-4 * n_true) << "seed " << seed;
        EXPECT_NEAR(nedi_forward(s.n_f, seg, kT, p), blur, 1e-6 * std::max(blur, 1e-3 / p.tau));
    }
}

TEST(Nedi, AgreesWithEdiAtLowFlux) {
    const SensorParams p;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const PixelEventIndex idx(pixel_stream(random_events(seed, 5)));
        const auto seg = exposure_segments(idx, 0, kF, kT);
        const double n_true = 1e-2;  // tau n exp(cE) << q T_bin
        const double blur = nedi_forward(n_true, seg, kT, p);
        const double edi = edi_pixel(blur, seg, kT, p);
        const double nedi = nedi_pixel(blur, seg, kT, p).n_f;
        EXPECT_NEAR(edi, nedi, 0.01 * nedi);
    }
}

TEST(Nedi, SaturatedPixelIsFlagged) {
    const SensorParams p;
    const std::vector<ExposureSegment> seg{{kT, 0}};
    const PixelSolve s = nedi_pixel(1.0 / p.tau, seg, kT, p);
    EXPECT_TRUE(s.saturated);
    EXPECT_TRUE(std::isfinite(s.n_f));
}

TEST(Nedi, ImageSolveAndShapeCheck) {
    const SensorParams p;
    EventStream s{3, 2, 0.0, 2.0, {}};
    s.events.push_back(Event{kF + 1e-4, 1, 0, 1});
    s.events.push_back(Event{kF + 2e-4, 2, 1, -1});
    const PixelEventIndex idx(s);
    BlurObservation obs{kF, kT, Image(3, 2)};
    Image truth(3, 2);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        truth[i] = 5.0 + 20.0 * i;
        obs.blur[i] = nedi_forward(truth[i], idx, i, kF, kT, p);
    }
    const LatentImage lat = nedi_deblur(obs, idx, p);
    EXPECT_EQ(lat.method, DeblurMethod::NEDI);
    for (std::size_t i = 0; i < truth.size(); ++i) EXPECT_NEAR(lat.n_latent[i], truth[i], 1e-4 * truth[i]);

    const BlurObservation wrong{kF, kT, Image(2, 2)};
    EXPECT_THROW(nedi_deblur(wrong, idx, p), DataError);
}

TEST(LatentAt, PropagatesWithEvents) {
    const PixelEventIndex idx(pixel_stream({Event{kF + 1e-4, 0, 0, 1}}));
    LatentImage lat;
    lat.f = kF;
    lat.T = kT;
    lat.n_latent = Image(1, 1, 7.0);
    EXPECT_DOUBLE_EQ(latent_at(lat, idx, kF, 0.3)[0], 7.0);
    EXPECT_NEAR(latent_at(lat, idx, kF + 5e-4, 0.3)[0], 7.0 * std::exp(0.3), 1e-12);
    EXPECT_NEAR(latent_at(lat, idx, kF - 5e-4, 0.3)[0], 7.0, 1e-12);
}
