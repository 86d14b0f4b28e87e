#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spadfuse/errors.hpp"
#include "spadfuse/metrics.hpp"
#include "spadfuse/rng.hpp"

using namespace spadfuse;

namespace {

// Star of make_siemens_star convolved with a Gaussian, evaluated by dense
// quadrature of the analytic star.
double blurred_star(double x, double y, const StarGeometry& g, double sigma) {
    const double h = 0.25;
    const int n = static_cast<int>(std::ceil(4.0 * sigma / h));
    double sum = 0.0;
    double wsum = 0.0;
    for (int j = -n; j <= n; ++j) {
        for (int i = -n; i <= n; ++i) {
            const double u = i * h;
            const double v = j * h;
            const double w = std::exp(-(u * u + v * v) / (2.0 * sigma * sigma));
            const double dx = x + u - g.cx;
            const double dy = y + v - g.cy;
            const double s = std::sin(g.spokes * std::atan2(dy, dx)) >= 0.0 ? g.bright : g.dark;
            sum += w * s;
            wsum += w;
        }
    }
    return sum / wsum;
}

}  // namespace

TEST(Psnr, Examples) {
    const Image a(8, 8, 0.5);
    EXPECT_TRUE(std::isinf(psnr(a, a, 1.0)));
    EXPECT_NEAR(psnr(Image(8, 8, 0.6), a, 1.0), 20.0, 1e-9);
    EXPECT_THROW(psnr(Image(8, 7), a, 1.0), DataError);
    EXPECT_THROW(psnr(a, a, 0.0), DataError);
}

TEST(Psnr, MatchesTwoPassOracle) {
    Image a(13, 11);
    Image b(13, 11);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng::uniform(1, 0, i);
        b[i] = rng::uniform(2, 0, i);
    }
    double mean_diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mean_diff += (a[i] - b[i]) * (a[i] - b[i]);
    mean_diff /= static_cast<double>(a.size());
    EXPECT_NEAR(psnr(a, b, 2.5), 10.0 * std::log10(2.5 * 2.5 / mean_diff), 1e-10);
}

TEST(Psnr, ConstantErrorLowersScore) {
    Image gt(6, 6);
    Image rec(6, 6);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        gt[i] = 0.1 * static_cast<double>(i);
        rec[i] = gt[i] + (i % 2 ? 0.01 : -0.01);
    }
    Image shifted = rec;
    for (auto& v : shifted.storage()) v += 0.05;
    EXPECT_LT(psnr(shifted, gt, 3.0), psnr(rec, gt, 3.0));
}

TEST(Mtf, FrequencyRadiusMapping) {
    for (double f : {0.1, 0.5, 3.0, 9.0}) {
        EXPECT_NEAR(star_frequency_at_radius(16, star_radius_for_frequency(16, f)), f, 1e-12);
    }
    // spokes line pairs per circumference 2 pi r pixels of pitch 16.38 um
    EXPECT_NEAR(star_frequency_at_radius(16, 10.0), 16.0 / (2.0 * std::numbers::pi * 10.0 * 16.38e-3), 1e-9);
}

TEST(Mtf, PerfectStarAndUniformImage) {
    const SiemensStar star = make_siemens_star(16, 128, 128, 1.0);
    const auto& g = star.geometry;
    const std::vector<double> freqs{star_frequency_at_radius(16, 55.0), star_frequency_at_radius(16, 35.0),
                                    star_frequency_at_radius(16, 22.0)};
    const MtfReport perfect = mtf_from_star(star.clip.radiance, g, freqs);
    for (double m : perfect.mtf) EXPECT_NEAR(m, 1.0, 1e-12);
    const MtfReport flat = mtf_from_star(Image(128, 128, 0.4), g, freqs);
    for (double m : flat.mtf) EXPECT_NEAR(m, 0.0, 1e-12);
}

TEST(Mtf, GaussianBlurMatchesDenseOracle) {
    const double sigma = 1.0;
    SiemensStar star = make_siemens_star(16, 128, 128, 0.8);
    const auto& g = star.geometry;
    Image img(128, 128);
    for (int y = 0; y < 128; ++y) {
        for (int x = 0; x < 128; ++x) img(x, y) = blurred_star(x, y, g, sigma);
    }
    std::vector<double> radii{58.0, 48.0, 40.0, 34.0, 30.0};
    std::vector<double> freqs;
    for (double r : radii) freqs.push_back(star_frequency_at_radius(16, r));
    const MtfReport rep = mtf_from_star(img, g, freqs);

    for (std::size_t k = 0; k < radii.size(); ++k) {
        // one period sampled densely on the continuous blurred star
        double lo = 1e9;
        double hi = -1e9;
        for (int s = 0; s < 400; ++s) {
            const double a = 2.0 * std::numbers::pi / 16.0 * (s + 0.5) / 400.0 + 0.1;
            const double v = blurred_star(g.cx + radii[k] * std::cos(a), g.cy + radii[k] * std::sin(a), g, sigma);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double oracle = (hi - lo) / (hi + lo);
        EXPECT_NEAR(rep.mtf[k], oracle, 0.02) << "radius " << radii[k];
        if (k > 0) EXPECT_LT(rep.mtf[k], rep.mtf[k - 1]);
    }
}

TEST(Mtf, CircleOutsideImageIsRangeError) {
    const SiemensStar star = make_siemens_star(16, 64, 64, 0.8);
    EXPECT_THROW(circle_modulation(star.clip.radiance, 32.0, 32.0, 40.0), RangeError);
    const std::vector<double> too_low{0.01};
    EXPECT_THROW(mtf_from_star(star.clip.radiance, star.geometry, too_low), RangeError);
}

TEST(Bandwidth, BitsPerSample) {
    EXPECT_EQ(bits_per_sample(StreamKind::Events), 64);
    EXPECT_EQ(bits_per_sample(StreamKind::SpadBinary), 1);
    EXPECT_EQ(bits_per_sample(StreamKind::SpadAggregate), 16);
    EXPECT_EQ(bits_per_sample(StreamKind::Conventional), 12);
}

TEST(Bandwidth, BinarySpadOneSecond) {
    const BandwidthEntry e = bandwidth(StreamDescriptor{"spad", StreamKind::SpadBinary, 512, 512, 100000, 1.0});
    EXPECT_EQ(e.bits, 512ull * 512ull * 100000ull);
    EXPECT_NEAR(e.bits / 1e9, 26.2, 0.05);
    EXPECT_NEAR(e.khz_per_pixel, 100.0, 1e-9);
}

TEST(Bandwidth, EventsAndQuarterRate) {
    EXPECT_EQ(bandwidth(StreamDescriptor{"ev", StreamKind::Events, 64, 64, 0, 1.0}).bits, 0u);
    EXPECT_EQ(bandwidth(StreamDescriptor{"ev", StreamKind::Events, 64, 64, 10, 1.0}).bits, 640u);
    const auto full = bandwidth(StreamDescriptor{"agg", StreamKind::SpadAggregate, 64, 64, 16, 0.04});
    const auto quarter = bandwidth(StreamDescriptor{"agg", StreamKind::SpadAggregate, 64, 64, 4, 0.04});
    EXPECT_EQ(quarter.bits * 4, full.bits);
}

TEST(Bandwidth, AdditiveAcrossSegments) {
    const auto a = bandwidth(StreamDescriptor{"b", StreamKind::SpadBinary, 32, 16, 300, 0.003});
    const auto b = bandwidth(StreamDescriptor{"b", StreamKind::SpadBinary, 32, 16, 700, 0.007});
    const auto ab = bandwidth(StreamDescriptor{"b", StreamKind::SpadBinary, 32, 16, 1000, 0.01});
    EXPECT_EQ(a.bits + b.bits, ab.bits);
    EXPECT_EQ(a.samples + b.samples, ab.samples);
    EXPECT_NEAR(ab.bits_per_sec, (a.bits + b.bits) / 0.01, 1e-6);
}

TEST(Bandwidth, ReportLookup) {
    const std::vector<StreamDescriptor> s{{"events", StreamKind::Events, 8, 8, 5, 1.0},
                                          {"agg", StreamKind::SpadAggregate, 8, 8, 2, 1.0}};
    const BandwidthReport r = bandwidth(s);
    ASSERT_NE(r.find("agg"), nullptr);
    EXPECT_EQ(r.find("agg")->bits, 2u * 64u * 16u);
    EXPECT_EQ(r.find("missing"), nullptr);
}
