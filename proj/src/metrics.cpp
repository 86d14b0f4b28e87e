#include "spadfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "spadfuse/errors.hpp"

namespace spadfuse {

double psnr(const Image& reconstruction, const Image& ground_truth, double peak) {
    if (!reconstruction.same_shape(ground_truth)) throw DataError("psnr: images differ in shape");
    if (!(peak > 0.0)) throw DataError("psnr: peak must be > 0");
    if (reconstruction.empty()) throw DataError("psnr: empty images");
    double sse = 0.0;
    for (std::size_t i = 0; i < reconstruction.size(); ++i) {
        const double d = reconstruction[i] - ground_truth[i];
        sse += d * d;
    }
    if (sse == 0.0) return std::numeric_limits<double>::infinity();
    const double mse = sse / static_cast<double>(reconstruction.size());
    return 10.0 * std::log10(peak * peak / mse);
}

double star_radius_for_frequency(int spokes, double lines_per_mm, double pitch_um) {
    const double cycles_per_pixel = lines_per_mm * pitch_um * 1e-3;
    return spokes / (2.0 * std::numbers::pi * cycles_per_pixel);
}

double star_frequency_at_radius(int spokes, double radius, double pitch_um) {
    return spokes / (2.0 * std::numbers::pi * radius) / (pitch_um * 1e-3);
}

namespace {

double bilinear(const Image& img, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = img(x0, y0) + fx * (img(x1, y0) - img(x0, y0));
    const double bottom = img(x0, y1) + fx * (img(x1, y1) - img(x0, y1));
    return top + fy * (bottom - top);
}

double percentile(std::vector<double>& v, double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
    const double a = v[lo];
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(hi), v.end());
    const double b = v[hi];
    return a + (pos - static_cast<double>(lo)) * (b - a);
}

}  // namespace

double circle_modulation(const Image& image, double cx, double cy, double radius, int samples, int periods) {
    if (!(radius > 0.0)) throw RangeError("circle radius must be > 0");
    if (cx - radius < 0.0 || cy - radius < 0.0 || cx + radius > image.width() - 1 || cy + radius > image.height() - 1) {
        throw RangeError("measurement circle leaves the image");
    }
    if (periods < 0) throw RangeError("periods must be >= 0");
    if (samples <= 0) samples = std::max(64, static_cast<int>(std::ceil(8.0 * 2.0 * std::numbers::pi * radius)));
    const int folds = std::max(periods, 1);
    const int per_period = (samples + folds - 1) / folds;
    samples = per_period * folds;
    // Samples at the same phase of every period are averaged into one profile.
    std::vector<double> values(static_cast<std::size_t>(per_period), 0.0);
    for (int k = 0; k < samples; ++k) {
        const double a = 2.0 * std::numbers::pi * (k + 0.5) / samples;
        values[static_cast<std::size_t>(k % per_period)] +=
            bilinear(image, cx + radius * std::cos(a), cy + radius * std::sin(a)) / folds;
    }
    const double lo = percentile(values, 0.05);
    const double hi = percentile(values, 0.95);
    if (hi + lo <= 0.0) return 0.0;
    return std::clamp((hi - lo) / (hi + lo), 0.0, 1.0);
}

MtfReport mtf_from_star(const Image& image, const StarGeometry& star, std::span<const double> frequencies,
                        double pitch_um) {
    MtfReport report;
    for (std::size_t i = 0; i < frequencies.size(); ++i) {
        if (i > 0 && !(frequencies[i] > frequencies[i - 1])) throw DataError("MTF frequencies must increase");
        const double r = star_radius_for_frequency(star.spokes, frequencies[i], pitch_um);
        if (r > star.radius) throw RangeError("MTF frequency maps outside the star disc");
        report.frequencies.push_back(frequencies[i]);
        report.radii.push_back(r);
        report.mtf.push_back(circle_modulation(image, star.cx, star.cy, r, 0, star.spokes));
    }
    return report;
}

std::string to_string(StreamKind kind) {
    switch (kind) {
        case StreamKind::Events: return "events";
        case StreamKind::SpadBinary: return "spad_binary";
        case StreamKind::SpadAggregate: return "spad_aggregate";
        case StreamKind::Conventional: return "conventional";
    }
    return "unknown";
}

int bits_per_sample(StreamKind kind) {
    switch (kind) {
        case StreamKind::Events: return 64;
        case StreamKind::SpadBinary: return 1;
        case StreamKind::SpadAggregate: return 16;
        case StreamKind::Conventional: return 12;
    }
    return 0;
}

BandwidthEntry bandwidth(const StreamDescriptor& s) {
    if (s.width < 0 || s.height < 0 || s.duration < 0.0) throw DataError("bandwidth: negative stream metadata");
    BandwidthEntry e;
    e.name = s.name.empty() ? to_string(s.kind) : s.name;
    e.kind = s.kind;
    e.duration = s.duration;
    const auto pixels = static_cast<std::uint64_t>(s.width) * static_cast<std::uint64_t>(s.height);
    e.samples = s.kind == StreamKind::Events ? s.count : s.count * pixels;
    e.bits = e.samples * static_cast<std::uint64_t>(bits_per_sample(s.kind));
    if (s.duration > 0.0) {
        e.bits_per_sec = static_cast<double>(e.bits) / s.duration;
        if (pixels > 0) e.khz_per_pixel = static_cast<double>(e.samples) / static_cast<double>(pixels) / (s.duration * 1e3);
    }
    return e;
}

BandwidthReport bandwidth(std::span<const StreamDescriptor> streams) {
    BandwidthReport r;
    for (const auto& s : streams) r.entries.push_back(bandwidth(s));
    return r;
}

const BandwidthEntry* BandwidthReport::find(const std::string& name) const {
    for (const auto& e : entries) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

}  // namespace spadfuse
