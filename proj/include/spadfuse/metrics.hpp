#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spadfuse/grid.hpp"
#include "spadfuse/scene.hpp"

namespace spadfuse {

/// 10 log10(peak^2 / MSE); +inf for identical images. Throws DataError on a
/// shape mismatch or peak <= 0.
double psnr(const Image& reconstruction, const Image& ground_truth, double peak);

/// Virtual pixel pitch used to express star frequencies in lines/mm.
inline constexpr double kDefaultPixelPitchUm = 16.38;

/// Radius (pixels) at which a star with `spokes` has the given spatial
/// frequency in lines/mm.
double star_radius_for_frequency(int spokes, double lines_per_mm, double pitch_um = kDefaultPixelPitchUm);
double star_frequency_at_radius(int spokes, double radius, double pitch_um = kDefaultPixelPitchUm);

/// (p95 - p5) / (p95 + p5) of bilinear samples along a circle. With
/// periods > 0 the samples are first averaged over that many periods.
double circle_modulation(const Image& image, double cx, double cy, double radius, int samples = 0, int periods = 0);

struct MtfReport {
    std::vector<double> frequencies;  ///< lines/mm, increasing
    std::vector<double> radii;        ///< pixels
    std::vector<double> mtf;          ///< in [0, 1]
};

/// Modulation on the star circle of each requested frequency. Throws
/// RangeError when a circle leaves the image or the star disc.
MtfReport mtf_from_star(const Image& image, const StarGeometry& star, std::span<const double> frequencies,
                        double pitch_um = kDefaultPixelPitchUm);

enum class StreamKind { Events, SpadBinary, SpadAggregate, Conventional };

std::string to_string(StreamKind kind);

/// Bits per record: event 64, binary SPAD 1, aggregate SPAD 16, conventional 12.
int bits_per_sample(StreamKind kind);

struct StreamDescriptor {
    std::string name;
    StreamKind kind = StreamKind::Events;
    int width = 0;
    int height = 0;
    std::uint64_t count = 0;  ///< events, or frames for framed streams
    double duration = 0.0;
};

struct BandwidthEntry {
    std::string name;
    StreamKind kind = StreamKind::Events;
    std::uint64_t samples = 0;  ///< events or pixel readouts
    std::uint64_t bits = 0;
    double duration = 0.0;
    double bits_per_sec = 0.0;
    double khz_per_pixel = 0.0;  ///< samples per pixel per millisecond
};

struct BandwidthReport {
    std::vector<BandwidthEntry> entries;
    const BandwidthEntry* find(const std::string& name) const;
};

BandwidthEntry bandwidth(const StreamDescriptor& stream);
BandwidthReport bandwidth(std::span<const StreamDescriptor> streams);

}  // namespace spadfuse
