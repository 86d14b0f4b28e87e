#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spadfuse/akf.hpp"
#include "spadfuse/deblur.hpp"
#include "spadfuse/events.hpp"
#include "spadfuse/params.hpp"
#include "spadfuse/scene.hpp"
#include "spadfuse/spad.hpp"

namespace spadfuse::io {

using nlohmann::json;
namespace fs = std::filesystem;

// Sensor data files are a single-line JSON header terminated by '\n'
// followed by a little-endian binary payload. HDR scenes use a JSON header
// with a sidecar payload file instead.

/// Writes bytes to a temporary file in the same directory, then renames.
void write_atomic(const fs::path& path, const std::string& bytes);
std::string read_file(const fs::path& path);

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const fs::path& path);

json to_json(const SensorParams& params);
/// Unknown keys are rejected with ConfigError.
SensorParams sensor_params_from_json(const json& j, SensorParams base = {});

/// HDR radiance: `path` holds {"width","height","dtype":"float32","data":"<sidecar>"}
/// and the sidecar holds row-major float32 LE values.
void write_raw_image(const fs::path& path, const Image& image);
Image read_raw_image(const fs::path& path);

/// Trajectory: JSON list of {"t","dx","dy","theta"}.
void write_trajectory(const fs::path& path, const Trajectory& trajectory);
Trajectory read_trajectory(const fs::path& path);

/// Packed bitmaps, LSB-first within each byte, one frame after another.
void write_binary_frames(const fs::path& path, const std::vector<SpadBinaryFrame>& frames, const SensorParams& params);
std::vector<SpadBinaryFrame> read_binary_frames(const fs::path& path, double* t_bin = nullptr);

/// Aggregates: uint16 row-major counts per frame.
void write_aggregates(const fs::path& path, const std::vector<SpadAggregateFrame>& frames, const SensorParams& params);
std::vector<SpadAggregateFrame> read_aggregates(const fs::path& path);

/// Event records of 16 bytes: t (u64 microseconds), x (u16), y (u16),
/// polarity (i8), 3 pad bytes. Timestamps are rounded to the microsecond.
void write_events(const fs::path& path, const EventStream& stream, const std::string& params_hash = "");
EventStream read_events(const fs::path& path);

/// CSV with header "t,x,y,polarity"; t in seconds at full precision.
void write_events_csv(const fs::path& path, const EventStream& stream);
EventStream read_events_csv(const fs::path& path, int width, int height, double t0, double t1);

/// Latent image: float32 counts with header {f, T, method, tol}.
void write_latent(const fs::path& path, const LatentImage& latent);
LatentImage read_latent(const fs::path& path);

/// Single float32 image with a free-form JSON header.
void write_float_image(const fs::path& path, const Image& image, json header);
Image read_float_image(const fs::path& path, json* header = nullptr);

/// Sequence of equally shaped float32 images with one time stamp each.
struct ImageStack {
    std::vector<double> times;
    std::vector<Image> images;
};
void write_image_stack(const fs::path& path, const ImageStack& stack, json header);
ImageStack read_image_stack(const fs::path& path, json* header = nullptr);

}  // namespace spadfuse::io
