#pragma once

#include <vector>

#include "spadfuse/grid.hpp"

namespace spadfuse {

/// Image-plane pose at time t: rotation theta (radians, about the image
/// centre) followed by translation (dx, dy) in pixels.
struct Pose {
    double t = 0.0;
    double dx = 0.0;
    double dy = 0.0;
    double theta = 0.0;
};

/// Piecewise-linear keyframed camera motion.
class Trajectory {
public:
    Trajectory() = default;
    /// Keyframes must have strictly increasing t.
    explicit Trajectory(std::vector<Pose> keys);

    static Trajectory identity(double duration);
    static Trajectory linear_pan(double duration, double vx, double vy);
    static Trajectory rotation(double duration, double rate);

    /// Linear interpolation between keyframes; clamps outside the key range.
    Pose at(double t) const;

    const std::vector<Pose>& keys() const noexcept { return keys_; }
    double start() const;
    double end() const;

private:
    std::vector<Pose> keys_;
};

/// An HDR radiance map moving under a trajectory at a fixed illumination.
struct SceneClip {
    Image radiance;             ///< linear, nonnegative, relative units
    Trajectory trajectory;
    double illumination = 1.0;  ///< photons/sec per unit radiance
    double duration = 1.0;

    int width() const noexcept { return radiance.width(); }
    int height() const noexcept { return radiance.height(); }

    /// Throws DataError on any violated invariant.
    void validate() const;
};

struct FluxFrame {
    double t = 0.0;
    Image flux;  ///< photons/sec per pixel
};

/// Ground-truth flux at time t: the radiance resampled bilinearly under the
/// trajectory pose (replicate-edge borders) times the illumination.
FluxFrame render_flux(const SceneClip& clip, double t);

/// Same as render_flux but writes into an existing buffer (resized if needed).
void render_flux_into(const SceneClip& clip, double t, Image& out);

/// Geometry of a generated Siemens star, needed by the MTF measurement.
struct StarGeometry {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;
    int spokes = 0;
    double bright = 1.0;
    double dark = 0.0;
};

struct SiemensStar {
    SceneClip clip;
    StarGeometry geometry;
};

/// Binary angular star: radiance is `bright` where sin(spokes * angle) >= 0
/// and 1 - contrast elsewhere, inside a disc; mid-gray outside. The clip is
/// static unless rotation_rate (rad/s) is nonzero.
SiemensStar make_siemens_star(int spokes, int width, int height, double contrast,
                              double illumination = 1.0, double duration = 1.0,
                              double rotation_rate = 0.0);

/// Procedural low-light indoor scene: flat gray regions separated by sharp
/// edges plus a few smooth highlights, spanning roughly two decades of
/// radiance. Deterministic in (width, height, seed).
Image make_office_scene(int width, int height, unsigned long long seed);

/// Photons/sec per unit radiance for a nominal scene illuminance in lux.
double illumination_from_lux(double lux);

}  // namespace spadfuse
