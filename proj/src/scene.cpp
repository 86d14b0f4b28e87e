#include "spadfuse/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "spadfuse/errors.hpp"
#include "spadfuse/rng.hpp"

namespace spadfuse {

Trajectory::Trajectory(std::vector<Pose> keys) : keys_(std::move(keys)) {
    if (keys_.empty()) throw DataError("trajectory needs at least one keyframe");
    for (std::size_t i = 1; i < keys_.size(); ++i) {
        if (!(keys_[i].t > keys_[i - 1].t)) throw DataError("trajectory keyframes must have increasing t");
    }
}

Trajectory Trajectory::identity(double duration) {
    return Trajectory({Pose{0.0, 0.0, 0.0, 0.0}, Pose{duration, 0.0, 0.0, 0.0}});
}

Trajectory Trajectory::linear_pan(double duration, double vx, double vy) {
    return Trajectory({Pose{0.0, 0.0, 0.0, 0.0}, Pose{duration, vx * duration, vy * duration, 0.0}});
}

Trajectory Trajectory::rotation(double duration, double rate) {
    return Trajectory({Pose{0.0, 0.0, 0.0, 0.0}, Pose{duration, 0.0, 0.0, rate * duration}});
}

double Trajectory::start() const { return keys_.empty() ? 0.0 : keys_.front().t; }
double Trajectory::end() const { return keys_.empty() ? 0.0 : keys_.back().t; }

Pose Trajectory::at(double t) const {
    if (keys_.empty()) return Pose{t, 0.0, 0.0, 0.0};
    if (t <= keys_.front().t) return Pose{t, keys_.front().dx, keys_.front().dy, keys_.front().theta};
    if (t >= keys_.back().t) return Pose{t, keys_.back().dx, keys_.back().dy, keys_.back().theta};
    const auto hi = std::upper_bound(keys_.begin(), keys_.end(), t,
                                     [](double v, const Pose& p) { return v < p.t; });
    const Pose& b = *hi;
    const Pose& a = *(hi - 1);
    const double w = (t - a.t) / (b.t - a.t);
    return Pose{t, a.dx + w * (b.dx - a.dx), a.dy + w * (b.dy - a.dy), a.theta + w * (b.theta - a.theta)};
}

void SceneClip::validate() const {
    if (radiance.empty()) throw DataError("scene radiance is empty");
    for (double v : radiance.values()) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw DataError("scene radiance must be finite and >= 0");
    }
    if (!(duration > 0.0) || !std::isfinite(duration)) throw DataError("scene duration must be > 0");
    if (!(illumination > 0.0) || !std::isfinite(illumination)) throw DataError("scene illumination must be > 0");
    if (trajectory.keys().empty()) throw DataError("scene trajectory is empty");
    if (trajectory.start() > 0.0 || trajectory.end() < duration) {
        throw DataError("scene trajectory must cover [0, duration]");
    }
}

namespace {

double sample_bilinear(const Image& img, double x, double y) {
    const int w = img.width();
    const int h = img.height();
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = img(x0, y0) + fx * (img(x1, y0) - img(x0, y0));
    const double bottom = img(x0, y1) + fx * (img(x1, y1) - img(x0, y1));
    return top + fy * (bottom - top);
}

}  // namespace

void render_flux_into(const SceneClip& clip, double t, Image& out) {
    if (!(t >= 0.0 && t <= clip.duration)) {
        throw RangeError("render time " + std::to_string(t) + " outside [0, duration]");
    }
    const Image& src = clip.radiance;
    const int w = src.width();
    const int h = src.height();
    if (!out.same_shape(src)) out = Image(w, h);

    const Pose pose = clip.trajectory.at(t);
    const double cx = 0.5 * (w - 1);
    const double cy = 0.5 * (h - 1);
    const double cs = std::cos(pose.theta);
    const double sn = std::sin(pose.theta);
    const bool pure_shift = pose.theta == 0.0;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // inverse pose: undo the translation, then rotate by -theta about the centre
            const double ux = x - pose.dx - cx;
            const double uy = y - pose.dy - cy;
            double sx;
            double sy;
            if (pure_shift) {
                sx = ux + cx;
                sy = uy + cy;
            } else {
                sx = cs * ux + sn * uy + cx;
                sy = -sn * ux + cs * uy + cy;
            }
            out(x, y) = clip.illumination * sample_bilinear(src, sx, sy);
        }
    }
}

FluxFrame render_flux(const SceneClip& clip, double t) {
    FluxFrame frame;
    frame.t = t;
    render_flux_into(clip, t, frame.flux);
    return frame;
}

SiemensStar make_siemens_star(int spokes, int width, int height, double contrast, double illumination,
                              double duration, double rotation_rate) {
    if (spokes < 2) throw DataError("siemens star needs at least 2 spokes");
    if (!(contrast > 0.0 && contrast <= 1.0)) throw DataError("siemens star contrast must lie in (0, 1]");
    if (width < 3 || height < 3) throw DataError("siemens star needs at least 3x3 pixels");

    StarGeometry g;
    g.cx = 0.5 * (width - 1);
    g.cy = 0.5 * (height - 1);
    g.radius = 0.5 * std::min(width, height) - 1.0;
    g.spokes = spokes;
    g.bright = 1.0;
    g.dark = 1.0 - contrast;

    Image radiance(width, height);
    const double background = 0.5 * (g.bright + g.dark);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double dx = x - g.cx;
            const double dy = y - g.cy;
            if (std::hypot(dx, dy) > g.radius) {
                radiance(x, y) = background;
                continue;
            }
            const double angle = std::atan2(dy, dx);
            radiance(x, y) = std::sin(spokes * angle) >= 0.0 ? g.bright : g.dark;
        }
    }

    SiemensStar star;
    star.clip.radiance = std::move(radiance);
    star.clip.illumination = illumination;
    star.clip.duration = duration;
    star.clip.trajectory = rotation_rate == 0.0 ? Trajectory::identity(duration)
                                                : Trajectory::rotation(duration, rotation_rate);
    star.geometry = g;
    return star;
}

Image make_office_scene(int width, int height, unsigned long long seed) {
    if (width < 1 || height < 1) throw DataError("office scene needs a positive size");
    Image img(width, height);
    const std::uint64_t s = rng::derive(seed, "office");
    std::uint64_t counter = 0;
    auto draw = [&]() { return rng::uniform(s, 0, counter++); };

    // wall: gentle vertical gradient
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            img(x, y) = 0.25 + 0.1 * static_cast<double>(y) / std::max(1, height - 1);
        }
    }

    // furniture and screens: flat rectangles with log-uniform radiance
    const int n_rects = 7;
    for (int k = 0; k < n_rects; ++k) {
        const int rw = 4 + static_cast<int>(draw() * 0.35 * width);
        const int rh = 4 + static_cast<int>(draw() * 0.35 * height);
        const int x0 = static_cast<int>(draw() * (width - rw / 2));
        const int y0 = static_cast<int>(draw() * (height - rh / 2));
        const double value = 0.05 * std::pow(20.0, draw());
        for (int y = y0; y < std::min(height, y0 + rh); ++y) {
            for (int x = x0; x < std::min(width, x0 + rw); ++x) img(x, y) = value;
        }
    }

    // lamps: smooth bright highlights
    for (int k = 0; k < 2; ++k) {
        const double bx = draw() * width;
        const double by = draw() * height;
        const double sigma = 2.0 + draw() * 0.08 * std::min(width, height);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const double r2 = (x - bx) * (x - bx) + (y - by) * (y - by);
                img(x, y) += 0.6 * std::exp(-r2 / (2.0 * sigma * sigma));
            }
        }
    }
    for (double& v : img.values()) v = std::min(v, 1.0);
    return img;
}

double illumination_from_lux(double lux) {
    if (!(lux > 0.0)) throw DataError("illuminance must be > 0 lux");
    // 100 lux maps to 5e4 photons/sec at unit radiance
    return 500.0 * lux;
}

}  // namespace spadfuse
