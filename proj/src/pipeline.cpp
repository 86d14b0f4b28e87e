#include "spadfuse/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "spadfuse/deblur.hpp"
#include "spadfuse/errors.hpp"
#include "spadfuse/io.hpp"
#include "spadfuse/rng.hpp"
#include "spadfuse/snr.hpp"

namespace spadfuse {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError("'" + where_ + "' must be a JSON object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(path(key) + " must be a boolean");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(path(key) + " must be a string");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(path(key) + " must be an integer");
            if (std::is_unsigned_v<T> && !v.is_number_unsigned()) throw ConfigError(path(key) + " must be >= 0");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(path(key) + " must be a number");
        }
        try {
            out = v.get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(path(key) + ": " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!seen_.count(item.key())) throw ConfigError("unknown config key '" + path(item.key().c_str()) + "'");
        }
    }

private:
    std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

const std::set<std::string> kPipelines{"simulate", "deblur", "fuse", "snr", "mtf", "eval", "e2e"};
const std::set<std::string> kPresets{"office", "siemens_star", "static", "file"};

std::string to_string(CovarianceMode mode) {
    return mode == CovarianceMode::Discrete ? "discrete" : "continuous_information";
}

json to_json(const SceneSpec& s) {
    return json{{"preset", s.preset},       {"width", s.width},
                {"height", s.height},       {"duration", s.duration},
                {"lux", s.lux},             {"illumination", s.illumination},
                {"vx", s.vx},               {"vy", s.vy},
                {"rotation_rate", s.rotation_rate}, {"spokes", s.spokes},
                {"contrast", s.contrast},   {"radiance_file", s.radiance_file},
                {"trajectory_file", s.trajectory_file}};
}

json to_json(const FusionConfig& f) {
    return json{{"publish_rate", f.publish_rate},
                {"adaptive", f.adaptive},
                {"u_threshold", f.u_threshold},
                {"n_bins_per_frame", f.n_bins_per_frame},
                {"tol", f.tol},
                {"p0", f.p0},
                {"covariance_mode", to_string(f.covariance_mode)},
                {"deblur", to_string(f.deblur)},
                {"record_measurements", f.record_measurements}};
}

json to_json(const EventSimOptions& e) {
    return json{{"step", e.step}, {"inject_hot_pixels", e.inject_hot_pixels}, {"hot_pixel_rate", e.hot_pixel_rate}};
}

json to_json(const EvalSpec& e) {
    return json{{"u_sweep", e.u_sweep}, {"max_frame_fraction", e.max_frame_fraction}};
}

SceneSpec scene_from_json(const json& j) {
    SceneSpec s;
    ObjectReader r(j, "scene");
    r.get("preset", s.preset);
    r.get("width", s.width);
    r.get("height", s.height);
    r.get("duration", s.duration);
    r.get("lux", s.lux);
    r.get("illumination", s.illumination);
    r.get("vx", s.vx);
    r.get("vy", s.vy);
    r.get("rotation_rate", s.rotation_rate);
    r.get("spokes", s.spokes);
    r.get("contrast", s.contrast);
    r.get("radiance_file", s.radiance_file);
    r.get("trajectory_file", s.trajectory_file);
    r.finish();
    return s;
}

FusionConfig fusion_from_json(const json& j) {
    FusionConfig f;
    ObjectReader r(j, "fusion");
    r.get("publish_rate", f.publish_rate);
    r.get("adaptive", f.adaptive);
    r.get("u_threshold", f.u_threshold);
    r.get("n_bins_per_frame", f.n_bins_per_frame);
    r.get("tol", f.tol);
    r.get("p0", f.p0);
    std::string mode = to_string(f.covariance_mode);
    r.get("covariance_mode", mode);
    if (mode == "discrete") f.covariance_mode = CovarianceMode::Discrete;
    else if (mode == "continuous_information") f.covariance_mode = CovarianceMode::ContinuousInformation;
    else throw ConfigError("fusion.covariance_mode must be 'discrete' or 'continuous_information'");
    std::string method = to_string(f.deblur);
    r.get("deblur", method);
    if (method == "NEDI") f.deblur = DeblurMethod::NEDI;
    else if (method == "EDI") f.deblur = DeblurMethod::EDI;
    else throw ConfigError("fusion.deblur must be 'EDI' or 'NEDI'");
    r.get("record_measurements", f.record_measurements);
    r.finish();
    return f;
}

EventSimOptions events_from_json(const json& j) {
    EventSimOptions e;
    ObjectReader r(j, "events");
    r.get("step", e.step);
    r.get("inject_hot_pixels", e.inject_hot_pixels);
    r.get("hot_pixel_rate", e.hot_pixel_rate);
    r.finish();
    return e;
}

EvalSpec eval_from_json(const json& j) {
    EvalSpec e;
    ObjectReader r(j, "eval");
    r.get("u_sweep", e.u_sweep);
    r.get("max_frame_fraction", e.max_frame_fraction);
    r.finish();
    return e;
}

void validate(const RunConfig& c) {
    if (!kPipelines.count(c.pipeline)) throw ConfigError("unknown pipeline '" + c.pipeline + "'");
    const SceneSpec& s = c.scene;
    if (!kPresets.count(s.preset)) throw ConfigError("unknown scene preset '" + s.preset + "'");
    if (s.width < 2 || s.height < 2 || s.width > 65535 || s.height > 65535) {
        throw ConfigError("scene width and height must lie in [2, 65535]");
    }
    if (!(s.duration > 0.0) || !std::isfinite(s.duration)) throw ConfigError("scene.duration must be > 0");
    if (!(s.lux > 0.0)) throw ConfigError("scene.lux must be > 0");
    if (!(s.illumination >= 0.0)) throw ConfigError("scene.illumination must be >= 0");
    if (s.spokes < 1) throw ConfigError("scene.spokes must be >= 1");
    if (!(s.contrast > 0.0 && s.contrast <= 1.0)) throw ConfigError("scene.contrast must lie in (0, 1]");
    if (s.preset == "file" && s.radiance_file.empty()) throw ConfigError("scene preset 'file' needs radiance_file");
    c.sensor.validate();
    c.fusion.validate();
    if (!(c.events.hot_pixel_rate >= 0.0)) throw ConfigError("events.hot_pixel_rate must be >= 0");
    if (!(c.eval.max_frame_fraction > 0.0 && c.eval.max_frame_fraction <= 1.0)) {
        throw ConfigError("eval.max_frame_fraction must lie in (0, 1]");
    }
    for (double u : c.eval.u_sweep) {
        if (!(u >= 0.0)) throw ConfigError("eval.u_sweep entries must be >= 0");
    }
}

// Identity of an experiment: everything except where files live.
json identity_json(const RunConfig& c) {
    json j = to_json(c);
    j.erase("output_dir");
    j.erase("input_dir");
    return j;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

json to_json(const BandwidthEntry& e) {
    return json{{"name", e.name},           {"kind", to_string(e.kind)},
                {"bits_per_sample", bits_per_sample(e.kind)},
                {"samples", e.samples},     {"bits", e.bits},
                {"duration", e.duration},   {"bits_per_sec", e.bits_per_sec},
                {"khz_per_pixel", e.khz_per_pixel}};
}

std::string bandwidth_csv(const BandwidthReport& report) {
    std::ostringstream out;
    out << "stream,kind,bits_per_sample,samples,bits,bits_per_sec,khz_per_pixel\n" << std::setprecision(10);
    for (const auto& e : report.entries) {
        out << e.name << ',' << to_string(e.kind) << ',' << bits_per_sample(e.kind) << ',' << e.samples << ','
            << e.bits << ',' << e.bits_per_sec << ',' << e.khz_per_pixel << '\n';
    }
    return out.str();
}

std::string table_csv(const std::vector<MethodRow>& rows) {
    std::ostringstream out;
    out << "method,psnr_db,frames_used,frames_total,bits,bits_per_sec,khz_per_pixel,u_threshold\n"
        << std::setprecision(10);
    for (const auto& r : rows) {
        out << r.method << ',' << r.psnr_db << ',' << r.frames_used << ',' << r.frames_total << ',' << r.bits << ','
            << r.bits_per_sec << ',' << r.khz_per_pixel << ',' << r.u_threshold << '\n';
    }
    return out.str();
}

std::string sweep_csv(const SweepResult& sweep) {
    std::ostringstream out;
    out << "u_threshold,frames_used,frames_total,frame_fraction,psnr_db,selected\n" << std::setprecision(10);
    for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
        const auto& r = sweep.rows[i];
        out << r.u_threshold << ',' << r.frames_used << ',' << r.frames_total << ','
            << (r.frames_total > 0 ? double(r.frames_used) / r.frames_total : 0.0) << ',' << r.psnr_db << ','
            << (static_cast<int>(i) == sweep.selected ? 1 : 0) << '\n';
    }
    return out.str();
}

std::string triggers_csv(const std::vector<TriggerRecord>& triggers) {
    std::ostringstream out;
    out << "window,t_start,u,captured\n" << std::setprecision(17);
    for (const auto& t : triggers) out << t.window << ',' << t.t_start << ',' << t.u << ',' << int(t.captured) << '\n';
    return out.str();
}

// Tracks written artifacts and their checksums, keyed by path relative to the run directory.
class ArtifactSet {
public:
    explicit ArtifactSet(fs::path root) : root_(std::move(root)) {}

    fs::path path(const std::string& rel) const { return root_ / rel; }

    void add(const std::string& rel) { sums_[rel] = io::sha256_file(root_ / rel); }

    void write(const std::string& rel, const std::string& bytes) {
        io::write_atomic(root_ / rel, bytes);
        add(rel);
    }

    json to_json() const { return json(sums_); }
    const fs::path& root() const { return root_; }

private:
    fs::path root_;
    std::map<std::string, std::string> sums_;
};

std::vector<StreamDescriptor> stream_descriptors(const SimulatedData& d, std::uint64_t aggregate_frames) {
    const int w = d.clip.width();
    const int h = d.clip.height();
    const double duration = d.clip.duration;
    const auto conventional = static_cast<std::uint64_t>(std::floor(duration / d.params.T_exp + 1e-9));
    return {
        StreamDescriptor{"events", StreamKind::Events, w, h, d.events.events.size(), duration},
        StreamDescriptor{"spad_aggregate", StreamKind::SpadAggregate, w, h, aggregate_frames, duration},
        StreamDescriptor{"spad_binary", StreamKind::SpadBinary, w, h, d.binary.size(), duration},
        StreamDescriptor{"conventional", StreamKind::Conventional, w, h, conventional, duration},
    };
}

MethodRow make_row(const std::string& method, const SequenceScore& score, int frames_used, int frames_total,
                   const std::vector<BandwidthEntry>& streams) {
    MethodRow row;
    row.method = method;
    row.psnr_db = score.psnr_db;
    row.frames_used = frames_used;
    row.frames_total = frames_total;
    for (const auto& e : streams) {
        row.bits += e.bits;
        row.bits_per_sec += e.bits_per_sec;
        row.khz_per_pixel += e.khz_per_pixel;
    }
    return row;
}

void write_dataset(const SimulatedData& d, const RunConfig& config, ArtifactSet& artifacts,
                   const std::string& prefix) {
    std::vector<double> times{0.0};
    for (double t : tick_times(0.0, d.clip.duration, config.fusion.publish_rate)) times.push_back(t);
    io::ImageStack gt;
    gt.times = times;
    for (double t : times) gt.images.push_back(render_flux(d.clip, t).flux);
    io::write_image_stack(artifacts.path(prefix + "gt_flux.bin"), gt, json{{"format", "flux_stack"}, {"units", "photons/s"}});
    artifacts.add(prefix + "gt_flux.bin");

    const json params{{"sensor", io::to_json(d.params)},
                      {"scene", to_json(config.scene)},
                      {"duration", d.clip.duration},
                      {"publish_rate", config.fusion.publish_rate},
                      {"n_bins", config.fusion.n_bins_per_frame}};
    artifacts.write(prefix + "params.json", params.dump(2) + "\n");

    io::write_binary_frames(artifacts.path(prefix + "binary.bin"), d.binary, d.params);
    artifacts.add(prefix + "binary.bin");
    io::write_aggregates(artifacts.path(prefix + "aggregates.bin"), d.aggregates, d.params);
    artifacts.add(prefix + "aggregates.bin");
    io::write_events(artifacts.path(prefix + "events.bin"), d.events, io::sha256_hex(params.dump()));
    artifacts.add(prefix + "events.bin");
}

json base_manifest(const RunConfig& config, const std::string& pipeline) {
    return json{{"schema_version", kSchemaVersion},
                {"tool_version", kToolVersion},
                {"pipeline", pipeline},
                {"config_hash", config_hash(config)},
                {"config", identity_json(config)},
                {"timing_file", "timing.json"}};
}

void finish_run(ArtifactSet& artifacts, json& manifest, const json& timing) {
    // Timing varies run to run, so it stays out of the checksummed set.
    io::write_atomic(artifacts.path("timing.json"), timing.dump(2) + "\n");
    manifest["artifacts"] = artifacts.to_json();
    io::write_atomic(artifacts.path("manifest.json"), manifest.dump(2) + "\n");
}

struct Dataset {
    SensorParams params;
    double duration = 0.0;
    io::ImageStack gt_flux;
    std::vector<SpadAggregateFrame> aggregates;
    EventStream events;
};

Dataset load_dataset(const fs::path& dir) {
    if (dir.empty()) throw ConfigError("input_dir is required for this pipeline");
    Dataset d;
    json params;
    try {
        params = json::parse(io::read_file(dir / "params.json"));
    } catch (const json::exception& e) {
        throw DataError((dir / "params.json").string() + ": " + e.what());
    }
    if (!params.contains("sensor") || !params.contains("duration")) {
        throw DataError((dir / "params.json").string() + ": missing sensor or duration");
    }
    d.params = io::sensor_params_from_json(params.at("sensor"));
    d.duration = params.at("duration").get<double>();
    d.gt_flux = io::read_image_stack(dir / "gt_flux.bin");
    d.aggregates = io::read_aggregates(dir / "aggregates.bin");
    d.events = io::read_events(dir / "events.bin");
    return d;
}

double mean(const Image& img) {
    if (img.empty()) return 0.0;
    return std::accumulate(img.values().begin(), img.values().end(), 0.0) / static_cast<double>(img.size());
}

Image log_floor(const Image& flux) {
    Image out(flux.width(), flux.height());
    for (std::size_t i = 0; i < flux.size(); ++i) out[i] = std::log(std::max(flux[i], kLogFloor));
    return out;
}

Image exp_image(const Image& log_image) {
    Image out(log_image.width(), log_image.height());
    for (std::size_t i = 0; i < log_image.size(); ++i) out[i] = std::exp(log_image[i]);
    return out;
}

double first_arrival(const std::vector<SpadAggregateFrame>& aggregates) {
    return aggregates.empty() ? 0.0 : aggregates.front().t_end();
}

}  // namespace

json to_json(const RunConfig& c) {
    return json{{"schema_version", c.schema_version},
                {"pipeline", c.pipeline},
                {"seed", c.seed},
                {"output_dir", c.output_dir},
                {"input_dir", c.input_dir},
                {"scene", to_json(c.scene)},
                {"sensor", io::to_json(c.sensor)},
                {"matched_r_bar", c.matched_r_bar},
                {"fusion", to_json(c.fusion)},
                {"events", to_json(c.events)},
                {"eval", to_json(c.eval)}};
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    ObjectReader r(j, "");
    r.get("schema_version", c.schema_version);
    if (!j.contains("schema_version")) throw ConfigError("config lacks schema_version");
    if (c.schema_version != kSchemaVersion) {
        throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
    }
    r.get("pipeline", c.pipeline);
    r.get("seed", c.seed);
    r.get("output_dir", c.output_dir);
    r.get("input_dir", c.input_dir);
    if (const json* s = r.child("scene")) c.scene = scene_from_json(*s);
    if (const json* s = r.child("sensor")) c.sensor = io::sensor_params_from_json(*s);
    r.get("matched_r_bar", c.matched_r_bar);
    if (const json* f = r.child("fusion")) c.fusion = fusion_from_json(*f);
    if (const json* e = r.child("events")) c.events = events_from_json(*e);
    if (const json* e = r.child("eval")) c.eval = eval_from_json(*e);
    r.finish();
    validate(c);
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    return run_config_from_json(j);
}

std::string config_hash(const RunConfig& config) { return io::sha256_hex(identity_json(config).dump()); }

SensorParams effective_params(const RunConfig& config) {
    SensorParams p = config.sensor;
    if (config.matched_r_bar) p.R_bar = matched_r_bar(p, config.fusion.n_bins_per_frame);
    return p;
}

SceneClip build_scene(const RunConfig& config) {
    const SceneSpec& s = config.scene;
    const double illumination = s.illumination > 0.0 ? s.illumination : illumination_from_lux(s.lux);
    SceneClip clip;
    clip.illumination = illumination;
    clip.duration = s.duration;
    if (s.preset == "siemens_star") {
        return make_siemens_star(s.spokes, s.width, s.height, s.contrast, illumination, s.duration, s.rotation_rate)
            .clip;
    }
    if (s.preset == "file") {
        clip.radiance = io::read_raw_image(s.radiance_file);
        clip.trajectory = s.trajectory_file.empty() ? Trajectory::identity(s.duration)
                                                    : io::read_trajectory(s.trajectory_file);
    } else {
        clip.radiance = make_office_scene(s.width, s.height, rng::derive(config.seed, "scene"));
        clip.trajectory = s.preset == "static" ? Trajectory::identity(s.duration)
                                               : Trajectory::linear_pan(s.duration, s.vx, s.vy);
    }
    clip.validate();
    return clip;
}

SimulatedData simulate(const RunConfig& config) {
    SimulatedData d;
    d.clip = build_scene(config);
    d.params = effective_params(config);
    d.binary = simulate_binary_frames(d.clip, d.params, 0.0, d.clip.duration, rng::derive(config.seed, "spad"));
    d.aggregates = aggregate_all(d.binary, config.fusion.n_bins_per_frame, d.params);
    d.events = simulate_events(d.clip, d.params, rng::derive(config.seed, "event"), config.events);
    return d;
}

Image ground_truth_log(const SceneClip& clip, double t) { return log_floor(render_flux(clip, t).flux); }

std::vector<ReconstructedFrame> ground_truth_sequence(const SceneClip& clip, const std::vector<double>& times) {
    std::vector<ReconstructedFrame> out;
    out.reserve(times.size());
    for (double t : times) out.push_back(ReconstructedFrame{t, ground_truth_log(clip, t), Image()});
    return out;
}

SequenceScore score_sequence(const std::vector<ReconstructedFrame>& frames,
                             const std::vector<ReconstructedFrame>& ground_truth, double t_min) {
    std::vector<std::pair<const ReconstructedFrame*, const ReconstructedFrame*>> pairs;
    for (const auto& f : frames) {
        if (f.t < t_min - 1e-12) continue;
        const auto it = std::find_if(ground_truth.begin(), ground_truth.end(),
                                     [&](const ReconstructedFrame& g) { return std::abs(g.t - f.t) <= 1e-9; });
        if (it == ground_truth.end()) throw DataError("no ground truth at t = " + std::to_string(f.t));
        pairs.emplace_back(&f, &*it);
    }
    SequenceScore score;
    if (pairs.empty()) return score;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& [f, g] : pairs) {
        const auto [mn, mx] = std::minmax_element(g->log_intensity.values().begin(), g->log_intensity.values().end());
        lo = std::min(lo, *mn);
        hi = std::max(hi, *mx);
    }
    score.peak = hi - lo;
    if (!(score.peak > 0.0)) score.peak = 1.0;
    double sum = 0.0;
    for (const auto& [f, g] : pairs) sum += psnr(f->log_intensity, g->log_intensity, score.peak);
    score.psnr_db = sum / static_cast<double>(pairs.size());
    score.ticks = static_cast<int>(pairs.size());
    return score;
}

std::vector<double> tick_times(double t0, double t1, double rate) {
    const auto n = static_cast<long long>(std::floor((t1 - t0) * rate + 1e-9));
    std::vector<double> ticks;
    ticks.reserve(static_cast<std::size_t>(std::max(0LL, n)));
    for (long long k = 1; k <= n; ++k) ticks.push_back(t0 + static_cast<double>(k) * (1.0 / rate));
    return ticks;
}

std::vector<ReconstructedFrame> naive_reconstruction(const std::vector<SpadAggregateFrame>& aggregates,
                                                     const SensorParams& params, const std::vector<double>& ticks) {
    if (aggregates.empty()) throw DataError("naive integration needs at least one aggregate window");
    std::vector<Image> logs;
    logs.reserve(aggregates.size());
    for (const auto& a : aggregates) logs.push_back(log_floor(aggregate_flux_image(a, params)));
    std::vector<ReconstructedFrame> out;
    for (double t : ticks) {
        std::size_t k = 0;
        while (k + 1 < aggregates.size() && aggregates[k].t_end() <= t) ++k;
        out.push_back(ReconstructedFrame{t, logs[k], Image()});
    }
    return out;
}

std::vector<ReconstructedFrame> events_only_reconstruction(const EventStream& events, double start_log,
                                                           const SensorParams& params,
                                                           const std::vector<double>& ticks) {
    const PixelEventIndex index(events);
    std::vector<ReconstructedFrame> out;
    for (double t : ticks) {
        Image img(events.width, events.height);
        for (std::size_t i = 0; i < img.size(); ++i) img[i] = start_log + params.c * index.integrate(i, events.t0, t);
        out.push_back(ReconstructedFrame{t, std::move(img), Image()});
    }
    return out;
}

std::vector<SpadAggregateFrame> captured_windows(const std::vector<SpadAggregateFrame>& aggregates,
                                                 const FusionResult& result) {
    std::vector<SpadAggregateFrame> out;
    for (const auto& t : result.triggers) {
        if (t.captured) out.push_back(aggregates.at(static_cast<std::size_t>(t.window)));
    }
    return out;
}

SweepResult adaptive_sweep(const SimulatedData& data, const FusionConfig& base, const EvalSpec& spec) {
    const auto ticks = tick_times(data.events.t0, data.events.t1, base.publish_rate);
    const auto gt = ground_truth_sequence(data.clip, ticks);
    const double t_min = first_arrival(data.aggregates);
    SweepResult sweep;
    double best = -std::numeric_limits<double>::infinity();
    for (double u : spec.u_sweep) {
        FusionConfig cfg = base;
        cfg.adaptive = true;
        cfg.u_threshold = u;
        const FusionResult r = fuse(data.aggregates, data.events, data.params, cfg);
        SweepRow row{u, r.frames_used, static_cast<int>(data.aggregates.size()),
                     score_sequence(r.frames, gt, t_min).psnr_db};
        const bool within = row.frames_used <= spec.max_frame_fraction * row.frames_total + 1e-9;
        if (within && row.psnr_db > best) {
            best = row.psnr_db;
            sweep.selected = static_cast<int>(sweep.rows.size());
        }
        sweep.rows.push_back(row);
    }
    return sweep;
}

const MethodRow* find_row(const E2eReport& report, const std::string& method) {
    for (const auto& r : report.rows) {
        if (r.method == method) return &r;
    }
    return nullptr;
}

E2eReport run_e2e(const RunConfig& config) {
    json timing;
    auto t = std::chrono::steady_clock::now();
    const SimulatedData data = simulate(config);
    timing["simulate_s"] = seconds_since(t);
    if (data.aggregates.empty()) throw DataError("clip is shorter than one aggregate window");

    t = std::chrono::steady_clock::now();
    const auto ticks = tick_times(data.events.t0, data.events.t1, config.fusion.publish_rate);
    const auto gt = ground_truth_sequence(data.clip, ticks);
    const double t_min = first_arrival(data.aggregates);
    const int windows = static_cast<int>(data.aggregates.size());

    E2eReport report;
    report.output_dir = config.output_dir;

    const auto full = bandwidth(stream_descriptors(data, data.aggregates.size()));
    const BandwidthEntry& ev_bw = *full.find("events");
    const BandwidthEntry& agg_full = *full.find("spad_aggregate");
    auto fused_streams = [&](const FusionResult& r) {
        return std::vector<BandwidthEntry>{
            ev_bw, bandwidth(StreamDescriptor{"spad_aggregate", StreamKind::SpadAggregate, data.clip.width(),
                                              data.clip.height(), static_cast<std::uint64_t>(r.frames_used),
                                              data.clip.duration})};
    };

    report.rows.push_back(make_row("naive", score_sequence(naive_reconstruction(data.aggregates, data.params, ticks), gt, t_min),
                                   windows, windows, {agg_full}));
    const double start_log = mean(ground_truth_log(data.clip, data.events.t0));
    report.rows.push_back(make_row("events_only",
                                   score_sequence(events_only_reconstruction(data.events, start_log, data.params, ticks), gt, t_min),
                                   0, windows, {ev_bw}));
    timing["baselines_s"] = seconds_since(t);

    t = std::chrono::steady_clock::now();
    FusionConfig edi_cfg = config.fusion;
    edi_cfg.deblur = DeblurMethod::EDI;
    const FusionResult edi = fuse(data.aggregates, data.events, data.params, edi_cfg);
    MethodRow edi_row = make_row("edi_akf", score_sequence(edi.frames, gt, t_min), edi.frames_used, windows, fused_streams(edi));
    edi_row.u_threshold = config.fusion.adaptive ? config.fusion.u_threshold : 0.0;
    report.rows.push_back(edi_row);
    timing["edi_akf_s"] = seconds_since(t);

    t = std::chrono::steady_clock::now();
    FusionConfig nedi_cfg = config.fusion;
    nedi_cfg.deblur = DeblurMethod::NEDI;
    report.fusion = fuse(data.aggregates, data.events, data.params, nedi_cfg);
    MethodRow nedi_row = make_row("nedi_akf", score_sequence(report.fusion.frames, gt, t_min),
                                  report.fusion.frames_used, windows, fused_streams(report.fusion));
    nedi_row.u_threshold = edi_row.u_threshold;
    report.rows.push_back(nedi_row);
    if (nedi_cfg.adaptive) {
        FusionConfig full_cfg = nedi_cfg;
        full_cfg.adaptive = false;
        report.full_rate_psnr =
            score_sequence(fuse(data.aggregates, data.events, data.params, full_cfg).frames, gt, t_min).psnr_db;
    } else {
        report.full_rate_psnr = nedi_row.psnr_db;
    }
    timing["nedi_akf_s"] = seconds_since(t);

    if (!config.eval.u_sweep.empty()) {
        t = std::chrono::steady_clock::now();
        report.sweep = adaptive_sweep(data, nedi_cfg, config.eval);
        if (report.sweep.selected >= 0) {
            FusionConfig cfg = nedi_cfg;
            cfg.adaptive = true;
            cfg.u_threshold = report.sweep.rows[static_cast<std::size_t>(report.sweep.selected)].u_threshold;
            const FusionResult r = fuse(data.aggregates, data.events, data.params, cfg);
            MethodRow row = make_row("nedi_akf_adaptive", score_sequence(r.frames, gt, t_min), r.frames_used, windows,
                                     fused_streams(r));
            row.u_threshold = cfg.u_threshold;
            report.rows.push_back(row);
        }
        timing["sweep_s"] = seconds_since(t);
    }

    report.bandwidth = bandwidth(stream_descriptors(data, static_cast<std::uint64_t>(report.fusion.frames_used)));

    t = std::chrono::steady_clock::now();
    ArtifactSet artifacts(config.output_dir);
    write_dataset(data, config, artifacts, "dataset/");
    artifacts.write("methods.csv", table_csv(report.rows));
    artifacts.write("bandwidth.csv", bandwidth_csv(report.bandwidth));
    artifacts.write("triggers.csv", triggers_csv(report.fusion.triggers));
    if (!report.sweep.rows.empty()) artifacts.write("sweep.csv", sweep_csv(report.sweep));
    {
        io::ImageStack recon;
        for (const auto& f : report.fusion.frames) {
            recon.times.push_back(f.t);
            recon.images.push_back(f.log_intensity);
        }
        io::write_image_stack(artifacts.path("recon_log.bin"), recon, json{{"format", "log_stack"}, {"method", "nedi_akf"}});
        artifacts.add("recon_log.bin");
    }

    json manifest = base_manifest(config, "e2e");
    json bw = json::array();
    for (const auto& e : report.bandwidth.entries) bw.push_back(to_json(e));
    manifest["bandwidth"] = bw;
    json log = json::array();
    for (const auto& tr : report.fusion.triggers) {
        if (tr.captured) log.push_back({{"window", tr.window}, {"t_start", tr.t_start}, {"u", tr.u}});
    }
    manifest["trigger_log"] = log;
    manifest["decisions"] = report.fusion.triggers.size();
    manifest["warnings"] = report.fusion.warnings;
    manifest["full_rate_psnr_db"] = report.full_rate_psnr;
    if (report.sweep.selected >= 0) {
        manifest["selected_u_threshold"] = report.sweep.rows[static_cast<std::size_t>(report.sweep.selected)].u_threshold;
    }
    timing["write_s"] = seconds_since(t);
    finish_run(artifacts, manifest, timing);
    report.manifest = json::parse(io::read_file(artifacts.path("manifest.json")));
    return report;
}

json run_simulate(const RunConfig& config) {
    const auto t = std::chrono::steady_clock::now();
    const SimulatedData data = simulate(config);
    const json timing{{"simulate_s", seconds_since(t)}};
    ArtifactSet artifacts(config.output_dir);
    write_dataset(data, config, artifacts, "");
    json manifest = base_manifest(config, "simulate");
    json bw = json::array();
    for (const auto& e : bandwidth(stream_descriptors(data, data.aggregates.size())).entries) bw.push_back(to_json(e));
    manifest["bandwidth"] = bw;
    manifest["counts"] = {{"binary_frames", data.binary.size()},
                          {"aggregate_frames", data.aggregates.size()},
                          {"events", data.events.events.size()}};
    finish_run(artifacts, manifest, timing);
    return manifest;
}

json run_deblur(const RunConfig& config) {
    const auto t = std::chrono::steady_clock::now();
    const Dataset d = load_dataset(config.input_dir);
    const PixelEventIndex index(d.events);
    NediOptions options;
    options.tol = config.fusion.tol;
    io::ImageStack stack;
    std::size_t saturated = 0;
    for (const auto& a : d.aggregates) {
        const BlurObservation obs = make_observation(a, d.params);
        const LatentImage latent = config.fusion.deblur == DeblurMethod::NEDI ? nedi_deblur(obs, index, d.params, options)
                                                                              : edi_deblur(obs, index, d.params);
        for (auto s : latent.saturated.values()) saturated += s;
        stack.times.push_back(latent.f);
        stack.images.push_back(latent.n_latent);
    }
    ArtifactSet artifacts(config.output_dir);
    const std::string name = "latent_" + to_string(config.fusion.deblur) + ".bin";
    io::write_image_stack(artifacts.path(name), stack,
                          json{{"format", "latent_stack"}, {"method", to_string(config.fusion.deblur)},
                               {"units", "counts per T_bin"}, {"tol", config.fusion.tol}});
    artifacts.add(name);
    json manifest = base_manifest(config, "deblur");
    manifest["windows"] = stack.times.size();
    manifest["saturated_pixels"] = saturated;
    finish_run(artifacts, manifest, json{{"deblur_s", seconds_since(t)}});
    return manifest;
}

json run_fuse(const RunConfig& config) {
    const auto t = std::chrono::steady_clock::now();
    const Dataset d = load_dataset(config.input_dir);
    const FusionResult r = fuse(d.aggregates, d.events, d.params, config.fusion);
    ArtifactSet artifacts(config.output_dir);
    io::ImageStack logs;
    io::ImageStack vars;
    for (const auto& f : r.frames) {
        logs.times.push_back(f.t);
        logs.images.push_back(f.log_intensity);
        vars.times.push_back(f.t);
        vars.images.push_back(f.variance);
    }
    io::write_image_stack(artifacts.path("recon_log.bin"), logs, json{{"format", "log_stack"}});
    artifacts.add("recon_log.bin");
    io::write_image_stack(artifacts.path("recon_var.bin"), vars, json{{"format", "variance_stack"}});
    artifacts.add("recon_var.bin");
    artifacts.write("triggers.csv", triggers_csv(r.triggers));
    json manifest = base_manifest(config, "fuse");
    json log = json::array();
    for (const auto& tr : r.triggers) {
        if (tr.captured) log.push_back({{"window", tr.window}, {"t_start", tr.t_start}, {"u", tr.u}});
    }
    manifest["trigger_log"] = log;
    manifest["frames_used"] = r.frames_used;
    manifest["skipped_pixels"] = r.skipped_pixels;
    manifest["saturated_pixels"] = r.saturated_pixels;
    manifest["warnings"] = r.warnings;
    finish_run(artifacts, manifest, json{{"fuse_s", seconds_since(t)}});
    return manifest;
}

json run_eval(const RunConfig& config) {
    const Dataset d = load_dataset(config.input_dir);
    const fs::path recon_path = fs::path(config.output_dir) / "recon_log.bin";
    const io::ImageStack recon = io::read_image_stack(recon_path);
    if (d.gt_flux.times.empty()) throw DataError("dataset has no ground-truth frames");

    std::vector<ReconstructedFrame> gt;
    for (std::size_t k = 0; k < d.gt_flux.times.size(); ++k) {
        gt.push_back(ReconstructedFrame{d.gt_flux.times[k], log_floor(d.gt_flux.images[k]), Image()});
    }
    std::vector<ReconstructedFrame> fused;
    std::vector<double> ticks;
    for (std::size_t k = 0; k < recon.times.size(); ++k) {
        fused.push_back(ReconstructedFrame{recon.times[k], recon.images[k], Image()});
        ticks.push_back(recon.times[k]);
    }
    const double t_min = first_arrival(d.aggregates);
    const int windows = static_cast<int>(d.aggregates.size());
    std::vector<MethodRow> rows;
    MethodRow naive;
    naive.method = "naive";
    naive.psnr_db = score_sequence(naive_reconstruction(d.aggregates, d.params, ticks), gt, t_min).psnr_db;
    naive.frames_used = naive.frames_total = windows;
    rows.push_back(naive);
    MethodRow events;
    events.method = "events_only";
    events.psnr_db = score_sequence(events_only_reconstruction(d.events, mean(gt.front().log_intensity), d.params, ticks),
                                    gt, t_min).psnr_db;
    events.frames_total = windows;
    rows.push_back(events);
    MethodRow ours;
    ours.method = "fused";
    ours.psnr_db = score_sequence(fused, gt, t_min).psnr_db;
    ours.frames_total = windows;
    rows.push_back(ours);
    io::write_atomic(fs::path(config.output_dir) / "eval.csv", table_csv(rows));
    json out = json::array();
    for (const auto& r : rows) out.push_back({{"method", r.method}, {"psnr_db", r.psnr_db}});
    return json{{"pipeline", "eval"}, {"rows", out}};
}

json run_snr(const RunConfig& config, const fs::path& reference_csv) {
    const SnrParams p = SnrParams::from_sensor(config.sensor);
    const auto grid = reference_grid();
    const fs::path dir = config.output_dir;
    fs::create_directories(dir);
    auto curve = [&](SnrSensor sensor, double delta) {
        return snr_curve(SnrCurveRequest{grid, sensor, delta, p});
    };
    io::write_atomic(dir / "snr_camera.csv", curve_csv(curve(SnrSensor::Camera, 1.0)));
    io::write_atomic(dir / "snr_spad.csv", curve_csv(curve(SnrSensor::Spad, 1.0)));
    io::write_atomic(dir / "snr_event_30.csv", curve_csv(curve(SnrSensor::Event, 0.3)));
    io::write_atomic(dir / "snr_event_100.csv", curve_csv(curve(SnrSensor::Event, 1.0)));
    json out{{"pipeline", "snr"}, {"camera_cutoff", camera_cutoff(p)}};
    if (!reference_csv.empty() && fs::exists(reference_csv)) {
        const CalibrationReport rep = compare_to_reference(load_reference_curves(reference_csv), p);
        out["rmse_db"] = {{"camera", rep.rmse_camera},
                          {"spad", rep.rmse_spad},
                          {"event_30", rep.rmse_event_30},
                          {"event_100", rep.rmse_event_100}};
    }
    io::write_atomic(dir / "snr_report.json", out.dump(2) + "\n");
    return out;
}

MtfExperiment mtf_experiment(const RunConfig& config) {
    const SceneSpec& s = config.scene;
    const double illumination = s.illumination > 0.0 ? s.illumination : illumination_from_lux(s.lux);
    const SensorParams params = effective_params(config);
    const SiemensStar moving =
        make_siemens_star(s.spokes, s.width, s.height, s.contrast, illumination, s.duration, s.rotation_rate);
    // Static control: the same capture settings with the star held still.
    const SiemensStar still = make_siemens_star(s.spokes, s.width, s.height, s.contrast, illumination, s.duration, 0.0);
    const auto still_binary =
        simulate_binary_frames(still.clip, params, 0.0, s.duration, rng::derive(config.seed, "spad_static"));
    const auto still_aggregates = aggregate_all(still_binary, config.fusion.n_bins_per_frame, params);

    const auto binary = simulate_binary_frames(moving.clip, params, 0.0, s.duration, rng::derive(config.seed, "spad"));
    const auto aggregates = aggregate_all(binary, config.fusion.n_bins_per_frame, params);
    if (aggregates.empty()) throw DataError("clip is shorter than one aggregate window");
    const EventStream events = simulate_events(moving.clip, params, rng::derive(config.seed, "event"), config.events);

    MtfExperiment ex;
    const StarGeometry& g = moving.geometry;
    constexpr int kRadii = 6;
    for (int i = 0; i < kRadii; ++i) {
        const double r = g.radius * (0.9 - 0.6 * i / (kRadii - 1));
        ex.frequencies.push_back(star_frequency_at_radius(g.spokes, r));
    }

    const auto ticks = tick_times(0.0, s.duration, config.fusion.publish_rate);
    const double t_min = aggregates.front().t_end();
    FusionConfig fc = config.fusion;
    fc.deblur = DeblurMethod::NEDI;
    const FusionResult fused = fuse(aggregates, events, params, fc);
    const auto naive = naive_reconstruction(aggregates, params, ticks);
    const auto still_frames = naive_reconstruction(still_aggregates, params, ticks);

    ex.static_mtf.assign(ex.frequencies.size(), 0.0);
    ex.ours.assign(ex.frequencies.size(), 0.0);
    ex.naive.assign(ex.frequencies.size(), 0.0);
    int n = 0;
    for (std::size_t k = 0; k < ticks.size(); ++k) {
        if (ticks[k] < t_min - 1e-12) continue;
        // Measure in the star's own frame so the circles stay put.
        const auto ours = mtf_from_star(exp_image(fused.frames.at(k).log_intensity), g, ex.frequencies).mtf;
        const auto base = mtf_from_star(exp_image(naive.at(k).log_intensity), g, ex.frequencies).mtf;
        const auto ref = mtf_from_star(exp_image(still_frames.at(k).log_intensity), g, ex.frequencies).mtf;
        for (std::size_t i = 0; i < ex.frequencies.size(); ++i) {
            ex.static_mtf[i] += ref[i];
            ex.ours[i] += ours[i];
            ex.naive[i] += base[i];
        }
        ++n;
    }
    if (n == 0) throw DataError("no publication tick after the first SPAD window");
    for (std::size_t i = 0; i < ex.frequencies.size(); ++i) {
        ex.static_mtf[i] /= n;
        ex.ours[i] /= n;
        ex.naive[i] /= n;
    }
    return ex;
}

json run_mtf(const RunConfig& config) {
    const MtfExperiment ex = mtf_experiment(config);
    std::ostringstream csv;
    csv << "lines_per_mm,static,ours,naive\n" << std::setprecision(10);
    json rows = json::array();
    for (std::size_t i = 0; i < ex.frequencies.size(); ++i) {
        csv << ex.frequencies[i] << ',' << ex.static_mtf[i] << ',' << ex.ours[i] << ',' << ex.naive[i] << '\n';
        rows.push_back({{"lines_per_mm", ex.frequencies[i]},
                        {"static", ex.static_mtf[i]},
                        {"ours", ex.ours[i]},
                        {"naive", ex.naive[i]}});
    }
    io::write_atomic(fs::path(config.output_dir) / "mtf.csv", csv.str());
    return json{{"pipeline", "mtf"}, {"rows", rows}};
}

}  // namespace spadfuse
