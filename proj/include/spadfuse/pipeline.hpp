#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spadfuse/akf.hpp"
#include "spadfuse/events.hpp"
#include "spadfuse/metrics.hpp"
#include "spadfuse/params.hpp"
#include "spadfuse/scene.hpp"
#include "spadfuse/spad.hpp"

namespace spadfuse {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

struct SceneSpec {
    std::string preset = "office";  ///< office | siemens_star | static | file
    int width = 64;
    int height = 64;
    double duration = 0.04096;
    double lux = 100.0;
    double illumination = 0.0;  ///< photons/sec per unit radiance; overrides lux when > 0
    double vx = 150.0;          ///< pan velocity, px/s
    double vy = 60.0;
    double rotation_rate = 0.0;  ///< rad/s, siemens_star only
    int spokes = 16;
    double contrast = 0.8;
    std::string radiance_file;   ///< preset "file"
    std::string trajectory_file; ///< preset "file", optional
};

struct EvalSpec {
    std::vector<double> u_sweep;        ///< thresholds tried by the adaptive sweep
    double max_frame_fraction = 0.25;   ///< sweep selection bound
};

struct RunConfig {
    int schema_version = kSchemaVersion;
    std::string pipeline = "e2e";
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    std::string input_dir;  ///< dataset read by deblur, fuse and eval
    SceneSpec scene;
    SensorParams sensor;
    bool matched_r_bar = true;  ///< replace R_bar by 1/(q T_bin n_bins)
    FusionConfig fusion;
    EventSimOptions events;
    EvalSpec eval;
};

nlohmann::json to_json(const RunConfig& config);
/// Strict parser: unknown keys and a wrong schema_version raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
/// SHA-256 of the canonical JSON dump.
std::string config_hash(const RunConfig& config);

/// Sensor parameters with R_bar matched to the window length when requested.
SensorParams effective_params(const RunConfig& config);

SceneClip build_scene(const RunConfig& config);

struct SimulatedData {
    SceneClip clip;
    SensorParams params;
    std::vector<SpadBinaryFrame> binary;
    std::vector<SpadAggregateFrame> aggregates;
    EventStream events;
};

SimulatedData simulate(const RunConfig& config);

/// Ground-truth log flux, floored at kLogFloor.
Image ground_truth_log(const SceneClip& clip, double t);
std::vector<ReconstructedFrame> ground_truth_sequence(const SceneClip& clip, const std::vector<double>& times);

struct SequenceScore {
    double psnr_db = 0.0;  ///< mean over evaluated ticks
    double peak = 0.0;     ///< ground-truth log range over evaluated ticks
    int ticks = 0;
};

/// Log-domain PSNR averaged over frames at or after t_min. Frames are
/// matched to ground truth by time stamp.
SequenceScore score_sequence(const std::vector<ReconstructedFrame>& frames,
                             const std::vector<ReconstructedFrame>& ground_truth, double t_min);

/// Publication times used by fuse for the clip.
std::vector<double> tick_times(double t0, double t1, double rate);

/// Naive integration: each tick shows the aggregate window containing it.
std::vector<ReconstructedFrame> naive_reconstruction(const std::vector<SpadAggregateFrame>& aggregates,
                                                     const SensorParams& params, const std::vector<double>& ticks);

/// Events-only replay: integrate polarity from a flat start at
/// `start_log`, normally the mean ground-truth log intensity at t0.
std::vector<ReconstructedFrame> events_only_reconstruction(const EventStream& events, double start_log,
                                                           const SensorParams& params,
                                                           const std::vector<double>& ticks);

/// Aggregates of windows captured by a fusion run.
std::vector<SpadAggregateFrame> captured_windows(const std::vector<SpadAggregateFrame>& aggregates,
                                                 const FusionResult& result);

struct MethodRow {
    std::string method;
    double psnr_db = 0.0;
    int frames_used = 0;
    int frames_total = 0;
    std::uint64_t bits = 0;
    double bits_per_sec = 0.0;
    double khz_per_pixel = 0.0;
    double u_threshold = 0.0;
};

struct SweepRow {
    double u_threshold = 0.0;
    int frames_used = 0;
    int frames_total = 0;
    double psnr_db = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    int selected = -1;  ///< best PSNR among rows within max_frame_fraction
};

SweepResult adaptive_sweep(const SimulatedData& data, const FusionConfig& base, const EvalSpec& spec);

struct E2eReport {
    std::vector<MethodRow> rows;
    SweepResult sweep;
    BandwidthReport bandwidth;
    FusionResult fusion;  ///< the configured NEDI+AKF run
    double full_rate_psnr = 0.0;
    nlohmann::json manifest;
    std::filesystem::path output_dir;
};

const MethodRow* find_row(const E2eReport& report, const std::string& method);

/// Simulate, aggregate, deblur, fuse and evaluate. Writes methods.csv,
/// bandwidth.csv, the datasets and manifest.json under config.output_dir.
E2eReport run_e2e(const RunConfig& config);

/// Writes flux ground truth, binary frames, aggregates, events and a manifest.
nlohmann::json run_simulate(const RunConfig& config);

/// Deblurs every aggregate window of config.input_dir into latent images.
nlohmann::json run_deblur(const RunConfig& config);

/// Fuses a dataset directory and writes the reconstructed log frames.
nlohmann::json run_fuse(const RunConfig& config);

/// Scores a fuse output directory against the dataset ground truth.
nlohmann::json run_eval(const RunConfig& config);

/// SNR curves on the reference grid plus calibration RMSE.
nlohmann::json run_snr(const RunConfig& config, const std::filesystem::path& reference_csv);

struct MtfExperiment {
    std::vector<double> frequencies;
    std::vector<double> static_mtf;
    std::vector<double> ours;
    std::vector<double> naive;
};

/// Rotating Siemens star: naive windows of a still star, naive windows of
/// the rotating star, and NEDI+AKF on the rotating star.
MtfExperiment mtf_experiment(const RunConfig& config);
nlohmann::json run_mtf(const RunConfig& config);

}  // namespace spadfuse
