#include <gtest/gtest.h>

#include <filesystem>

#include "spadfuse/errors.hpp"
#include "spadfuse/io.hpp"
#include "spadfuse/pipeline.hpp"

using namespace spadfuse;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("spadfuse_pipeline_" + name);
    fs::remove_all(p);
    return p;
}

RunConfig small_config(const fs::path& out, int windows = 4) {
    RunConfig c;
    c.output_dir = out.string();
    c.scene.width = 16;
    c.scene.height = 16;
    c.scene.duration = windows * 256 * c.sensor.T_bin;
    c.scene.vx = 400.0;
    return c;
}

void expect_checksums_match(const fs::path& dir, const json& manifest) {
    ASSERT_TRUE(manifest.contains("artifacts"));
    for (const auto& [rel, sum] : manifest.at("artifacts").items()) {
        EXPECT_EQ(io::sha256_file(dir / rel), sum.get<std::string>()) << rel;
    }
}

}  // namespace

TEST(RunConfigJson, RoundTrip) {
    RunConfig c;
    c.seed = 77;
    c.scene.preset = "siemens_star";
    c.fusion.adaptive = true;
    c.fusion.u_threshold = 12.5;
    c.eval.u_sweep = {1.0, 4.0};
    const RunConfig back = run_config_from_json(to_json(c));
    EXPECT_EQ(back.seed, 77u);
    EXPECT_EQ(back.scene.preset, "siemens_star");
    EXPECT_TRUE(back.fusion.adaptive);
    EXPECT_EQ(back.fusion.u_threshold, 12.5);
    EXPECT_EQ(back.eval.u_sweep, (std::vector<double>{1.0, 4.0}));
    EXPECT_EQ(to_json(back), to_json(c));
}

TEST(RunConfigJson, StrictParsing) {
    EXPECT_THROW(run_config_from_json(json{{"seed", 1}}), ConfigError);  // no schema_version
    EXPECT_THROW(run_config_from_json(json{{"schema_version", 99}}), ConfigError);
    EXPECT_THROW(run_config_from_json(json{{"schema_version", 1}, {"colour", "red"}}), ConfigError);
    EXPECT_THROW(run_config_from_json(json{{"schema_version", 1}, {"scene", {{"widht", 3}}}}), ConfigError);
    EXPECT_THROW(run_config_from_json(json{{"schema_version", 1}, {"scene", {{"width", 1}}}}), ConfigError);
    EXPECT_THROW(run_config_from_json(json{{"schema_version", 1}, {"scene", {{"preset", "moon"}}}}), ConfigError);
    EXPECT_THROW(run_config_from_json(json{{"schema_version", 1}, {"fusion", {{"n_bins_per_frame", 0}}}}), ConfigError);
    EXPECT_THROW(run_config_from_json(json{{"schema_version", 1}, {"seed", "one"}}), ConfigError);
    EXPECT_NO_THROW(run_config_from_json(json{{"schema_version", 1}}));
}

TEST(RunConfigJson, HashIgnoresDirectories) {
    RunConfig a;
    RunConfig b;
    b.output_dir = "elsewhere";
    b.input_dir = "data";
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.seed = 2;
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(RunConfigJson, MatchedRBar) {
    RunConfig c;
    EXPECT_DOUBLE_EQ(effective_params(c).R_bar, matched_r_bar(c.sensor, c.fusion.n_bins_per_frame));
    c.matched_r_bar = false;
    EXPECT_DOUBLE_EQ(effective_params(c).R_bar, c.sensor.R_bar);
}

TEST(Pipeline, TickTimes) {
    const auto t = tick_times(0.0, 0.0041, 1000.0);
    ASSERT_EQ(t.size(), 4u);
    EXPECT_DOUBLE_EQ(t.front(), 0.001);
    EXPECT_DOUBLE_EQ(t.back(), 0.004);
}

TEST(Simulate, StaticPresetHasNoEvents) {
    const fs::path out = scratch("static");
    RunConfig c = small_config(out);
    c.scene.preset = "static";
    const json m = run_simulate(c);
    EXPECT_EQ(m.at("counts").at("events"), 0);
    EXPECT_TRUE(io::read_events(out / "events.bin").events.empty());
    fs::remove_all(out);
}

TEST(Simulate, SameSeedSameChecksums) {
    const fs::path a = scratch("seed_a");
    const fs::path b = scratch("seed_b");
    const json ma = run_simulate(small_config(a));
    const json mb = run_simulate(small_config(b));
    EXPECT_EQ(ma.at("artifacts"), mb.at("artifacts"));
    expect_checksums_match(a, ma);
    RunConfig other = small_config(b);
    other.seed = 2;
    EXPECT_NE(run_simulate(other).at("artifacts").at("binary.bin"), ma.at("artifacts").at("binary.bin"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Simulate, DoublingDurationDoublesBinaryFrames) {
    const fs::path out = scratch("double");
    const json one = run_simulate(small_config(out, 2));
    const json two = run_simulate(small_config(out, 4));
    EXPECT_EQ(2 * one.at("counts").at("binary_frames").get<int>(), two.at("counts").at("binary_frames").get<int>());
    fs::remove_all(out);
}

TEST(E2e, ReportSchemaAndConsistency) {
    const fs::path out = scratch("e2e");
    RunConfig c = small_config(out);
    c.eval.u_sweep = {0.0, 1.0, 1e9};
    const E2eReport r = run_e2e(c);
    for (const char* m : {"naive", "events_only", "edi_akf", "nedi_akf"}) {
        const MethodRow* row = find_row(r, m);
        ASSERT_NE(row, nullptr) << m;
        EXPECT_TRUE(std::isfinite(row->psnr_db)) << m;
        EXPECT_GT(row->bits, 0u) << m;
    }
    // trigger log length equals the aggregate frame count of the bandwidth report
    const BandwidthEntry* agg = r.bandwidth.find("spad_aggregate");
    ASSERT_NE(agg, nullptr);
    EXPECT_EQ(r.manifest.at("trigger_log").size() * 16u * 16u, agg->samples);
    expect_checksums_match(out, r.manifest);
    EXPECT_TRUE(fs::exists(out / "methods.csv"));
    EXPECT_TRUE(fs::exists(out / "timing.json"));
    EXPECT_FALSE(r.manifest.at("artifacts").contains("timing.json"));
    ASSERT_EQ(r.sweep.rows.size(), 3u);
    EXPECT_EQ(r.sweep.rows[2].frames_used, 1);
    fs::remove_all(out);
}

TEST(E2e, AdaptiveAtZeroThresholdMatchesFixedRate) {
    const fs::path a = scratch("fixed");
    const fs::path b = scratch("adaptive");
    RunConfig fixed = small_config(a);
    RunConfig adaptive = small_config(b);
    adaptive.fusion.adaptive = true;
    adaptive.fusion.u_threshold = 0.0;
    EXPECT_EQ(find_row(run_e2e(fixed), "nedi_akf")->psnr_db, find_row(run_e2e(adaptive), "nedi_akf")->psnr_db);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(E2e, ManifestDeterministicAcrossDirectories) {
    const fs::path a = scratch("det_a");
    const fs::path b = scratch("det_b");
    run_e2e(small_config(a));
    run_e2e(small_config(b));
    EXPECT_EQ(io::read_file(a / "manifest.json"), io::read_file(b / "manifest.json"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Stages, DeblurFuseEvalChain) {
    const fs::path data = scratch("chain_data");
    const fs::path work = scratch("chain_work");
    run_simulate(small_config(data));
    RunConfig c = small_config(work);
    c.input_dir = data.string();
    const json d = run_deblur(c);
    expect_checksums_match(work, d);
    const json f = run_fuse(c);
    expect_checksums_match(work, f);
    const json e = run_eval(c);
    ASSERT_EQ(e.at("rows").size(), 3u);
    EXPECT_TRUE(fs::exists(work / "eval.csv"));

    RunConfig missing = small_config(work);
    EXPECT_THROW(run_fuse(missing), ConfigError);
    missing.input_dir = (data / "nope").string();
    EXPECT_THROW(run_fuse(missing), DataError);
    fs::remove_all(data);
    fs::remove_all(work);
}
