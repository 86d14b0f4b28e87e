#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "spadfuse/errors.hpp"
#include "spadfuse/io.hpp"
#include "spadfuse/rng.hpp"

using namespace spadfuse;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("spadfuse_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path dir_;
};

Image random_image(int w, int h, std::uint64_t seed, double scale) {
    Image img(w, h);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = scale * rng::uniform(seed, 0, i);
    return img;
}

}  // namespace

TEST(Sha256, KnownVector) {
    EXPECT_EQ(io::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(io::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_F(IoTest, AtomicWriteLeavesOnlyTarget) {
    io::write_atomic(dir_ / "a.txt", "hello");
    io::write_atomic(dir_ / "a.txt", "world");
    EXPECT_EQ(io::read_file(dir_ / "a.txt"), "world");
    EXPECT_EQ(std::distance(fs::directory_iterator(dir_), fs::directory_iterator{}), 1);
    EXPECT_EQ(io::sha256_file(dir_ / "a.txt"), io::sha256_hex("world"));
}

TEST(SensorJson, RoundTripAndUnknownKey) {
    SensorParams p;
    p.q = 0.31;
    p.rho = 2e-6;
    const SensorParams back = io::sensor_params_from_json(io::to_json(p));
    EXPECT_EQ(back.q, 0.31);
    EXPECT_EQ(back.rho, 2e-6);
    EXPECT_EQ(back.tau, p.tau);
    EXPECT_THROW(io::sensor_params_from_json(nlohmann::json{{"quantum", 0.4}}), ConfigError);
    EXPECT_THROW(io::sensor_params_from_json(nlohmann::json{{"q", "high"}}), ConfigError);
}

TEST_F(IoTest, RawImageRoundTrip) {
    const Image img = random_image(9, 4, 3, 100.0);
    io::write_raw_image(dir_ / "scene.json", img);
    const Image back = io::read_raw_image(dir_ / "scene.json");
    ASSERT_TRUE(back.same_shape(img));
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_FLOAT_EQ(static_cast<float>(back[i]), static_cast<float>(img[i]));
}

TEST_F(IoTest, TrajectoryRoundTrip) {
    const Trajectory tr({Pose{0.0, 0.0, 0.0, 0.0}, Pose{0.5, 1.5, -2.0, 0.1}, Pose{1.0, 3.0, -4.0, 0.3}});
    io::write_trajectory(dir_ / "traj.json", tr);
    const Trajectory back = io::read_trajectory(dir_ / "traj.json");
    ASSERT_EQ(back.keys().size(), 3u);
    EXPECT_EQ(back.keys()[1].dx, 1.5);
    EXPECT_EQ(back.keys()[2].theta, 0.3);
}

TEST_F(IoTest, BinaryFramesRoundTrip) {
    SensorParams p;
    std::vector<SpadBinaryFrame> frames;
    for (int k = 0; k < 5; ++k) {
        SpadBinaryFrame f{k * p.T_bin, Grid<std::uint8_t>(11, 3)};
        for (std::size_t i = 0; i < f.bits.size(); ++i) f.bits[i] = rng::uniform(k, 1, i) < 0.4 ? 1 : 0;
        frames.push_back(f);
    }
    io::write_binary_frames(dir_ / "b.bin", frames, p);
    double t_bin = 0.0;
    const auto back = io::read_binary_frames(dir_ / "b.bin", &t_bin);
    EXPECT_EQ(t_bin, p.T_bin);
    ASSERT_EQ(back.size(), frames.size());
    for (std::size_t k = 0; k < frames.size(); ++k) {
        EXPECT_EQ(back[k].bits, frames[k].bits);
        EXPECT_NEAR(back[k].t_start, frames[k].t_start, 1e-15);
    }
}

TEST_F(IoTest, AggregatesRoundTrip) {
    SensorParams p;
    SpadAggregateFrame f{1.28e-3, 2.56e-3, 256, Grid<std::uint16_t>(5, 4)};
    for (std::size_t i = 0; i < f.counts.size(); ++i) f.counts[i] = static_cast<std::uint16_t>(i * 13);
    io::write_aggregates(dir_ / "a.bin", {f, f}, p);
    const auto back = io::read_aggregates(dir_ / "a.bin");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].counts, f.counts);
    EXPECT_EQ(back[0].n_bins, 256);
    EXPECT_DOUBLE_EQ(back[0].t_center, f.t_center);
}

TEST_F(IoTest, EventsRoundTripAtMicrosecondResolution) {
    EventStream s{20, 10, 0.0, 0.01, {}};
    s.events = {{1.0e-6, 3, 4, 1}, {2.4e-6, 19, 9, -1}, {0.0051, 0, 0, 1}};
    io::write_events(dir_ / "e.bin", s, "abc");
    const EventStream back = io::read_events(dir_ / "e.bin");
    EXPECT_EQ(back.width, 20);
    EXPECT_EQ(back.height, 10);
    ASSERT_EQ(back.events.size(), 3u);
    EXPECT_NEAR(back.events[1].t, 2e-6, 1e-12);
    EXPECT_EQ(back.events[1].polarity, -1);
    EXPECT_EQ(back.events[1].x, 19);
    EXPECT_EQ(fs::file_size(dir_ / "e.bin") - io::read_file(dir_ / "e.bin").find('\n') - 1, 3u * 16u);

    io::write_events_csv(dir_ / "e.csv", s);
    const EventStream csv = io::read_events_csv(dir_ / "e.csv", 20, 10, 0.0, 0.01);
    EXPECT_EQ(csv.events, s.events);
}

TEST_F(IoTest, TruncatedFileIsDataError) {
    EventStream s{4, 4, 0.0, 1.0, {{0.1, 1, 1, 1}, {0.2, 2, 2, 1}}};
    io::write_events(dir_ / "e.bin", s);
    std::string bytes = io::read_file(dir_ / "e.bin");
    bytes.resize(bytes.size() - 5);
    std::ofstream(dir_ / "t.bin", std::ios::binary) << bytes;
    EXPECT_THROW(io::read_events(dir_ / "t.bin"), DataError);
    EXPECT_THROW(io::read_events(dir_ / "missing.bin"), DataError);
}

TEST_F(IoTest, LatentAndStackRoundTrip) {
    LatentImage lat;
    lat.f = 0.5;
    lat.T = 0.01;
    lat.method = DeblurMethod::EDI;
    lat.tol = 1e-6;
    lat.n_latent = random_image(6, 5, 8, 40.0);
    lat.saturated = Grid<std::uint8_t>(6, 5);
    io::write_latent(dir_ / "l.bin", lat);
    const LatentImage back = io::read_latent(dir_ / "l.bin");
    EXPECT_EQ(back.method, DeblurMethod::EDI);
    EXPECT_EQ(back.f, 0.5);
    for (std::size_t i = 0; i < lat.n_latent.size(); ++i) EXPECT_FLOAT_EQ(back.n_latent[i], static_cast<float>(lat.n_latent[i]));

    io::ImageStack st{{0.001, 0.002}, {random_image(3, 3, 1, 1.0), random_image(3, 3, 2, 1.0)}};
    io::write_image_stack(dir_ / "s.bin", st, nlohmann::json{{"format", "test"}});
    nlohmann::json header;
    const io::ImageStack sb = io::read_image_stack(dir_ / "s.bin", &header);
    EXPECT_EQ(header.at("format"), "test");
    ASSERT_EQ(sb.times, st.times);
    EXPECT_FLOAT_EQ(sb.images[1](2, 2), static_cast<float>(st.images[1](2, 2)));
}
