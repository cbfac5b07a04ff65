#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "nowcast/data.hpp"
#include "test_support.hpp"

using namespace nowcast;
using namespace nowcast::testing;

namespace {

FrameDataset tiny_dataset(std::int64_t T = 6, std::int64_t H = 16, std::int64_t W = 16) {
    FrameDataset ds;
    ds.frames = T;
    ds.dyn_channels = 2;
    ds.static_channels = 1;
    ds.height = H;
    ds.width = W;
    ds.cadence_minutes = 15;
    ds.channel_names = {"a", "b", "elev"};
    Rng rng(123);
    ds.dynamic.resize(static_cast<std::size_t>(T * 2 * H * W));
    for (auto& v : ds.dynamic) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    ds.statics.resize(static_cast<std::size_t>(H * W));
    for (auto& v : ds.statics) v = static_cast<float>(rng.uniform(0.0, 5.0));
    refresh_stats(ds);
    return ds;
}

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("stwf round-trip is bit-exact") {
    auto ds = tiny_dataset();
    const std::string path = tmp_path("roundtrip.stwf");
    write_stwf(ds, path);
    auto back = read_stwf(path);
    CHECK(back.frames == ds.frames);
    CHECK(back.dyn_channels == ds.dyn_channels);
    CHECK(back.static_channels == ds.static_channels);
    CHECK(back.height == ds.height);
    CHECK(back.width == ds.width);
    CHECK(back.cadence_minutes == ds.cadence_minutes);
    CHECK(back.channel_names == ds.channel_names);
    CHECK(std::memcmp(back.mean.data(), ds.mean.data(), ds.mean.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(back.stddev.data(), ds.stddev.data(), ds.stddev.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(back.dynamic.data(), ds.dynamic.data(), ds.dynamic.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(back.statics.data(), ds.statics.data(), ds.statics.size() * sizeof(float)) == 0);

    // writing the re-read dataset reproduces the file byte-for-byte
    const std::string path2 = tmp_path("roundtrip2.stwf");
    write_stwf(back, path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("empty-frame file loads and yields zero windows") {
    auto ds = tiny_dataset();
    ds.frames = 0;
    ds.dynamic.clear();
    const std::string path = tmp_path("empty.stwf");
    write_stwf(ds, path);
    auto back = read_stwf(path);
    CHECK(back.frames == 0);
    SampleLayout layout;
    layout.t_in = 2;
    layout.t_out = 2;
    CHECK(window_count(back, layout) == 0);
    std::filesystem::remove(path);
}

TEST_CASE("corrupted magic and truncation are rejected") {
    auto ds = tiny_dataset();
    const std::string path = tmp_path("corrupt.stwf");
    write_stwf(ds, path);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
    }
    CHECK_THROWS_AS(read_stwf(path), DataError);

    write_stwf(ds, path);
    const auto full = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full - 64);
    try {
        read_stwf(path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("window count arithmetic") {
    SampleLayout layout;
    layout.t_in = 4;
    layout.t_out = 32;
    auto ds = tiny_dataset(36);
    CHECK(window_count(ds, layout) == 1);
    ds.frames = 40;
    ds.dynamic.resize(static_cast<std::size_t>(40 * 2 * 16 * 16));
    CHECK(window_count(ds, layout) == 5);
    ds.frames = 35;
    CHECK(window_count(ds, layout) == 0);
}

TEST_CASE("every frame is covered by some window") {
    auto ds = tiny_dataset(9);
    SampleLayout layout;
    layout.t_in = 3;
    layout.t_out = 2;
    const auto starts = window_starts(ds, layout);
    REQUIRE(!starts.empty());
    std::vector<bool> covered(static_cast<std::size_t>(ds.frames), false);
    for (std::int64_t s : starts)
        for (std::int64_t t = s; t < s + layout.t_in + layout.t_out; ++t)
            covered[static_cast<std::size_t>(t)] = true;
    for (bool c : covered) CHECK(c);
}

TEST_CASE("reference channel arithmetic: 19 in, 128 out") {
    SampleLayout layout;
    layout.t_in = 4;
    layout.t_out = 32;
    CHECK(layout.in_channels(4, 3) == 19);
    CHECK(layout.out_channels(4) == 128);
    layout.statics_per_frame = true;
    CHECK(layout.in_channels(4, 3) == 28);  // 4 frames x 7 planes
}

TEST_CASE("assembled planes land where the layout says") {
    auto ds = tiny_dataset(8);
    // identity normalization so values pass through untouched
    ds.mean = {0.0f, 0.0f};
    ds.stddev = {1.0f, 1.0f};
    SampleLayout layout;
    layout.t_in = 3;
    layout.t_out = 2;
    const std::int64_t hw = ds.plane_size();

    auto s = assemble_sample<float>(ds, 1, layout);
    CHECK(s.input.shape() == Shape{3 * 2 + 1, 16, 16});
    CHECK(s.target.shape() == Shape{2 * 2, 16, 16});
    // input plane (t, c) = frame(start + t, c)
    for (int t = 0; t < 3; ++t)
        for (std::int64_t c = 0; c < 2; ++c)
            CHECK(std::memcmp(s.input.data() + (t * 2 + c) * hw, ds.frame(1 + t, c),
                              sizeof(float) * static_cast<std::size_t>(hw)) == 0);
    // target plane (lead, c) = frame(start + t_in - 1 + lead, c)
    for (int lead = 1; lead <= 2; ++lead)
        for (std::int64_t c = 0; c < 2; ++c)
            CHECK(std::memcmp(s.target.data() + ((lead - 1) * 2 + c) * hw,
                              ds.frame(1 + 3 - 1 + lead, c),
                              sizeof(float) * static_cast<std::size_t>(hw)) == 0);

    // statics occupy the trailing planes, min-max scaled to [0,1]
    const float* last = s.input.data() + 6 * hw;
    float lo = 1e9f, hi = -1e9f;
    for (std::int64_t i = 0; i < hw; ++i) {
        lo = std::min(lo, last[i]);
        hi = std::max(hi, last[i]);
    }
    CHECK(lo == doctest::Approx(0.0f));
    CHECK(hi == doctest::Approx(1.0f));
}

TEST_CASE("statics_per_frame interleaves the static planes") {
    auto ds = tiny_dataset(8);
    ds.mean = {0.0f, 0.0f};
    ds.stddev = {1.0f, 1.0f};
    SampleLayout layout;
    layout.t_in = 2;
    layout.t_out = 1;
    layout.statics_per_frame = true;
    const std::int64_t hw = ds.plane_size();
    auto s = assemble_sample<float>(ds, 0, layout);
    CHECK(s.input.shape() == Shape{2 * 3, 16, 16});
    // frame block = [dyn0, dyn1, static0]; dynamic planes pass through
    CHECK(std::memcmp(s.input.data() + 0 * hw, ds.frame(0, 0), sizeof(float) * static_cast<std::size_t>(hw)) == 0);
    CHECK(std::memcmp(s.input.data() + 1 * hw, ds.frame(0, 1), sizeof(float) * static_cast<std::size_t>(hw)) == 0);
    CHECK(std::memcmp(s.input.data() + 3 * hw, ds.frame(1, 0), sizeof(float) * static_cast<std::size_t>(hw)) == 0);
}

TEST_CASE("selected target channels restrict the target planes") {
    auto ds = tiny_dataset(8);
    ds.mean = {0.0f, 0.0f};
    ds.stddev = {1.0f, 1.0f};
    SampleLayout layout;
    layout.t_in = 2;
    layout.t_out = 3;
    layout.target_channels = {1};
    auto s = assemble_sample<float>(ds, 0, layout);
    CHECK(s.target.shape() == Shape{3, 16, 16});
    const std::int64_t hw = ds.plane_size();
    for (int lead = 1; lead <= 3; ++lead)
        CHECK(std::memcmp(s.target.data() + (lead - 1) * hw, ds.frame(2 - 1 + lead, 1),
                          sizeof(float) * static_cast<std::size_t>(hw)) == 0);
}

TEST_CASE("constant dataset normalizes to all zeros") {
    auto ds = tiny_dataset(6);
    for (auto& v : ds.dynamic) v = 3.25f;
    refresh_stats(ds);
    CHECK(ds.mean[0] == doctest::Approx(3.25f));
    CHECK(ds.stddev[0] == doctest::Approx(1e-6f));
    SampleLayout layout;
    layout.t_in = 2;
    layout.t_out = 2;
    auto s = assemble_sample<float>(ds, 0, layout);
    for (std::int64_t p = 0; p < 4; ++p)  // the dynamic planes
        for (std::int64_t i = 0; i < ds.plane_size(); ++i)
            CHECK(s.input.data()[p * ds.plane_size() + i] == 0.0f);
}

TEST_CASE("compute_stats hand values and permutation invariance") {
    FrameDataset ds;
    ds.frames = 2;
    ds.dyn_channels = 1;
    ds.static_channels = 0;
    ds.height = 16;
    ds.width = 16;
    ds.channel_names = {"x"};
    ds.dynamic.resize(2 * 256);
    for (std::size_t i = 0; i < 256; ++i) ds.dynamic[i] = 0.0f;
    for (std::size_t i = 256; i < 512; ++i) ds.dynamic[i] = 2.0f;
    auto [m, sd] = compute_stats(ds, 0);
    CHECK(m == doctest::Approx(1.0f));
    CHECK(sd == doctest::Approx(1.0f));

    // swapping the frames changes nothing
    std::swap_ranges(ds.dynamic.begin(), ds.dynamic.begin() + 256, ds.dynamic.begin() + 256);
    auto [m2, sd2] = compute_stats(ds, 0);
    CHECK(m2 == m);
    CHECK(sd2 == sd);
}

TEST_CASE("normalized dynamic channels have near-zero mean and unit std") {
    SynthConfig sc;
    sc.seed = 71;
    sc.frames = 60;
    sc.height = 24;
    sc.width = 24;
    auto ds = gen_synthetic(sc);
    for (std::int64_t c = 0; c < ds.dyn_channels; ++c) {
        double sum = 0, sq = 0;
        const std::int64_t n = ds.frames * ds.plane_size();
        for (std::int64_t t = 0; t < ds.frames; ++t) {
            const float* p = ds.frame(t, c);
            for (std::int64_t i = 0; i < ds.plane_size(); ++i) {
                const double z = (p[i] - ds.mean[static_cast<std::size_t>(c)]) /
                                 ds.stddev[static_cast<std::size_t>(c)];
                sum += z;
                sq += z * z;
            }
        }
        const double mean = sum / static_cast<double>(n);
        const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
        CHECK(std::abs(mean) < 1e-4);
        CHECK(sd == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("synthetic generation is deterministic per seed") {
    SynthConfig sc;
    sc.seed = 5;
    sc.frames = 10;
    auto a = gen_synthetic(sc);
    auto b = gen_synthetic(sc);
    CHECK(std::memcmp(a.dynamic.data(), b.dynamic.data(), a.dynamic.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(a.statics.data(), b.statics.data(), a.statics.size() * sizeof(float)) == 0);
    sc.seed = 6;
    auto c = gen_synthetic(sc);
    CHECK(std::memcmp(a.dynamic.data(), c.dynamic.data(), a.dynamic.size() * sizeof(float)) != 0);
}

TEST_CASE("zero velocity freezes the sequence") {
    SynthConfig sc;
    sc.seed = 9;
    sc.frames = 8;
    sc.velocity_range = 0.0;
    auto ds = gen_synthetic(sc);
    const std::size_t frame_bytes =
        static_cast<std::size_t>(ds.dyn_channels * ds.plane_size()) * sizeof(float);
    for (std::int64_t t = 1; t < ds.frames; ++t)
        CHECK(std::memcmp(ds.frame(0, 0), ds.frame(t, 0), frame_bytes) == 0);
}

TEST_CASE("blob mass is conserved under advection") {
    SynthConfig sc;
    sc.seed = 13;
    sc.frames = 40;
    sc.height = 32;
    sc.width = 32;
    sc.velocity_range = 1.5;
    auto ds = gen_synthetic(sc);
    double first = 0;
    for (std::int64_t t = 0; t < ds.frames; ++t) {
        double mass = 0;
        const float* p = ds.frame(t, 0);
        for (std::int64_t i = 0; i < ds.plane_size(); ++i) mass += p[i];
        if (t == 0) first = mass;
        CHECK(std::abs(mass - first) / first < 0.01);
    }
}

TEST_CASE("time slicing and splits preserve bookkeeping") {
    auto ds = tiny_dataset(10);
    auto mid = slice_time(ds, 3, 7);
    CHECK(mid.frames == 4);
    CHECK(std::memcmp(mid.frame(0, 0), ds.frame(3, 0),
                      sizeof(float) * static_cast<std::size_t>(2 * ds.plane_size())) == 0);
    CHECK(mid.statics == ds.statics);
    CHECK(mid.mean == ds.mean);

    SplitFractions f;
    f.train = 0.5;
    f.valid = 0.2;
    auto splits = split_dataset(ds, f);
    CHECK(splits.train.frames == 5);
    CHECK(splits.valid.frames == 2);
    CHECK(splits.test.frames == 3);
    CHECK_THROWS_AS(split_dataset(ds, SplitFractions{0.8, 0.4}), ConfigError);
}

TEST_CASE("out-of-range window start is rejected") {
    auto ds = tiny_dataset(6);
    SampleLayout layout;
    layout.t_in = 2;
    layout.t_out = 2;
    CHECK_THROWS_AS(assemble_sample<float>(ds, 5, layout), DimensionError);
    CHECK_THROWS_AS(assemble_sample<float>(ds, -1, layout), DimensionError);
}
