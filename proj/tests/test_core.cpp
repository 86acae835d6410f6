#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

#include "acdkit/core.hpp"
#include "acdkit/error.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace acdkit;

namespace {

void write_raw(const fs::path& p, const std::vector<float>& v) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void write_header(const fs::path& p, int h, int w, int bands, const std::string& raw, const std::string& dtype = "f32") {
    std::ofstream out(p);
    out << nlohmann::json{{"height", h}, {"width", w}, {"bands", bands}, {"dtype", dtype},
                          {"interleave", "bsq"}, {"raw", raw}}.dump();
}

void write_bytes(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

}  // namespace

TEST(HyperCube, RejectsNonFiniteAndBadLength) {
    EXPECT_THROW(HyperCube(2, 2, 1, {1, 2, 3}), ConfigError);
    EXPECT_THROW(HyperCube(0, 2, 1, {}), ConfigError);
    EXPECT_THROW(HyperCube(1, 1, 1, {std::numeric_limits<float>::quiet_NaN()}), ConfigError);
    EXPECT_THROW(HyperCube(1, 1, 1, {std::numeric_limits<float>::infinity()}), ConfigError);
}

TEST(IntensityMap, RejectsNegativeValues) {
    EXPECT_THROW(IntensityMap(1, 2, {0.0, -1e-9}), NumericalError);
    EXPECT_NO_THROW(IntensityMap(1, 2, {0.0, 3.0}));
}

TEST(ReadCube, ReadsHandWrittenPair) {
    const auto dir = test::scratch_dir("read_cube");
    write_raw(dir / "c.raw", {1, 2, 3, 4});
    write_header(dir / "c.json", 2, 2, 1, "c.raw");
    const HyperCube c = read_cube(dir / "c.json");
    EXPECT_EQ(c.height(), 2u);
    EXPECT_EQ(c.bands(), 1u);
    EXPECT_EQ(c.at(0, 0, 0), 1.0f);
    EXPECT_EQ(c.at(0, 1, 0), 2.0f);
    EXPECT_EQ(c.at(1, 0, 0), 3.0f);
    EXPECT_EQ(c.at(1, 1, 0), 4.0f);
}

TEST(ReadCube, SizeMismatchIsAnError) {
    const auto dir = test::scratch_dir("read_cube_mismatch");
    write_raw(dir / "c.raw", {1, 2, 3, 4});
    write_header(dir / "c.json", 2, 2, 2, "c.raw");
    EXPECT_THROW(read_cube(dir / "c.json"), ConfigError);
}

TEST(ReadCube, ErrorPaths) {
    const auto dir = test::scratch_dir("read_cube_errors");
    EXPECT_THROW(read_cube(dir / "missing.json"), IoError);

    write_raw(dir / "nan.raw", {1, std::numeric_limits<float>::quiet_NaN()});
    write_header(dir / "nan.json", 1, 2, 1, "nan.raw");
    EXPECT_THROW(read_cube(dir / "nan.json"), ConfigError);

    write_raw(dir / "d.raw", {1, 2});
    write_header(dir / "d.json", 1, 2, 1, "d.raw", "f64");
    EXPECT_THROW(read_cube(dir / "d.json"), ConfigError);

    write_header(dir / "noraw.json", 1, 2, 1, "absent.raw");
    EXPECT_THROW(read_cube(dir / "noraw.json"), IoError);
}

TEST(WriteCube, RawFileSizeAndRoundTrip) {
    const auto dir = test::scratch_dir("write_cube");
    const HyperCube small(1, 1, 3, {5, 6, 7});
    write_cube(small, dir / "small.json");
    EXPECT_EQ(fs::file_size(dir / "small.raw"), 12u);

    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        std::uniform_int_distribution<std::size_t> dim(1, 6);
        const HyperCube c = test::random_cube(dim(rng), dim(rng), dim(rng), rng);
        write_cube(c, dir / "c.json");
        EXPECT_EQ(read_cube(dir / "c.json"), c);
    }
}

TEST(WriteCube, UnwritablePathIsAnError) {
    EXPECT_THROW(write_cube(HyperCube(1, 1, 1, {1}), "/proc/acdkit_denied/c.json"), IoError);
}

TEST(Flatten, RowsAreSpectraInRowMajorOrder) {
    // BSQ: band 0 plane then band 1 plane.
    const HyperCube c(1, 2, 2, {1, 3, 2, 4});
    const PixelMatrix m = flatten(c);
    ASSERT_EQ(m.rows(), 2u);
    EXPECT_EQ(m(0, 0), 1.0);
    EXPECT_EQ(m(0, 1), 2.0);
    EXPECT_EQ(m(1, 0), 3.0);
    EXPECT_EQ(m(1, 1), 4.0);

    const HyperCube one(1, 1, 4, {9, 8, 7, 6});
    const PixelMatrix row = flatten(one);
    EXPECT_EQ(row.rows(), 1u);
    EXPECT_EQ(std::vector<double>(row.data()), (std::vector<double>{9, 8, 7, 6}));
}

TEST(Flatten, UnflattenIsInverse) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<std::size_t> dim(1, 7);
        const std::size_t h = dim(rng), w = dim(rng);
        const HyperCube c = test::random_cube(h, w, dim(rng), rng);
        EXPECT_EQ(unflatten(flatten(c), h, w), c);
    }
    const HyperCube c = test::random_cube(3, 5, 7, rng);
    const PixelMatrix m = flatten(c);
    EXPECT_EQ(m(2 * 5 + 4, 6), c.at(2, 4, 6));
}

TEST(ReadMask, MapsBytesToLabels) {
    const auto dir = test::scratch_dir("mask");
    write_bytes(dir / "m.pgm", std::string("P5\n2 2\n255\n") + std::string("\0\xff\0\0", 4));
    const GroundTruthMask m = read_mask(dir / "m.pgm");
    EXPECT_EQ(m.labels(), (std::vector<Label>{Label::background, Label::anomaly, Label::background, Label::background}));

    write_bytes(dir / "mid.pgm", std::string("P5\n# comment\n2 1\n255\n") + std::string("\x80\0", 2));
    EXPECT_TRUE(read_mask(dir / "mid.pgm").is_anomaly(0));
}

TEST(ReadMask, ErrorPaths) {
    const auto dir = test::scratch_dir("mask_errors");
    write_bytes(dir / "short.pgm", std::string("P5\n2 2\n255\n") + std::string("\0\xff", 2));
    EXPECT_THROW(read_mask(dir / "short.pgm"), ConfigError);
    write_bytes(dir / "ascii.pgm", "P2\n1 1\n255\n0\n");
    EXPECT_THROW(read_mask(dir / "ascii.pgm"), ConfigError);
    write_bytes(dir / "ok.pgm", std::string("P5\n2 1\n255\n") + std::string("\0\0", 2));
    EXPECT_THROW(read_mask(dir / "ok.pgm", Shape2{2, 1}), ConfigError);
    EXPECT_NO_THROW(read_mask(dir / "ok.pgm", Shape2{1, 2}));
    EXPECT_THROW(read_mask(dir / "absent.pgm"), IoError);
}

TEST(WriteMap, RoundTripsThroughSingleBandCube) {
    const auto dir = test::scratch_dir("map");
    const IntensityMap m(2, 3, {0, 0.5, 1, 2, 4, 8});
    write_map(m, dir / "m.json", {{"scoring", "per-pixel-mse"}});
    EXPECT_EQ(read_map(dir / "m.json"), m);
    std::ifstream in(dir / "m.json");
    EXPECT_EQ(nlohmann::json::parse(in).at("scoring"), "per-pixel-mse");
}
