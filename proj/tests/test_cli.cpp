#include <gtest/gtest.h>

#include <chrono>
#include <fstream>
#include <random>
#include <sstream>

#include "acdkit/cli.hpp"
#include "acdkit/core.hpp"
#include "acdkit/synth.hpp"
#include "test_util.hpp"

using namespace acdkit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = acdkit::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

std::string read_text(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

json read_json_file(const fs::path& p) { return json::parse(read_text(p)); }

/// 32x32x16 scene with four 3x3 anomalies, written through `synth`.
fs::path make_scene(const fs::path& dir, synth::Condition c = synth::Condition::affine) {
    synth::SceneSpec s;
    s.height = s.width = 32;
    s.bands = 16;
    s.condition = c;
    s.condition_strength = 0.2;
    s.noise_sigma = 0.01;
    s.anomalies = synth::grid_anomalies(32, 32, 4, 3);
    s.seed = 9;
    write_text(dir / "spec.json", synth::describe(s).dump());
    const Outcome o = run_cli({"synth", (dir / "spec.json").string(), (dir / "scene").string()});
    EXPECT_EQ(o.code, 0) << o.err;
    return dir / "scene";
}

}  // namespace

TEST(CliSynth, WritesSceneFilesAndIsDeterministic) {
    const auto dir = test::scratch_dir("cli_synth");
    const fs::path scene = make_scene(dir);
    for (const char* f : {"x.json", "x.raw", "y.json", "y.raw", "mask.pgm", "scene.json", "manifest.json"})
        EXPECT_TRUE(fs::exists(scene / f)) << f;
    EXPECT_EQ(read_mask(scene / "mask.pgm").anomaly_count(), 36u);

    ASSERT_EQ(run_cli({"synth", (dir / "spec.json").string(), (dir / "again").string()}).code, 0);
    const json a = read_json_file(scene / "manifest.json");
    const json b = read_json_file(dir / "again" / "manifest.json");
    EXPECT_EQ(a.at("outputs"), b.at("outputs"));
    EXPECT_EQ(a.at("outputs").size(), 6u);
}

TEST(CliSynth, ErrorExitCodes) {
    const auto dir = test::scratch_dir("cli_synth_err");
    write_text(dir / "bad.json", "{ not json");
    Outcome o = run_cli({"synth", (dir / "bad.json").string(), (dir / "out").string()});
    EXPECT_EQ(o.code, 1);
    EXPECT_FALSE(o.err.empty());

    write_text(dir / "invalid.json", R"({"height": 8, "width": 8, "bands": 4, "n_endmembers": 1})");
    EXPECT_EQ(run_cli({"synth", (dir / "invalid.json").string(), (dir / "out").string()}).code, 1);

    EXPECT_EQ(run_cli({"synth", (dir / "missing.json").string(), (dir / "out").string()}).code, 2);
    EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
}

TEST(CliDetect, DimensionMismatchIsConfigError) {
    const auto dir = test::scratch_dir("cli_mismatch");
    std::mt19937_64 rng(1);
    write_cube(test::random_cube(4, 5, 3, rng), dir / "a.json");
    write_cube(test::random_cube(4, 6, 3, rng), dir / "b.json");
    const Outcome o = run_cli({"detect", "cc", (dir / "a.json").string(), (dir / "b.json").string(), (dir / "o").string()});
    EXPECT_EQ(o.code, 1);
    EXPECT_NE(o.err.find("dimensions"), std::string::npos) << o.err;
}

TEST(CliDetect, DiffRxOnIdenticalCubesIsZero) {
    const auto dir = test::scratch_dir("cli_diffrx");
    std::mt19937_64 rng(2);
    write_cube(test::random_cube(6, 6, 4, rng), dir / "a.json");
    const Outcome o = run_cli({"detect", "diffrx", (dir / "a.json").string(), (dir / "a.json").string(),
                           (dir / "o").string()});
    ASSERT_EQ(o.code, 0) << o.err;
    const IntensityMap m = read_map(dir / "o" / "intensity.json");
    for (double v : m.values()) EXPECT_EQ(v, 0.0);
    EXPECT_NE(o.out.find("map="), std::string::npos);
}

TEST(CliDetect, SingularCovarianceWithoutRidgeIsNumericalError) {
    const auto dir = test::scratch_dir("cli_singular");
    std::mt19937_64 rng(3);
    const HyperCube a = test::random_cube(6, 6, 3, rng);
    std::vector<float> data = a.data();
    std::normal_distribution<float> n(0.0f, 1.0f);
    for (std::size_t i = 36; i < data.size(); ++i) data[i] += n(rng);  // band 0 unchanged
    write_cube(a, dir / "a.json");
    write_cube(HyperCube(6, 6, 3, data), dir / "b.json");
    const Outcome o = run_cli({"detect", "diffrx", (dir / "a.json").string(), (dir / "b.json").string(),
                           (dir / "o").string(), "--set", "ridge=0"});
    EXPECT_EQ(o.code, 3) << o.err;
}

TEST(CliDetect, UnknownMethodOrKeyIsConfigError) {
    const auto dir = test::scratch_dir("cli_unknown");
    std::mt19937_64 rng(4);
    write_cube(test::random_cube(4, 4, 3, rng), dir / "a.json");
    const std::string a = (dir / "a.json").string();
    EXPECT_EQ(run_cli({"detect", "svm", a, a, (dir / "o").string()}).code, 1);
    EXPECT_EQ(run_cli({"detect", "cc", a, a, (dir / "o").string(), "--set", "bogus=1"}).code, 1);
    write_text(dir / "cfg.json", R"({"epochs": -3})");
    EXPECT_EQ(run_cli({"detect", "acda", a, a, (dir / "o").string(), "-c", (dir / "cfg.json").string()}).code, 1);
}

TEST(CliDetect, AcdaSmokeRunWritesArtifactsQuickly) {
    const auto dir = test::scratch_dir("cli_acda");
    const fs::path scene = make_scene(dir);
    const auto start = std::chrono::steady_clock::now();
    const Outcome o = run_cli({"detect", "acda", (scene / "x.json").string(), (scene / "y.json").string(),
                           (dir / "o").string(), "--set", "epochs=20", "--save-directional", "--save-params"});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ASSERT_EQ(o.code, 0) << o.err;
    EXPECT_LT(secs, 60.0);
    for (const char* f : {"intensity.json", "intensity.raw", "usfa.json", "loss_history.csv", "samples.csv",
                          "manifest.json", "run0_fwd.json", "run9_fused.json"})
        EXPECT_TRUE(fs::exists(dir / "o" / f)) << f;
    const json man = read_json_file(dir / "o" / "manifest.json");
    EXPECT_EQ(man.at("config").at("epochs"), 20);
    EXPECT_EQ(man.at("seeds").size(), 10u);  // one entry per repeat

    // Reusing the saved predictors reproduces the map without training.
    const Outcome again = run_cli({"detect", "acda", (scene / "x.json").string(), (scene / "y.json").string(),
                               (dir / "o2").string(), "--set", "epochs=20", "--load-params",
                               (dir / "o" / "params").string()});
    ASSERT_EQ(again.code, 0) << again.err;
    EXPECT_EQ(read_map(dir / "o" / "intensity.json"), read_map(dir / "o2" / "intensity.json"));
}

TEST(CliDetect, SequentialManifestsMatchExceptWallClock) {
    const auto dir = test::scratch_dir("cli_manifest");
    const fs::path scene = make_scene(dir);
    const std::string x = (scene / "x.json").string(), y = (scene / "y.json").string();
    for (const char* out : {"a", "b"}) {
        ASSERT_EQ(run_cli({"detect", "acda", x, y, (dir / out).string(), "--sequential", "--set", "epochs=5",
                       "repeats=2"})
                      .code,
                  0);
    }
    json a = read_json_file(dir / "a" / "manifest.json");
    json b = read_json_file(dir / "b" / "manifest.json");
    a.erase("wall_clock_seconds");
    b.erase("wall_clock_seconds");
    EXPECT_EQ(a, b);
    for (const char* m : {"cc", "ce"}) {
        ASSERT_EQ(run_cli({"detect", m, x, y, (dir / (std::string(m) + "1")).string()}).code, 0);
        ASSERT_EQ(run_cli({"detect", m, x, y, (dir / (std::string(m) + "2")).string()}).code, 0);
        EXPECT_EQ(read_json_file(dir / (std::string(m) + "1") / "manifest.json").at("outputs"),
                  read_json_file(dir / (std::string(m) + "2") / "manifest.json").at("outputs"));
    }
}

TEST(CliEval, PerfectAndConstantMaps) {
    const auto dir = test::scratch_dir("cli_eval");
    const GroundTruthMask truth(2, 2, {Label::anomaly, Label::background, Label::background, Label::anomaly});
    write_mask(truth, dir / "mask.pgm");
    write_map(IntensityMap(2, 2, {3, 0, 1, 2}), dir / "perfect.json", {});
    write_map(IntensityMap(2, 2, {1, 1, 1, 1}), dir / "flat.json", {});

    Outcome o = run_cli({"eval", (dir / "perfect.json").string(), (dir / "mask.pgm").string(), (dir / "p").string()});
    ASSERT_EQ(o.code, 0) << o.err;
    EXPECT_NE(o.out.find("auc=1.000000"), std::string::npos);
    EXPECT_NE(read_text(dir / "p" / "roc.csv").find("# auc=1.000000"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "p" / "stretched.pgm"));

    o = run_cli({"eval", (dir / "flat.json").string(), (dir / "mask.pgm").string(), (dir / "f").string()});
    EXPECT_NE(o.out.find("auc=0.500000"), std::string::npos);

    write_mask(GroundTruthMask(2, 2, std::vector<Label>(4, Label::background)), dir / "empty.pgm");
    EXPECT_EQ(run_cli({"eval", (dir / "flat.json").string(), (dir / "empty.pgm").string(), (dir / "e").string()}).code, 1);
    write_map(IntensityMap(1, 4, {1, 2, 3, 4}), dir / "wide.json", {});
    EXPECT_EQ(run_cli({"eval", (dir / "wide.json").string(), (dir / "mask.pgm").string(), (dir / "e").string()}).code, 1);
}

TEST(CliEval, CsvAucMatchesStdout) {
    const auto dir = test::scratch_dir("cli_eval_csv");
    const fs::path scene = make_scene(dir);
    ASSERT_EQ(run_cli({"detect", "cc", (scene / "x.json").string(), (scene / "y.json").string(), (dir / "d").string()})
                  .code,
              0);
    const Outcome o =
        run_cli({"eval", (dir / "d" / "intensity.json").string(), (scene / "mask.pgm").string(), (dir / "e").string()});
    ASSERT_EQ(o.code, 0) << o.err;
    const std::string auc = o.out.substr(o.out.find("auc=") + 4, 8);
    EXPECT_NE(read_text(dir / "e" / "roc.csv").find("# auc=" + auc), std::string::npos);
}

TEST(CliSweep, LowerTriangularTableLayout) {
    const auto dir = test::scratch_dir("cli_sweep");
    const fs::path scene = make_scene(dir);
    write_text(dir / "grid.json", R"({"h1": [6, 8], "h2": [2, 4, 6], "epochs": 10, "repeats": 1})");
    const Outcome o = run_cli({"sweep", (scene / "x.json").string(), (scene / "y.json").string(),
                           (scene / "mask.pgm").string(), (dir / "grid.json").string(), (dir / "s").string(),
                           "--sequential"});
    ASSERT_EQ(o.code, 0) << o.err;
    std::istringstream csv(read_text(dir / "s" / "sweep.csv"));
    std::vector<std::string> lines;
    for (std::string l; std::getline(csv, l);) lines.push_back(l);
    ASSERT_EQ(lines.size(), 4u);
    EXPECT_EQ(lines[0], "h2\\h1,8,6");
    EXPECT_EQ(lines[1].substr(0, 4), "6,0.");
    EXPECT_EQ(lines[1].substr(lines[1].size() - 2), ",-");
    EXPECT_EQ(lines[2].substr(0, 2), "4,");
    EXPECT_EQ(lines[3].substr(0, 2), "2,");
    std::size_t cells = 0;
    for (std::size_t r = 1; r < 4; ++r) {
        std::istringstream row(lines[r]);
        std::string cell;
        std::getline(row, cell, ',');
        while (std::getline(row, cell, ',')) {
            if (cell == "-") continue;
            const double auc = std::stod(cell);
            EXPECT_GE(auc, 0.0);
            EXPECT_LE(auc, 1.0);
            ++cells;
        }
    }
    EXPECT_EQ(cells, 5u);
    EXPECT_TRUE(fs::exists(dir / "s" / "manifest.json"));
}
