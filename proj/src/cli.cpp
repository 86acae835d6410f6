#include "acdkit/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include <CLI11.hpp>

#include "acdkit/baselines.hpp"
#include "acdkit/error.hpp"
#include "acdkit/eval.hpp"
#include "acdkit/synth.hpp"

namespace acdkit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + path.string());
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

std::string fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

/// Collects artifacts and writes manifest.json last.
class Manifest {
public:
    Manifest(std::string command, fs::path out_dir) : command_(std::move(command)), out_dir_(std::move(out_dir)) {}

    void config(json c) { config_ = std::move(c); }
    void seeds(json s) { seeds_ = std::move(s); }
    void input(const fs::path& p) { inputs_[p.string()] = file_digest(p); }
    /// Registers a file written under the output directory.
    void output(const fs::path& relative) { outputs_.push_back(relative); }

    void write(Clock::time_point start) const {
        json outputs = json::object();
        for (const fs::path& rel : outputs_) outputs[rel.generic_string()] = file_digest(out_dir_ / rel);
        const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
        write_json(json{{"command", command_},
                        {"config", config_},
                        {"inputs", inputs_},
                        {"outputs", outputs},
                        {"seeds", seeds_},
                        {"toolkit_version", kVersion},
                        {"wall_clock_seconds", seconds}},
                   out_dir_ / "manifest.json");
    }

private:
    std::string command_;
    fs::path out_dir_;
    json config_ = json::object();
    json seeds_ = json::array();
    json inputs_ = json::object();
    std::vector<fs::path> outputs_;
};

json detect_defaults() {
    return json{{"h1", 0},
                {"h2", 0},
                {"output_activation", "linear"},
                {"epochs", 200},
                {"batch_size", 256},
                {"learning_rate", 1e-3},
                {"l2_lambda", 1e-3},
                {"sample_count", 0},
                {"repeats", 10},
                {"seed", 0},
                {"usfa_ridge", -1.0},
                {"ridge", -1.0}};
}

json merged_config(const std::string& config_path, const std::vector<std::string>& overrides) {
    json cfg = detect_defaults();
    if (!config_path.empty()) {
        const json user = read_json(config_path);
        if (!user.is_object()) throw ConfigError("config must be a JSON object");
        for (const auto& [k, v] : user.items()) {
            if (!cfg.contains(k)) throw ConfigError("unknown config key '" + k + "'");
            cfg[k] = v;
        }
    }
    apply_overrides(cfg, overrides);
    return cfg;
}

void check_pair(const HyperCube& x, const HyperCube& y) {
    if (x.height() != y.height() || x.width() != y.width() || x.bands() != y.bands()) {
        throw ConfigError("cube dimensions differ: " + std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                          "x" + std::to_string(x.bands()) + " vs " + std::to_string(y.height()) + "x" +
                          std::to_string(y.width()) + "x" + std::to_string(y.bands()));
    }
}

void write_loss_csv(const acda::AcdaResult& r, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "repeat,direction,epoch,loss\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < r.runs.size(); ++i) {
        for (std::size_t e = 0; e < r.runs[i].training_loss_fwd.size(); ++e)
            out << i << ",fwd," << e << ',' << r.runs[i].training_loss_fwd[e] << '\n';
        for (std::size_t e = 0; e < r.runs[i].training_loss_bwd.size(); ++e)
            out << i << ",bwd," << e << ',' << r.runs[i].training_loss_bwd[e] << '\n';
    }
}

void write_index_csv(const std::vector<std::size_t>& indices, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "pixel_index\n";
    for (std::size_t i : indices) out << i << '\n';
}

struct DetectOptions {
    std::string method;
    std::string x_path, y_path, out_dir, config_path, load_params;
    std::vector<std::string> overrides;
    bool sequential = false;
    bool save_directional = false;
    bool save_params = false;
};

int cmd_synth(const std::string& spec_path, const std::string& out_dir, std::ostream& out) {
    const auto start = Clock::now();
    const synth::SceneSpec spec = synth::spec_from_json(read_json(spec_path));
    const synth::Scene scene = synth::generate(spec);
    const fs::path dir(out_dir);
    ensure_dir(dir);
    write_cube(scene.x, dir / "x.json");
    write_cube(scene.y, dir / "y.json");
    write_mask(scene.truth, dir / "mask.pgm");
    write_json(synth::describe(spec), dir / "scene.json");

    Manifest m("synth", dir);
    m.config(synth::describe(spec));
    m.seeds(json::array({spec.seed}));
    m.input(spec_path);
    for (const char* f : {"x.json", "x.raw", "y.json", "y.raw", "mask.pgm", "scene.json"}) m.output(f);
    m.write(start);
    out << "x=" << (dir / "x.json").string() << "\ny=" << (dir / "y.json").string()
        << "\nmask=" << (dir / "mask.pgm").string() << "\nanomaly_pixels=" << spec.anomaly_pixels() << "\n";
    return 0;
}

int cmd_detect(const DetectOptions& o, std::ostream& out) {
    const auto start = Clock::now();
    json cfg = merged_config(o.config_path, o.overrides);
    const std::size_t threads = o.sequential ? 1 : default_threads();
    const HyperCube x = read_cube(o.x_path);
    const HyperCube y = read_cube(o.y_path);
    check_pair(x, y);

    const fs::path dir(o.out_dir);
    ensure_dir(dir);
    Manifest m("detect " + o.method, dir);
    m.input(o.x_path);
    m.input(o.y_path);
    if (!o.config_path.empty()) m.input(o.config_path);

    const double ridge = cfg.at("ridge").get<double>();
    if (o.method == "acda") {
        acda::AcdaConfig ac = acda_config_from_json(cfg);
        ac.threads = threads;
        std::vector<acda::PretrainedRun> pretrained;
        if (!o.load_params.empty()) {
            const fs::path pdir(o.load_params);
            for (std::size_t r = 0; r < ac.repeats; ++r) {
                const fs::path f = pdir / ("run" + std::to_string(r) + "_fwd.json");
                const fs::path b = pdir / ("run" + std::to_string(r) + "_bwd.json");
                if (!fs::exists(f) || !fs::exists(b)) break;
                pretrained.push_back({nn::load_params(f), nn::load_params(b)});
                m.input(f);
                m.input(b);
            }
            if (pretrained.empty()) throw IoError("no saved parameters found in " + pdir.string());
        }
        const acda::AcdaResult r = acda::run_acda(x, y, ac, pretrained);
        const acda::AcdaConfig resolved = ac.resolved(x.bands());
        cfg["h1"] = resolved.shape.hidden[0];
        cfg["h2"] = resolved.shape.hidden[1];
        cfg["sample_count"] = r.selection.indices.size();

        write_map(r.mean_map, dir / "intensity.json",
                  {{"method", "acda"}, {"scoring", baselines::kResidualScoring}, {"content", "mean of fused maps"}});
        m.output("intensity.json");
        m.output("intensity.raw");
        write_map(r.usfa_map, dir / "usfa.json", {{"method", "usfa"}, {"scoring", "lambda-division"}});
        m.output("usfa.json");
        m.output("usfa.raw");
        write_loss_csv(r, dir / "loss_history.csv");
        m.output("loss_history.csv");
        write_index_csv(r.selection.indices, dir / "samples.csv");
        m.output("samples.csv");
        json seeds = json::array();
        for (std::size_t i = 0; i < r.runs.size(); ++i) {
            seeds.push_back({{"repeat", i},
                             {"fwd", acda::predictor_seed(ac.base_seed, i, true)},
                             {"bwd", acda::predictor_seed(ac.base_seed, i, false)}});
            const std::string stem = "run" + std::to_string(i);
            if (o.save_directional) {
                for (const auto& [name, map] : {std::pair{"_fwd", &r.runs[i].loss_map_fwd},
                                                std::pair{"_bwd", &r.runs[i].loss_map_bwd},
                                                std::pair{"_fused", &r.runs[i].fused}}) {
                    write_map(*map, dir / (stem + name + ".json"),
                              {{"method", "acda"}, {"scoring", baselines::kResidualScoring}});
                    m.output(stem + name + ".json");
                    m.output(stem + name + ".raw");
                }
            }
            if (o.save_params) {
                ensure_dir(dir / "params");
                nn::save_params(r.runs[i].params_fwd, dir / "params" / (stem + "_fwd.json"));
                nn::save_params(r.runs[i].params_bwd, dir / "params" / (stem + "_bwd.json"));
                for (const char* d : {"_fwd", "_bwd"}) {
                    m.output(fs::path("params") / (stem + d + ".json"));
                    for (std::size_t l = 0; l < r.runs[i].params_fwd.layers.size(); ++l) {
                        m.output(fs::path("params") / (stem + d + "_layer" + std::to_string(l) + ".raw"));
                    }
                }
            }
        }
        m.seeds(seeds);
        out << "usfa_components=" << r.usfa.components() << "\nsamples=" << r.selection.indices.size() << "\n";
    } else if (o.method == "diffrx" || o.method == "cc" || o.method == "ce") {
        IntensityMap map;
        if (o.method == "diffrx") {
            map = baselines::diff_rx(flatten(x), flatten(y), x.shape(), ridge);
            write_map(map, dir / "intensity.json", {{"method", "diffrx"}, {"scoring", "mahalanobis"}});
        } else {
            const auto kind = o.method == "cc" ? baselines::PredictorKind::cc : baselines::PredictorKind::ce;
            const baselines::BaselineResult r = baselines::run_baseline(kind, x, y, ridge);
            map = r.fused;
            const std::vector<std::pair<std::string, std::string>> extra{
                {"method", o.method}, {"scoring", baselines::kResidualScoring}};
            write_map(r.fused, dir / "intensity.json", extra);
            if (o.save_directional) {
                write_map(r.forward, dir / "fwd.json", extra);
                write_map(r.backward, dir / "bwd.json", extra);
                for (const char* f : {"fwd.json", "fwd.raw", "bwd.json", "bwd.raw"}) m.output(f);
            }
        }
        m.output("intensity.json");
        m.output("intensity.raw");
    } else {
        throw ConfigError("unknown method '" + o.method + "' (expected acda, diffrx, cc or ce)");
    }
    m.config(cfg);
    m.write(start);
    out << "map=" << (dir / "intensity.json").string() << "\n";
    return 0;
}

int cmd_eval(const std::string& map_path, const std::string& mask_path, const std::string& out_dir,
             std::ostream& out) {
    const auto start = Clock::now();
    const IntensityMap map = read_map(map_path);
    const GroundTruthMask mask = read_mask(mask_path, map.shape());
    const eval::RocCurve curve = eval::roc(map, mask);
    const fs::path dir(out_dir);
    ensure_dir(dir);
    eval::write_roc_csv(curve, dir / "roc.csv");
    eval::write_pgm(eval::stretch2(map), dir / "stretched.pgm");
    Manifest m("eval", dir);
    m.input(map_path);
    m.input(mask_path);
    m.output("roc.csv");
    m.output("stretched.pgm");
    m.config(json{{"auc", curve.auc}});
    m.write(start);
    out << "auc=" << fixed6(curve.auc) << "\n";
    return 0;
}

int cmd_sweep(const std::string& x_path, const std::string& y_path, const std::string& mask_path,
              const std::string& grid_path, const std::string& out_dir, const std::vector<std::string>& overrides,
              bool sequential, std::ostream& out, std::ostream& err) {
    const auto start = Clock::now();
    const json grid = read_json(grid_path);
    std::vector<std::size_t> h1s, h2s;
    json cfg = detect_defaults();
    try {
        for (const auto& v : grid.at("h1")) h1s.push_back(v.is_number_integer() && v.get<std::int64_t>() > 0 ? v.get<std::size_t>() : 0);
        for (const auto& v : grid.at("h2")) h2s.push_back(v.is_number_integer() && v.get<std::int64_t>() > 0 ? v.get<std::size_t>() : 0);
        if (std::count(h1s.begin(), h1s.end(), 0u) || std::count(h2s.begin(), h2s.end(), 0u))
            throw ConfigError("grid widths must be positive integers");
        for (const auto& [k, v] : grid.items()) {
            if (k == "h1" || k == "h2") continue;
            if (!cfg.contains(k)) throw ConfigError("unknown grid key '" + k + "'");
            cfg[k] = v;
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid grid file: ") + e.what());
    }
    if (h1s.empty() || h2s.empty()) throw ConfigError("grid needs non-empty h1 and h2 lists");
    apply_overrides(cfg, overrides);
    std::sort(h1s.rbegin(), h1s.rend());
    std::sort(h2s.rbegin(), h2s.rend());

    const HyperCube x = read_cube(x_path);
    const HyperCube y = read_cube(y_path);
    check_pair(x, y);
    const GroundTruthMask mask = read_mask(mask_path, x.shape());
    const fs::path dir(out_dir);
    ensure_dir(dir);

    std::ofstream csv(dir / "sweep.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write " + (dir / "sweep.csv").string());
    csv << "h2\\h1";
    for (std::size_t h1 : h1s) csv << ',' << h1;
    csv << '\n';
    const std::size_t threads = sequential ? 1 : default_threads();
    for (std::size_t h2 : h2s) {
        csv << h2;
        for (std::size_t h1 : h1s) {
            csv << ',';
            if (h2 >= h1) {
                csv << '-';
                continue;
            }
            try {
                json cell = cfg;
                cell["h1"] = h1;
                cell["h2"] = h2;
                acda::AcdaConfig ac = acda_config_from_json(cell);
                ac.threads = threads;
                const acda::AcdaResult r = acda::run_acda(x, y, ac);
                const double auc = eval::roc(r.mean_map, mask).auc;
                csv << fixed6(auc);
                out << "cell h1=" << h1 << " h2=" << h2 << " auc=" << fixed6(auc) << "\n";
            } catch (const Error& e) {
                csv << "nan";
                err << "sweep cell h1=" << h1 << " h2=" << h2 << " failed: " << e.what() << "\n";
            }
        }
        csv << '\n';
    }
    csv.close();
    Manifest m("sweep", dir);
    m.input(x_path);
    m.input(y_path);
    m.input(mask_path);
    m.input(grid_path);
    m.output("sweep.csv");
    json mcfg = cfg;
    mcfg["h1"] = h1s;
    mcfg["h2"] = h2s;
    m.config(mcfg);
    m.write(start);
    out << "table=" << (dir / "sweep.csv").string() << "\n";
    return 0;
}

}  // namespace

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw IoError("digest context allocation failed");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return hex.str();
}

void apply_overrides(json& config, const std::vector<std::string>& overrides) {
    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + kv + "' is not key=value");
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        if (!config.contains(key)) throw ConfigError("unknown config key '" + key + "'");
        json parsed = json::parse(value, nullptr, false);
        config[key] = parsed.is_discarded() ? json(value) : parsed;
    }
}

namespace {

// json's get<size_t>() wraps negative numbers instead of rejecting them.
std::size_t count_field(const json& c, const char* key) {
    const json& v = c.at(key);
    const bool ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    if (!ok) throw ConfigError(std::string(key) + " must be a nonnegative integer");
    return v.get<std::size_t>();
}

}  // namespace

acda::AcdaConfig acda_config_from_json(const json& c) {
    acda::AcdaConfig ac;
    try {
        const auto h1 = count_field(c, "h1");
        const auto h2 = count_field(c, "h2");
        const std::string act = c.at("output_activation").get<std::string>();
        if (act != "linear" && act != "relu") throw ConfigError("output_activation must be linear or relu");
        ac.shape.output_activation = act == "relu" ? nn::Activation::relu : nn::Activation::linear;
        if (h1 != 0 || h2 != 0) {
            if (h1 == 0 || h2 == 0) throw ConfigError("set both h1 and h2, or neither");
            ac.shape.hidden = {h1, h2, h1};
        }
        ac.train.epochs = count_field(c, "epochs");
        ac.train.batch_size = count_field(c, "batch_size");
        ac.train.learning_rate = c.at("learning_rate").get<double>();
        ac.train.l2_lambda = c.at("l2_lambda").get<double>();
        ac.sample_count = count_field(c, "sample_count");
        ac.repeats = count_field(c, "repeats");
        ac.base_seed = count_field(c, "seed");
        ac.usfa_ridge = c.at("usfa_ridge").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid ACDA config: ") + e.what());
    }
    ac.train.validate();
    if (ac.repeats < 1) throw ConfigError("repeats must be >= 1");
    return ac;
}

std::size_t default_threads() {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ACDKIT_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(v));
        } catch (const std::exception&) {
        }
    }
    return n;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"acdkit: hyperspectral anomaly change detection", "acdkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string spec_path, synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene pair with ground truth");
    synth_cmd->add_option("spec", spec_path, "Scene spec JSON")->required();
    synth_cmd->add_option("out_dir", synth_out, "Output directory")->required();

    DetectOptions d;
    auto* detect_cmd = app.add_subcommand("detect", "Run a detector on a cube pair");
    detect_cmd->add_option("method", d.method, "acda | diffrx | cc | ce")->required();
    detect_cmd->add_option("x", d.x_path, "First-date cube header")->required();
    detect_cmd->add_option("y", d.y_path, "Second-date cube header")->required();
    detect_cmd->add_option("out_dir", d.out_dir, "Output directory")->required();
    detect_cmd->add_option("-c,--config", d.config_path, "Config JSON");
    detect_cmd->add_option("--set", d.overrides, "key=value config override")->take_all();
    detect_cmd->add_flag("--sequential", d.sequential, "Single-threaded, bitwise reproducible");
    detect_cmd->add_flag("--save-directional", d.save_directional, "Also write directional and per-run maps");
    detect_cmd->add_flag("--save-params", d.save_params, "Write trained predictor parameters (acda)");
    detect_cmd->add_option("--load-params", d.load_params, "Reuse saved predictor parameters (acda)");

    std::string map_path, mask_path, eval_out;
    auto* eval_cmd = app.add_subcommand("eval", "ROC/AUC of an intensity map against a mask");
    eval_cmd->add_option("map", map_path, "Intensity map header")->required();
    eval_cmd->add_option("mask", mask_path, "Ground-truth PGM")->required();
    eval_cmd->add_option("out_dir", eval_out, "Output directory")->required();

    std::string sx, sy, smask, sgrid, sout;
    std::vector<std::string> sweep_overrides;
    bool sweep_sequential = false;
    auto* sweep_cmd = app.add_subcommand("sweep", "AUC table over hidden-unit grid");
    sweep_cmd->add_option("x", sx, "First-date cube header")->required();
    sweep_cmd->add_option("y", sy, "Second-date cube header")->required();
    sweep_cmd->add_option("mask", smask, "Ground-truth PGM")->required();
    sweep_cmd->add_option("grid", sgrid, "Grid JSON with h1/h2 lists and shared training config")->required();
    sweep_cmd->add_option("out_dir", sout, "Output directory")->required();
    sweep_cmd->add_option("--set", sweep_overrides, "key=value config override")->take_all();
    sweep_cmd->add_flag("--sequential", sweep_sequential, "Single-threaded, bitwise reproducible");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::config);
    }

    try {
        if (*synth_cmd) return cmd_synth(spec_path, synth_out, out);
        if (*detect_cmd) return cmd_detect(d, out);
        if (*eval_cmd) return cmd_eval(map_path, mask_path, eval_out, out);
        if (*sweep_cmd) return cmd_sweep(sx, sy, smask, sgrid, sout, sweep_overrides, sweep_sequential, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorKind::numerical);
    }
    return static_cast<int>(ErrorKind::config);
}

}  // namespace acdkit::cli
