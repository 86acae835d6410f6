#include "acdkit/acda.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include "acdkit/error.hpp"

namespace acdkit::acda {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Runs tasks on up to `threads` workers; rethrows the first failure.
void run_tasks(std::vector<std::function<void()>>& tasks, std::size_t threads) {
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(tasks.size(), 1));
    if (threads == 1) {
        for (auto& t : tasks) t();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> workers;
        for (std::size_t w = 0; w < threads; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < tasks.size(); i = next++) {
                    try {
                        tasks[i]();
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

AcdaConfig AcdaConfig::resolved(std::size_t bands) const {
    AcdaConfig out = *this;
    if (out.shape.hidden.empty()) {
        const nn::Activation act = out.shape.output_activation;
        out.shape = nn::scaled_acda_shape(bands);
        out.shape.output_activation = act;
    }
    if (out.shape.input_dim == 0) out.shape.input_dim = bands;
    if (out.shape.output_dim == 0) out.shape.output_dim = bands;
    if (out.shape.input_dim != bands || out.shape.output_dim != bands) {
        throw ConfigError("network width does not match the cube band count");
    }
    out.shape.validate(true);
    out.train.validate();
    if (out.repeats < 1) throw ConfigError("repeats must be >= 1");
    if (out.threads < 1) out.threads = 1;
    return out;
}

nn::TrainResult train_predictor(const Matrix& inputs, const Matrix& labels, const nn::NetworkShape& shape,
                                const nn::TrainConfig& cfg) {
    return nn::train(shape, nn::SampleSet{inputs, labels}, cfg);
}

PixelMatrix predict_image(const nn::MlpParams& params, const PixelMatrix& img) {
    if (img.cols() != params.input_dim()) throw ConfigError("predict_image: band count does not match network");
    return nn::forward_batch(params, img);
}

IntensityMap loss_map(const PixelMatrix& predicted, const PixelMatrix& expected, Shape2 shape) {
    if (predicted.rows() != expected.rows() || predicted.cols() != expected.cols()) {
        throw ConfigError("loss_map: predicted and expected images differ in shape");
    }
    if (shape.pixels() != predicted.rows()) throw ConfigError("loss_map: map shape does not match pixel count");
    const std::size_t q = predicted.cols();
    std::vector<double> values(predicted.rows());
    for (std::size_t i = 0; i < predicted.rows(); ++i) {
        auto p = predicted.row(i);
        auto e = expected.row(i);
        double s = 0.0;
        for (std::size_t b = 0; b < q; ++b) s += (p[b] - e[b]) * (p[b] - e[b]);
        values[i] = s / static_cast<double>(q);
    }
    return IntensityMap(shape.height, shape.width, std::move(values));
}

IntensityMap fuse_min(const IntensityMap& a, const IntensityMap& b) {
    if (a.shape() != b.shape()) throw ConfigError("fuse_min: map dimensions differ");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(a[i], b[i]);
    return IntensityMap(a.height(), a.width(), std::move(out));
}

IntensityMap mean_of(const std::vector<IntensityMap>& maps) {
    if (maps.empty()) throw ConfigError("mean_of: no maps");
    std::vector<double> sum(maps.front().size(), 0.0);
    for (const IntensityMap& m : maps) {
        if (m.shape() != maps.front().shape()) throw ConfigError("mean_of: map dimensions differ");
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += m[i];
    }
    for (double& v : sum) v /= static_cast<double>(maps.size());
    return IntensityMap(maps.front().height(), maps.front().width(), std::move(sum));
}

std::uint64_t predictor_seed(std::uint64_t base_seed, std::size_t repeat, bool forward_direction) {
    return splitmix64(splitmix64(base_seed + repeat) ^ (forward_direction ? 0x1ull : 0x2ull));
}

AcdaResult run_acda(const HyperCube& x_cube, const HyperCube& y_cube, const AcdaConfig& raw_cfg,
                    const std::vector<PretrainedRun>& pretrained) {
    if (x_cube.height() != y_cube.height() || x_cube.width() != y_cube.width() ||
        x_cube.bands() != y_cube.bands()) {
        throw ConfigError("cube dimensions differ: " + std::to_string(x_cube.height()) + "x" +
                          std::to_string(x_cube.width()) + "x" + std::to_string(x_cube.bands()) + " vs " +
                          std::to_string(y_cube.height()) + "x" + std::to_string(y_cube.width()) + "x" +
                          std::to_string(y_cube.bands()));
    }
    const AcdaConfig cfg = raw_cfg.resolved(x_cube.bands());
    if (!pretrained.empty()) {
        if (pretrained.size() != cfg.repeats) {
            throw ConfigError("pretrained parameters cover " + std::to_string(pretrained.size()) +
                              " repeats, config asks for " + std::to_string(cfg.repeats));
        }
        for (const PretrainedRun& p : pretrained) {
            for (const nn::MlpParams* m : {&p.fwd, &p.bwd}) {
                if (m->input_dim() != x_cube.bands() || m->output_dim() != x_cube.bands())
                    throw ConfigError("pretrained parameters do not match the band count");
            }
        }
    }
    const Shape2 shape = x_cube.shape();
    const PixelMatrix x = flatten(x_cube);
    const PixelMatrix y = flatten(y_cube);

    AcdaResult result;
    result.usfa = predetect::usfa_fit(x, y, cfg.usfa_ridge);
    result.usfa_map = predetect::usfa_intensity(result.usfa, x, y, shape);
    const std::size_t count = cfg.sample_count ? cfg.sample_count : predetect::default_sample_count(x.rows());
    result.selection = predetect::select_samples(x, y, result.usfa_map, count, cfg.base_seed);
    const nn::SampleSet& samples = result.selection.samples;

    result.runs.resize(cfg.repeats);
    std::vector<std::function<void()>> tasks;
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
        AcdaRun& run = result.runs[r];
        if (r < pretrained.size()) {
            run.params_fwd = pretrained[r].fwd;
            run.params_bwd = pretrained[r].bwd;
            continue;
        }
        tasks.emplace_back([&, r] {
            nn::TrainConfig tc = cfg.train;
            tc.seed = predictor_seed(cfg.base_seed, r, true);
            nn::TrainResult t = train_predictor(samples.inputs, samples.labels, cfg.shape, tc);
            run.params_fwd = std::move(t.params);
            run.training_loss_fwd = std::move(t.loss_history);
        });
        tasks.emplace_back([&, r] {
            nn::TrainConfig tc = cfg.train;
            tc.seed = predictor_seed(cfg.base_seed, r, false);
            nn::TrainResult t = train_predictor(samples.labels, samples.inputs, cfg.shape, tc);
            run.params_bwd = std::move(t.params);
            run.training_loss_bwd = std::move(t.loss_history);
        });
    }
    run_tasks(tasks, cfg.threads);

    tasks.clear();
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
        tasks.emplace_back([&, r] {
            AcdaRun& run = result.runs[r];
            run.loss_map_fwd = loss_map(predict_image(run.params_fwd, x), y, shape);
            run.loss_map_bwd = loss_map(predict_image(run.params_bwd, y), x, shape);
            run.fused = fuse_min(run.loss_map_fwd, run.loss_map_bwd);
        });
    }
    run_tasks(tasks, cfg.threads);

    std::vector<IntensityMap> fused;
    fused.reserve(cfg.repeats);
    for (const AcdaRun& run : result.runs) fused.push_back(run.fused);
    result.mean_map = mean_of(fused);
    return result;
}

}  // namespace acdkit::acda
