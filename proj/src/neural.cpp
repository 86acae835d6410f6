#include "acdkit/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include <json.hpp>

#include "acdkit/error.hpp"

namespace acdkit::nn {

namespace {

constexpr double kAcdaH1 = 60.0;
constexpr double kAcdaH2 = 40.0;
constexpr double kAcdaBands = 127.0;

inline double activate(Activation a, double z) { return a == Activation::relu ? std::max(z, 0.0) : z; }

Activation layer_activation(const MlpParams& p, std::size_t l) {
    return l + 1 == p.layers.size() ? p.output_activation : Activation::relu;
}

// out = act(in * W^T + b), one row per sample.
Matrix affine_rows(const Matrix& in, const Layer& layer, Activation act) {
    const std::size_t rows = in.rows();
    const std::size_t n_out = layer.weight.rows();
    const std::size_t n_in = layer.weight.cols();
    Matrix out(rows, n_out);
    for (std::size_t i = 0; i < rows; ++i) {
        auto x = in.row(i);
        auto y = out.row(i);
        for (std::size_t o = 0; o < n_out; ++o) {
            auto w = layer.weight.row(o);
            double z = layer.bias[o];
            for (std::size_t k = 0; k < n_in; ++k) z += w[k] * x[k];
            y[o] = activate(act, z);
        }
    }
    return out;
}

void check_batch(const MlpParams& params, const SampleSet& batch) {
    if (batch.size() == 0) throw ConfigError("empty sample batch");
    if (batch.labels.rows() != batch.inputs.rows()) throw ConfigError("inputs and labels differ in row count");
    if (batch.inputs.cols() != params.input_dim() || batch.labels.cols() != params.output_dim()) {
        throw ConfigError("sample dimensions do not match the network");
    }
}

std::vector<Matrix> forward_all(const MlpParams& params, const Matrix& inputs) {
    std::vector<Matrix> acts;
    acts.reserve(params.layers.size() + 1);
    acts.push_back(inputs);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        acts.push_back(affine_rows(acts.back(), params.layers[l], layer_activation(params, l)));
    }
    return acts;
}

double weight_penalty(const MlpParams& params) {
    double s = 0.0;
    for (const Layer& l : params.layers)
        for (double w : l.weight.data()) s += w * w;
    return s;
}

template <class F>
void for_each_tensor(MlpParams& a, const MlpParams& b, F f) {
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        f(a.layers[l].weight.data(), b.layers[l].weight.data());
        f(a.layers[l].bias, b.layers[l].bias);
    }
}

bool same_layout(const MlpParams& a, const MlpParams& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].weight.rows() != b.layers[l].weight.rows() ||
            a.layers[l].weight.cols() != b.layers[l].weight.cols() ||
            a.layers[l].bias.size() != b.layers[l].bias.size()) {
            return false;
        }
    }
    return true;
}

const char* activation_name(Activation a) { return a == Activation::relu ? "relu" : "linear"; }

Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "linear") return Activation::linear;
    throw ConfigError("unknown activation '" + s + "'");
}

}  // namespace

NetworkShape NetworkShape::acda(std::size_t bands, std::size_t h1, std::size_t h2, Activation out) {
    return NetworkShape{bands, {h1, h2, h1}, bands, out};
}

void NetworkShape::validate(bool acda_profile) const {
    if (input_dim == 0 || output_dim == 0) throw ConfigError("network input/output width must be >= 1");
    for (std::size_t h : hidden) {
        if (h == 0) throw ConfigError("hidden layer width must be >= 1");
    }
    if (acda_profile) {
        if (hidden.size() != 3 || hidden[0] != hidden[2]) {
            throw ConfigError("ACDA shape must have hidden widths (h1, h2, h1)");
        }
        if (!(hidden[0] < input_dim)) throw ConfigError("ACDA bottleneck requires h1 < input bands");
        if (!(hidden[1] < hidden[0])) throw ConfigError("ACDA bottleneck requires h2 < h1");
    }
}

NetworkShape scaled_acda_shape(std::size_t bands) {
    if (bands < 3) throw ConfigError("ACDA needs at least 3 bands for a bottleneck");
    const double q = static_cast<double>(bands);
    auto h1 = static_cast<std::size_t>(std::lround(q * kAcdaH1 / kAcdaBands));
    auto h2 = static_cast<std::size_t>(std::lround(q * kAcdaH2 / kAcdaBands));
    h1 = std::clamp<std::size_t>(h1, 2, bands - 1);
    h2 = std::clamp<std::size_t>(h2, 1, h1 - 1);
    return NetworkShape::acda(bands, h1, h2);
}

MlpParams MlpParams::zeros_like() const {
    MlpParams z;
    z.output_activation = output_activation;
    for (const Layer& l : layers) {
        z.layers.push_back(Layer{Matrix(l.weight.rows(), l.weight.cols()), std::vector<double>(l.bias.size(), 0.0)});
    }
    return z;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(l2_lambda >= 0.0)) throw ConfigError("l2_lambda must be >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
}

MlpParams init_params(const NetworkShape& shape, std::uint64_t seed) {
    shape.validate();
    std::mt19937_64 rng(seed);
    MlpParams p;
    p.output_activation = shape.output_activation;
    std::vector<std::size_t> widths{shape.input_dim};
    widths.insert(widths.end(), shape.hidden.begin(), shape.hidden.end());
    widths.push_back(shape.output_dim);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t fan_in = widths[l];
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
        Layer layer{Matrix(widths[l + 1], fan_in), std::vector<double>(widths[l + 1], 0.0)};
        for (double& w : layer.weight.data()) w = dist(rng);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

ForwardResult forward(const MlpParams& params, std::span<const double> x) {
    if (x.size() != params.input_dim()) throw ConfigError("forward: input length does not match network");
    ForwardResult r;
    r.activations.emplace_back(x.begin(), x.end());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const Layer& layer = params.layers[l];
        const auto& in = r.activations.back();
        std::vector<double> out(layer.weight.rows());
        for (std::size_t o = 0; o < out.size(); ++o) {
            auto w = layer.weight.row(o);
            double z = layer.bias[o];
            for (std::size_t k = 0; k < in.size(); ++k) z += w[k] * in[k];
            out[o] = activate(layer_activation(params, l), z);
        }
        r.activations.push_back(std::move(out));
    }
    r.output = r.activations.back();
    return r;
}

Matrix forward_batch(const MlpParams& params, const Matrix& inputs) {
    if (inputs.cols() != params.input_dim()) throw ConfigError("forward: input width does not match network");
    Matrix cur = inputs;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        cur = affine_rows(cur, params.layers[l], layer_activation(params, l));
    }
    return cur;
}

double loss(const MlpParams& params, const SampleSet& batch, double lambda) {
    check_batch(params, batch);
    const Matrix pred = forward_batch(params, batch.inputs);
    double sse = 0.0;
    for (std::size_t i = 0; i < pred.data().size(); ++i) {
        const double d = pred.data()[i] - batch.labels.data()[i];
        sse += d * d;
    }
    return sse / static_cast<double>(batch.size()) + lambda * weight_penalty(params);
}

namespace {

MlpParams backward_impl(const MlpParams& params, const SampleSet& batch, double lambda, double* loss_out) {
    check_batch(params, batch);
    const std::vector<Matrix> acts = forward_all(params, batch.inputs);
    if (loss_out) {
        double sse = 0.0;
        for (std::size_t i = 0; i < acts.back().data().size(); ++i) {
            const double d = acts.back().data()[i] - batch.labels.data()[i];
            sse += d * d;
        }
        *loss_out = sse / static_cast<double>(batch.size()) + lambda * weight_penalty(params);
    }
    const std::size_t n_layers = params.layers.size();
    const double scale = 2.0 / static_cast<double>(batch.size());

    // delta = dLoss/dz for the current layer, one row per sample.
    Matrix delta = acts.back();
    for (std::size_t i = 0; i < delta.data().size(); ++i) {
        delta.data()[i] = scale * (acts.back().data()[i] - batch.labels.data()[i]);
    }
    if (params.output_activation == Activation::relu) {
        for (std::size_t i = 0; i < delta.data().size(); ++i) {
            if (!(acts.back().data()[i] > 0.0)) delta.data()[i] = 0.0;
        }
    }

    MlpParams grads = params.zeros_like();
    for (std::size_t l = n_layers; l-- > 0;) {
        const Layer& layer = params.layers[l];
        const Matrix& in = acts[l];
        Layer& g = grads.layers[l];
        const std::size_t n_out = layer.weight.rows();
        const std::size_t n_in = layer.weight.cols();
        for (std::size_t i = 0; i < delta.rows(); ++i) {
            auto d = delta.row(i);
            auto a = in.row(i);
            for (std::size_t o = 0; o < n_out; ++o) {
                const double dz = d[o];
                if (dz == 0.0) continue;
                g.bias[o] += dz;
                auto gw = g.weight.row(o);
                for (std::size_t k = 0; k < n_in; ++k) gw[k] += dz * a[k];
            }
        }
        for (std::size_t k = 0; k < g.weight.data().size(); ++k) {
            g.weight.data()[k] += 2.0 * lambda * layer.weight.data()[k];
        }
        if (l == 0) break;

        Matrix prev(delta.rows(), n_in);
        for (std::size_t i = 0; i < delta.rows(); ++i) {
            auto d = delta.row(i);
            auto p = prev.row(i);
            for (std::size_t o = 0; o < n_out; ++o) {
                const double dz = d[o];
                if (dz == 0.0) continue;
                auto w = layer.weight.row(o);
                for (std::size_t k = 0; k < n_in; ++k) p[k] += dz * w[k];
            }
            // Hidden layers are ReLU; the subgradient at 0 is 0.
            auto a = in.row(i);
            for (std::size_t k = 0; k < n_in; ++k) {
                if (!(a[k] > 0.0)) p[k] = 0.0;
            }
        }
        delta = std::move(prev);
    }
    return grads;
}

}  // namespace

MlpParams backward(const MlpParams& params, const SampleSet& batch, double lambda) {
    return backward_impl(params, batch, lambda, nullptr);
}

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, const TrainConfig& cfg) {
    if (!same_layout(params, grads) || !same_layout(params, state.m) || !same_layout(params, state.v)) {
        throw ConfigError("adam_step: parameter, gradient and state shapes differ");
    }
    ++state.step;
    const double b1 = cfg.adam_beta1;
    const double b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                          std::vector<double>& v) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                const double m_hat = m[i] / c1;
                const double v_hat = v[i] / c2;
                p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
            }
        };
        update(params.layers[l].weight.data(), grads.layers[l].weight.data(), state.m.layers[l].weight.data(),
               state.v.layers[l].weight.data());
        update(params.layers[l].bias, grads.layers[l].bias, state.m.layers[l].bias, state.v.layers[l].bias);
    }
}

TrainResult train(const NetworkShape& shape, const SampleSet& samples, const TrainConfig& cfg) {
    cfg.validate();
    shape.validate();
    if (samples.size() == 0) throw ConfigError("train: empty sample set");
    if (samples.labels.rows() != samples.inputs.rows()) throw ConfigError("train: inputs and labels differ in rows");
    if (samples.inputs.cols() != shape.input_dim || samples.labels.cols() != shape.output_dim) {
        throw ConfigError("train: sample dimensions do not match the network shape");
    }

    // Initialization and shuffling use separate streams derived from one seed.
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), 0x5eedu};
    std::mt19937_64 shuffle_rng(seq);
    TrainResult result{init_params(shape, cfg.seed), {}};
    AdamState state = AdamState::for_params(result.params);

    const std::size_t n = samples.size();
    const std::size_t q_in = samples.inputs.cols();
    const std::size_t q_out = samples.labels.cols();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    result.loss_history.reserve(cfg.epochs);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, n - start);
            SampleSet batch{Matrix(len, q_in), Matrix(len, q_out)};
            for (std::size_t i = 0; i < len; ++i) {
                const std::size_t src = order[start + i];
                std::copy_n(samples.inputs.row(src).begin(), q_in, batch.inputs.row(i).begin());
                std::copy_n(samples.labels.row(src).begin(), q_out, batch.labels.row(i).begin());
            }
            double batch_loss = 0.0;
            const MlpParams grads = backward_impl(result.params, batch, cfg.l2_lambda, &batch_loss);
            epoch_loss += static_cast<double>(len) * batch_loss;
            adam_step(result.params, grads, state, cfg);
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(n));
    }
    return result;
}

void save_params(const MlpParams& params, const std::filesystem::path& header) {
    static_assert(std::endian::native == std::endian::little, "params container assumes a little-endian host");
    nlohmann::json h{{"format", "acdkit-mlp"}, {"dtype", "f64"},
                     {"output_activation", activation_name(params.output_activation)}};
    h["layers"] = nlohmann::json::array();
    const std::string stem = header.stem().string();
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const Layer& layer = params.layers[l];
        const std::string raw_name = stem + "_layer" + std::to_string(l) + ".raw";
        std::ofstream out(header.parent_path() / raw_name, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + (header.parent_path() / raw_name).string());
        out.write(reinterpret_cast<const char*>(layer.weight.data().data()),
                  static_cast<std::streamsize>(layer.weight.data().size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(layer.bias.data()),
                  static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
        if (!out) throw IoError("write failed for " + raw_name);
        h["layers"].push_back({{"rows", layer.weight.rows()}, {"cols", layer.weight.cols()}, {"raw", raw_name}});
    }
    std::ofstream out(header, std::ios::trunc);
    if (!out) throw IoError("cannot write " + header.string());
    out << h.dump(2) << "\n";
}

MlpParams load_params(const std::filesystem::path& header) {
    std::ifstream in(header);
    if (!in) throw IoError("cannot open " + header.string());
    MlpParams p;
    try {
        const nlohmann::json h = nlohmann::json::parse(in);
        if (h.at("format") != "acdkit-mlp" || h.at("dtype") != "f64") {
            throw ConfigError("not an acdkit parameter header: " + header.string());
        }
        p.output_activation = parse_activation(h.at("output_activation").get<std::string>());
        std::size_t prev_out = 0;
        for (const auto& lj : h.at("layers")) {
            const auto rows = lj.at("rows").get<std::size_t>();
            const auto cols = lj.at("cols").get<std::size_t>();
            if (rows == 0 || cols == 0 || (prev_out != 0 && cols != prev_out)) {
                throw ConfigError("inconsistent layer dimensions in " + header.string());
            }
            prev_out = rows;
            const auto raw = header.parent_path() / lj.at("raw").get<std::string>();
            std::ifstream r(raw, std::ios::binary | std::ios::ate);
            if (!r) throw IoError("cannot open " + raw.string());
            if (static_cast<std::size_t>(r.tellg()) != (rows * cols + rows) * sizeof(double)) {
                throw ConfigError("layer blob size mismatch: " + raw.string());
            }
            r.seekg(0);
            Layer layer{Matrix(rows, cols), std::vector<double>(rows)};
            r.read(reinterpret_cast<char*>(layer.weight.data().data()),
                   static_cast<std::streamsize>(rows * cols * sizeof(double)));
            r.read(reinterpret_cast<char*>(layer.bias.data()), static_cast<std::streamsize>(rows * sizeof(double)));
            if (!r) throw IoError("read failed for " + raw.string());
            p.layers.push_back(std::move(layer));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid parameter header " + header.string() + ": " + e.what());
    }
    if (p.layers.empty()) throw ConfigError("parameter header lists no layers: " + header.string());
    return p;
}

}  // namespace acdkit::nn
