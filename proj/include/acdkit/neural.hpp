#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "acdkit/matrix.hpp"

namespace acdkit::nn {

enum class Activation { linear, relu };

struct NetworkShape {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t output_dim = 0;
    Activation output_activation = Activation::linear;

    /// Q -> h1 -> h2 -> h1 -> Q.
    static NetworkShape acda(std::size_t bands, std::size_t h1, std::size_t h2,
                             Activation out = Activation::linear);
    /// Rejects zero widths; with `acda_profile` also requires hidden = (h1, h2, h1),
    /// h1 < input_dim and h2 < h1.
    void validate(bool acda_profile = false) const;
};

/// Default bottleneck for Q bands, scaled from 127 -> 60 -> 40.
NetworkShape scaled_acda_shape(std::size_t bands);

struct Layer {
    Matrix weight;             ///< out x in
    std::vector<double> bias;  ///< out
    friend bool operator==(const Layer&, const Layer&) = default;
};

struct MlpParams {
    std::vector<Layer> layers;
    Activation output_activation = Activation::linear;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }
    /// Same layer dims, all entries zero.
    MlpParams zeros_like() const;
    friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    double l2_lambda = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Paired training rows; inputs[i] and labels[i] come from the same pixel.
struct SampleSet {
    Matrix inputs;
    Matrix labels;

    std::size_t size() const { return inputs.rows(); }
};

/// He-normal weights N(0, 2 / fan_in), zero biases.
MlpParams init_params(const NetworkShape& shape, std::uint64_t seed);

struct ForwardResult {
    std::vector<double> output;
    /// activations[0] is the input; activations[l + 1] is the output of layer l.
    std::vector<std::vector<double>> activations;
};

ForwardResult forward(const MlpParams& params, std::span<const double> x);

/// Row-wise forward pass over a whole matrix.
Matrix forward_batch(const MlpParams& params, const Matrix& inputs);

/// (1/S) sum ||f(x_i) - y_i||^2 + lambda * sum_j ||W_j||_F^2 (biases unregularized).
double loss(const MlpParams& params, const SampleSet& batch, double lambda);

/// Gradient of `loss` with respect to every weight and bias.
MlpParams backward(const MlpParams& params, const SampleSet& batch, double lambda);

struct AdamState {
    MlpParams m;
    MlpParams v;
    std::uint64_t step = 0;

    static AdamState for_params(const MlpParams& p) { return {p.zeros_like(), p.zeros_like(), 0}; }
};

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, const TrainConfig& cfg);

struct TrainResult {
    MlpParams params;
    std::vector<double> loss_history;  ///< sample-weighted mean batch loss per epoch
};

TrainResult train(const NetworkShape& shape, const SampleSet& samples, const TrainConfig& cfg);

/// JSON header plus one float64 raw blob per layer (weights then bias).
void save_params(const MlpParams& params, const std::filesystem::path& header);
MlpParams load_params(const std::filesystem::path& header);

}  // namespace acdkit::nn
