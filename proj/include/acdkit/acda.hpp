#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "acdkit/core.hpp"
#include "acdkit/neural.hpp"
#include "acdkit/predetect.hpp"

namespace acdkit::acda {

struct AcdaConfig {
    /// Empty hidden list means "scale 127-60-40 to the band count".
    nn::NetworkShape shape;
    nn::TrainConfig train;
    /// 0 means default_sample_count(M).
    std::size_t sample_count = 0;
    std::size_t repeats = 10;
    std::uint64_t base_seed = 0;
    /// Conditioning ridge for USFA; negative selects the default.
    double usfa_ridge = -1.0;
    /// Worker threads for repeats/directions; 1 is fully sequential.
    std::size_t threads = 1;

    /// Fills in the shape for `bands` and checks every invariant.
    AcdaConfig resolved(std::size_t bands) const;
};

struct AcdaRun {
    nn::MlpParams params_fwd;  ///< X -> Y
    nn::MlpParams params_bwd;  ///< Y -> X
    IntensityMap loss_map_fwd;
    IntensityMap loss_map_bwd;
    IntensityMap fused;
    std::vector<double> training_loss_fwd;
    std::vector<double> training_loss_bwd;
};

struct AcdaResult {
    IntensityMap mean_map;
    std::vector<AcdaRun> runs;
    predetect::UsfaModel usfa;
    IntensityMap usfa_map;
    predetect::Selection selection;
};

/// Trains a predictor mapping rows of `inputs` onto the aligned rows of
/// `labels`; swapping the arguments trains the reverse direction.
nn::TrainResult train_predictor(const Matrix& inputs, const Matrix& labels, const nn::NetworkShape& shape,
                                const nn::TrainConfig& cfg);

PixelMatrix predict_image(const nn::MlpParams& params, const PixelMatrix& img);

/// Per-pixel mean squared error over bands.
IntensityMap loss_map(const PixelMatrix& predicted, const PixelMatrix& expected, Shape2 shape);

IntensityMap fuse_min(const IntensityMap& a, const IntensityMap& b);

/// Pixelwise mean of equally shaped maps.
IntensityMap mean_of(const std::vector<IntensityMap>& maps);

/// Seeds for the two predictors of repeat r.
std::uint64_t predictor_seed(std::uint64_t base_seed, std::size_t repeat, bool forward_direction);

/// Parameters supplied for reuse skip training for that repeat.
struct PretrainedRun {
    nn::MlpParams fwd;
    nn::MlpParams bwd;
};

/// Full pipeline: USFA pre-detection, sample selection, bidirectional
/// predictors per repeat, min fusion and averaging.
AcdaResult run_acda(const HyperCube& x, const HyperCube& y, const AcdaConfig& cfg,
                    const std::vector<PretrainedRun>& pretrained = {});

}  // namespace acdkit::acda
