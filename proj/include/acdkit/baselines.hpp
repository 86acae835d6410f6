#pragma once

#include <string>
#include <vector>

#include "acdkit/core.hpp"
#include "acdkit/matrix.hpp"

namespace acdkit::baselines {

enum class PredictorKind { cc, ce };

/// Affine cross-image predictor: y_hat = gain (x - mean_in) + mean_out.
struct LinearPredictor {
    PredictorKind kind = PredictorKind::cc;
    Matrix gain;
    std::vector<double> mean_in;
    std::vector<double> mean_out;

    PixelMatrix predict(const PixelMatrix& x) const;
};

/// Scoring rule recorded on every emitted baseline map.
inline constexpr const char* kResidualScoring = "per-pixel-mse";

/// RX on the difference image. `ridge < 0` selects the default ridge.
IntensityMap diff_rx(const PixelMatrix& x, const PixelMatrix& y, Shape2 shape, double ridge = -1.0);

/// Chronochrome: least-squares gain cov(y, x) (cov(x) + ridge I)^-1.
LinearPredictor fit_cc(const PixelMatrix& x, const PixelMatrix& y, double ridge = -1.0);

/// Covariance equalization: gain cov(y)^1/2 cov(x)^-1/2.
LinearPredictor fit_ce(const PixelMatrix& x, const PixelMatrix& y, double ridge = -1.0);

/// Per-pixel MSE between pred(x) and y.
IntensityMap baseline_map(const LinearPredictor& pred, const PixelMatrix& x, const PixelMatrix& y, Shape2 shape);

struct BaselineResult {
    IntensityMap forward;   ///< x -> y residual map
    IntensityMap backward;  ///< y -> x residual map
    IntensityMap fused;
};

BaselineResult run_baseline(PredictorKind kind, const HyperCube& x, const HyperCube& y, double ridge = -1.0);

std::string to_string(PredictorKind kind);

}  // namespace acdkit::baselines
