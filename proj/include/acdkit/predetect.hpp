#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "acdkit/core.hpp"
#include "acdkit/matrix.hpp"
#include "acdkit/neural.hpp"

namespace acdkit::predetect {

/// Slow-feature model for a pair of images: rows of `projection` are the
/// retained generalized eigenvectors of cov(x - y) w = lambda (cov(x) + cov(y)) / 2 w.
struct UsfaModel {
    Matrix projection;                ///< K x Q
    std::vector<double> eigenvalues;  ///< K, ascending
    std::vector<double> mean_x;
    std::vector<double> mean_y;
    /// No eigenvalue was below 1; only the smallest component was kept.
    bool fallback_single = false;
    /// Scores are squared projections divided by the eigenvalue.
    const char* standardization = "lambda-division";

    std::size_t components() const { return eigenvalues.size(); }
};

/// `ridge < 0` selects the default conditioning ridge for the denominator matrix.
UsfaModel usfa_fit(const PixelMatrix& x, const PixelMatrix& y, double ridge = -1.0);

IntensityMap usfa_intensity(const UsfaModel& model, const PixelMatrix& x, const PixelMatrix& y, Shape2 shape);

struct ClusterResult {
    std::vector<double> centers;             ///< ascending
    std::vector<std::uint8_t> assignments;  ///< index into centers
    std::size_t iterations = 0;
};

constexpr std::size_t kMaxKmeansIterations = 300;

/// Lloyd's algorithm on scalars, quantile initialized. `seed` is accepted for
/// interface stability; the procedure itself is deterministic.
ClusterResult kmeans_1d(std::span<const double> values, std::size_t k, std::uint64_t seed = 0);

struct Selection {
    nn::SampleSet samples;
    std::vector<std::size_t> indices;  ///< ascending pixel indices of the selected rows
    std::size_t pool_size = 0;
    bool clamped = false;  ///< fewer pool pixels than requested
};

/// min(10000, ceil(0.06 * M)).
std::size_t default_sample_count(std::size_t pixels);

/// Draws up to `count` pixels uniformly from the lowest-intensity 3-means cluster.
Selection select_samples(const PixelMatrix& x, const PixelMatrix& y, const IntensityMap& intensity,
                         std::size_t count, std::uint64_t seed);

}  // namespace acdkit::predetect
