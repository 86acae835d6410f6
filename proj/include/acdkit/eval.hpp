#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "acdkit/core.hpp"

namespace acdkit::eval {

struct RocPoint {
    double threshold;  ///< scores >= threshold are flagged; +inf for the origin
    double far;
    double dr;
    friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct RocCurve {
    std::vector<RocPoint> points;  ///< from (0,0) to (1,1)
    double auc = 0.0;
};

/// Threshold sweep over every distinct score with ties grouped; trapezoidal AUC.
RocCurve roc(const IntensityMap& map, const GroundTruthMask& truth);

/// Same, over raw score/label arrays.
RocCurve roc(const std::vector<double>& scores, const std::vector<Label>& labels);

/// Highest detection rate reached without exceeding false alarm rate `far`.
double detection_rate_at(const RocCurve& curve, double far);

struct Gray8 {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;
};

/// Linear 2%/98% percentile stretch to 0..255.
Gray8 stretch2(const IntensityMap& map);

void write_pgm(const Gray8& img, const std::filesystem::path& path);

/// `threshold,far,dr` rows followed by `# auc=<6 decimals>`.
void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path);
RocCurve read_roc_csv(const std::filesystem::path& path);

}  // namespace acdkit::eval
