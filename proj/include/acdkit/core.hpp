#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "acdkit/matrix.hpp"

namespace acdkit {

struct Shape2 {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t pixels() const { return height * width; }
    friend bool operator==(const Shape2&, const Shape2&) = default;
};

/// H x W x Q radiance cube, band-sequential float32 storage.
class HyperCube {
public:
    HyperCube() = default;
    /// Throws ConfigError on zero dims, wrong length or non-finite values.
    HyperCube(std::size_t height, std::size_t width, std::size_t bands, std::vector<float> data);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t bands() const { return bands_; }
    std::size_t pixels() const { return height_ * width_; }
    Shape2 shape() const { return {height_, width_}; }

    float at(std::size_t r, std::size_t c, std::size_t band) const {
        return data_[band * pixels() + r * width_ + c];
    }
    const std::vector<float>& data() const { return data_; }

    friend bool operator==(const HyperCube&, const HyperCube&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::size_t bands_ = 0;
    std::vector<float> data_;
};

enum class Label : std::uint8_t { background = 0, anomaly = 1 };

class GroundTruthMask {
public:
    GroundTruthMask() = default;
    GroundTruthMask(std::size_t height, std::size_t width, std::vector<Label> labels);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    Shape2 shape() const { return {height_, width_}; }
    const std::vector<Label>& labels() const { return labels_; }
    bool is_anomaly(std::size_t i) const { return labels_[i] == Label::anomaly; }
    std::size_t anomaly_count() const;

    friend bool operator==(const GroundTruthMask&, const GroundTruthMask&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<Label> labels_;
};

/// H x W map of nonnegative anomaly scores.
class IntensityMap {
public:
    IntensityMap() = default;
    /// Throws NumericalError if any value is negative or non-finite.
    IntensityMap(std::size_t height, std::size_t width, std::vector<double> values);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return values_.size(); }
    Shape2 shape() const { return {height_, width_}; }
    double operator[](std::size_t i) const { return values_[i]; }
    const std::vector<double>& values() const { return values_; }

    friend bool operator==(const IntensityMap&, const IntensityMap&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> values_;
};

// Container format: JSON header next to a little-endian float32 BSQ raw file.
HyperCube read_cube(const std::filesystem::path& header);
/// Writes `header` and a sibling raw file named after the header stem.
void write_cube(const HyperCube& cube, const std::filesystem::path& header);

PixelMatrix flatten(const HyperCube& cube);
HyperCube unflatten(const PixelMatrix& m, std::size_t height, std::size_t width);

/// Binary PGM (P5). Nonzero bytes are anomalies.
GroundTruthMask read_mask(const std::filesystem::path& path,
                          std::optional<Shape2> expected = std::nullopt);
void write_mask(const GroundTruthMask& mask, const std::filesystem::path& path);

/// Maps use the cube container with bands = 1 (values narrowed to float32).
/// `extra` entries are added to the JSON header as string fields.
void write_map(const IntensityMap& map, const std::filesystem::path& header,
               const std::vector<std::pair<std::string, std::string>>& extra = {});
IntensityMap read_map(const std::filesystem::path& header);

}  // namespace acdkit
