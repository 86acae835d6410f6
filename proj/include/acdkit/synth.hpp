#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "acdkit/core.hpp"

namespace acdkit::synth {

enum class Condition { identical, affine, nonlinear };
enum class AnomalyMode { insert_t2, remove_t2 };

struct AnomalyRect {
    std::size_t x = 0;  ///< column of the top-left corner
    std::size_t y = 0;  ///< row of the top-left corner
    std::size_t w = 1;
    std::size_t h = 1;
    AnomalyMode mode = AnomalyMode::insert_t2;
    friend bool operator==(const AnomalyRect&, const AnomalyRect&) = default;
};

struct SceneSpec {
    std::size_t height = 64;
    std::size_t width = 64;
    std::size_t bands = 16;
    std::size_t n_endmembers = 4;
    Condition condition = Condition::identical;
    double condition_strength = 0.0;
    double noise_sigma = 0.0;
    /// Fraction of the anomaly spectrum mixed into the replaced pixels:
    /// 1 replaces them outright, smaller values blend with the original spectrum.
    double anomaly_contrast = 1.0;
    std::vector<AnomalyRect> anomalies;
    std::uint64_t seed = 0;

    void validate() const;
    std::size_t anomaly_pixels() const;
    friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

struct Scene {
    HyperCube x;
    HyperCube y;
    GroundTruthMask truth;
};

Scene generate(const SceneSpec& spec);

/// Manifest: every spec field plus derived counts.
nlohmann::json describe(const SceneSpec& spec);

/// Throws ConfigError on missing/invalid fields; derived manifest keys are ignored.
SceneSpec spec_from_json(const nlohmann::json& j);

/// `count` disjoint w x h rectangles laid out on a regular interior grid.
std::vector<AnomalyRect> grid_anomalies(std::size_t height, std::size_t width, std::size_t count, std::size_t size,
                                        AnomalyMode first_mode = AnomalyMode::insert_t2);

std::string to_string(Condition c);

}  // namespace acdkit::synth
