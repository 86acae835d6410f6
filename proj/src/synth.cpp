#include "acdkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "acdkit/error.hpp"

namespace acdkit::synth {

namespace {

constexpr std::size_t kSpectrumHarmonics = 4;
constexpr std::size_t kFieldTerms = 3;
constexpr double kAbundanceSharpness = 2.0;
constexpr double kKnee = 2.0;

using Rng = std::mt19937_64;

// Low-frequency cosine series over the band axis.
std::vector<double> smooth_spectrum(std::size_t bands, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::vector<double> s(bands, normal(rng));
    for (std::size_t f = 1; f <= kSpectrumHarmonics; ++f) {
        const double amp = normal(rng) / static_cast<double>(f);
        const double ph = phase(rng);
        for (std::size_t b = 0; b < bands; ++b) {
            const double u = bands > 1 ? static_cast<double>(b) / static_cast<double>(bands - 1) : 0.0;
            s[b] += amp * std::cos(std::numbers::pi * static_cast<double>(f) * u + ph);
        }
    }
    return s;
}

// Spatially smooth random field, a few plane-wave cosines per scene.
std::vector<double> smooth_field(std::size_t height, std::size_t width, Rng& rng) {
    std::uniform_real_distribution<double> freq(0.5, 2.5);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> field(height * width, 0.0);
    for (std::size_t t = 0; t < kFieldTerms; ++t) {
        const double amp = normal(rng);
        const double fr = freq(rng) * (normal(rng) < 0 ? -1.0 : 1.0);
        const double fc = freq(rng);
        const double ph = phase(rng);
        for (std::size_t r = 0; r < height; ++r) {
            for (std::size_t c = 0; c < width; ++c) {
                const double arg = 2.0 * std::numbers::pi *
                                   (fr * static_cast<double>(r) / static_cast<double>(height) +
                                    fc * static_cast<double>(c) / static_cast<double>(width));
                field[r * width + c] += amp * std::cos(arg + ph);
            }
        }
    }
    return field;
}

Condition parse_condition(const std::string& s) {
    if (s == "identical") return Condition::identical;
    if (s == "affine") return Condition::affine;
    if (s == "nonlinear") return Condition::nonlinear;
    throw ConfigError("unknown condition '" + s + "'");
}

AnomalyMode parse_mode(const std::string& s) {
    if (s == "insert_t2") return AnomalyMode::insert_t2;
    if (s == "remove_t2") return AnomalyMode::remove_t2;
    throw ConfigError("unknown anomaly mode '" + s + "'");
}

std::string to_string(AnomalyMode m) { return m == AnomalyMode::insert_t2 ? "insert_t2" : "remove_t2"; }

bool overlaps(const AnomalyRect& a, const AnomalyRect& b) {
    return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
}

}  // namespace

std::string to_string(Condition c) {
    switch (c) {
        case Condition::identical: return "identical";
        case Condition::affine: return "affine";
        case Condition::nonlinear: return "nonlinear";
    }
    return "identical";
}

void SceneSpec::validate() const {
    if (height == 0 || width == 0 || bands == 0) throw ConfigError("scene dimensions must be positive");
    if (n_endmembers < 2) throw ConfigError("n_endmembers must be >= 2");
    if (!(condition_strength >= 0.0) || !std::isfinite(condition_strength)) {
        throw ConfigError("condition_strength must be >= 0");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be >= 0");
    if (!(anomaly_contrast > 0.0 && anomaly_contrast <= 1.0)) throw ConfigError("anomaly_contrast must be in (0, 1]");
    for (std::size_t i = 0; i < anomalies.size(); ++i) {
        const AnomalyRect& a = anomalies[i];
        if (a.w == 0 || a.h == 0 || a.x + a.w > width || a.y + a.h > height) {
            throw ConfigError("anomaly " + std::to_string(i) + " lies outside the scene");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (overlaps(a, anomalies[j])) {
                throw ConfigError("anomalies " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
            }
        }
    }
    if (anomaly_pixels() >= height * width) throw ConfigError("anomalies cover the whole scene");
}

std::size_t SceneSpec::anomaly_pixels() const {
    std::size_t n = 0;
    for (const AnomalyRect& a : anomalies) n += a.w * a.h;
    return n;
}

Scene generate(const SceneSpec& spec) {
    spec.validate();
    const std::size_t h = spec.height, w = spec.width, q = spec.bands, m = h * w;
    Rng rng(spec.seed);

    std::vector<std::vector<double>> endmembers;
    for (std::size_t k = 0; k < spec.n_endmembers; ++k) endmembers.push_back(smooth_spectrum(q, rng));

    // Softmax-normalized smooth abundance fields.
    std::vector<std::vector<double>> fields;
    for (std::size_t k = 0; k < spec.n_endmembers; ++k) fields.push_back(smooth_field(h, w, rng));
    std::vector<double> background(m * q, 0.0);  // pixel-major
    std::vector<double> weights(spec.n_endmembers);
    for (std::size_t i = 0; i < m; ++i) {
        double mx = -1e300;
        for (std::size_t k = 0; k < spec.n_endmembers; ++k) mx = std::max(mx, fields[k][i]);
        double total = 0.0;
        for (std::size_t k = 0; k < spec.n_endmembers; ++k) {
            weights[k] = std::exp(kAbundanceSharpness * (fields[k][i] - mx));
            total += weights[k];
        }
        for (std::size_t k = 0; k < spec.n_endmembers; ++k) {
            const double a = weights[k] / total;
            for (std::size_t b = 0; b < q; ++b) background[i * q + b] += a * endmembers[k][b];
        }
    }

    std::vector<double> band_mean(q, 0.0), band_std(q, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t b = 0; b < q; ++b) band_mean[b] += background[i * q + b];
    for (double& v : band_mean) v /= static_cast<double>(m);
    double total_var = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t b = 0; b < q; ++b) {
            const double d = background[i * q + b] - band_mean[b];
            band_std[b] += d * d;
        }
    }
    for (double& v : band_std) {
        total_var += v / static_cast<double>(m);
        v = std::sqrt(v / static_cast<double>(m));
    }
    const double scale = std::sqrt(total_var / static_cast<double>(q));

    // Second-date background under the imaging condition.
    std::vector<double> conditioned = background;
    const double s = spec.condition_strength;
    if (spec.condition != Condition::identical) {
        std::uniform_real_distribution<double> gain_dist(1.0 - s, 1.0 + s);
        std::uniform_real_distribution<double> offset_dist(-s, s);
        std::vector<double> gain(q), offset(q);
        for (std::size_t b = 0; b < q; ++b) {
            gain[b] = gain_dist(rng);
            offset[b] = offset_dist(rng) * scale;
        }
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t b = 0; b < q; ++b) {
                double t = background[i * q + b];
                if (spec.condition == Condition::nonlinear && band_std[b] > 0.0) {
                    t += s * band_std[b] * std::tanh(kKnee * (t - band_mean[b]) / band_std[b]);
                }
                conditioned[i * q + b] = gain[b] * t + offset[b];
            }
        }
    }

    std::vector<double> xs = background;
    std::vector<double> ys = conditioned;
    std::vector<Label> labels(m, Label::background);
    for (const AnomalyRect& a : spec.anomalies) {
        const std::vector<double> spectrum = smooth_spectrum(q, rng);
        std::vector<double>& target = a.mode == AnomalyMode::insert_t2 ? ys : xs;
        for (std::size_t r = a.y; r < a.y + a.h; ++r) {
            for (std::size_t c = a.x; c < a.x + a.w; ++c) {
                const std::size_t i = r * w + c;
                labels[i] = Label::anomaly;
                for (std::size_t b = 0; b < q; ++b) {
                    double& v = target[i * q + b];
                    v = spectrum[b] * spec.anomaly_contrast + v * (1.0 - spec.anomaly_contrast);
                }
            }
        }
    }

    if (spec.noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        for (double& v : xs) v += noise(rng);
        for (double& v : ys) v += noise(rng);
    }

    auto to_cube = [&](const std::vector<double>& pixel_major) {
        std::vector<float> bsq(m * q);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t b = 0; b < q; ++b) bsq[b * m + i] = static_cast<float>(pixel_major[i * q + b]);
        return HyperCube(h, w, q, std::move(bsq));
    };
    return Scene{to_cube(xs), to_cube(ys), GroundTruthMask(h, w, std::move(labels))};
}

nlohmann::json describe(const SceneSpec& spec) {
    spec.validate();
    nlohmann::json anomalies = nlohmann::json::array();
    for (const AnomalyRect& a : spec.anomalies) {
        anomalies.push_back({{"x", a.x}, {"y", a.y}, {"w", a.w}, {"h", a.h}, {"mode", to_string(a.mode)}});
    }
    return nlohmann::json{{"height", spec.height},
                          {"width", spec.width},
                          {"bands", spec.bands},
                          {"n_endmembers", spec.n_endmembers},
                          {"condition", to_string(spec.condition)},
                          {"condition_strength", spec.condition_strength},
                          {"noise_sigma", spec.noise_sigma},
                          {"anomaly_contrast", spec.anomaly_contrast},
                          {"anomalies", anomalies},
                          {"seed", spec.seed},
                          {"pixels", spec.height * spec.width},
                          {"anomaly_count", spec.anomalies.size()},
                          {"anomaly_pixels", spec.anomaly_pixels()}};
}

namespace {

std::size_t count_at(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    const bool ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    if (!ok) throw ConfigError(std::string(key) + " must be a nonnegative integer");
    return v.get<std::size_t>();
}

std::size_t count_or(const nlohmann::json& j, const char* key, std::size_t fallback) {
    return j.contains(key) ? count_at(j, key) : fallback;
}

}  // namespace

SceneSpec spec_from_json(const nlohmann::json& j) {
    SceneSpec s;
    try {
        s.height = count_at(j, "height");
        s.width = count_at(j, "width");
        s.bands = count_at(j, "bands");
        s.n_endmembers = count_or(j, "n_endmembers", s.n_endmembers);
        s.condition = parse_condition(j.value("condition", std::string("identical")));
        s.condition_strength = j.value("condition_strength", 0.0);
        s.noise_sigma = j.value("noise_sigma", 0.0);
        s.anomaly_contrast = j.value("anomaly_contrast", 1.0);
        s.seed = count_or(j, "seed", 0);
        if (j.contains("anomalies")) {
            for (const auto& a : j.at("anomalies")) {
                s.anomalies.push_back(AnomalyRect{count_at(a, "x"), count_at(a, "y"),
                                                  count_at(a, "w"), count_at(a, "h"),
                                                  parse_mode(a.value("mode", std::string("insert_t2")))});
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid scene spec: ") + e.what());
    }
    s.validate();
    return s;
}

std::vector<AnomalyRect> grid_anomalies(std::size_t height, std::size_t width, std::size_t count, std::size_t size,
                                        AnomalyMode first_mode) {
    std::vector<AnomalyRect> out;
    if (count == 0) return out;
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
    const std::size_t rows = (count + cols - 1) / cols;
    if ((rows + 1) * size * 2 > height || (cols + 1) * size * 2 > width) {
        throw ConfigError("scene too small for the requested anomaly grid");
    }
    for (std::size_t n = 0; n < count; ++n) {
        const std::size_t gr = n / cols, gc = n % cols;
        const std::size_t y = (gr + 1) * height / (rows + 1) - size / 2;
        const std::size_t x = (gc + 1) * width / (cols + 1) - size / 2;
        const AnomalyMode mode = (n % 2 == 0) ? first_mode
                                              : (first_mode == AnomalyMode::insert_t2 ? AnomalyMode::remove_t2
                                                                                      : AnomalyMode::insert_t2);
        out.push_back(AnomalyRect{x, y, size, size, mode});
    }
    return out;
}

}  // namespace acdkit::synth
