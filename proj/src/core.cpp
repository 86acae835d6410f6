#include "acdkit/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "acdkit/error.hpp"

namespace acdkit {

namespace fs = std::filesystem;
using nlohmann::json;

HyperCube::HyperCube(std::size_t height, std::size_t width, std::size_t bands, std::vector<float> data)
    : height_(height), width_(width), bands_(bands), data_(std::move(data)) {
    if (height_ == 0 || width_ == 0 || bands_ == 0) throw ConfigError("cube dimensions must be positive");
    if (data_.size() != height_ * width_ * bands_) {
        throw ConfigError("cube data length " + std::to_string(data_.size()) + " != " +
                          std::to_string(height_ * width_ * bands_));
    }
    if (!std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); })) {
        throw ConfigError("cube contains non-finite values");
    }
}

GroundTruthMask::GroundTruthMask(std::size_t height, std::size_t width, std::vector<Label> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
    if (height_ == 0 || width_ == 0) throw ConfigError("mask dimensions must be positive");
    if (labels_.size() != height_ * width_) throw ConfigError("mask label count does not match dimensions");
    if (anomaly_count() == labels_.size()) throw ConfigError("mask has no background pixel");
}

std::size_t GroundTruthMask::anomaly_count() const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), Label::anomaly));
}

IntensityMap::IntensityMap(std::size_t height, std::size_t width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
    if (values_.size() != height_ * width_) throw ConfigError("intensity map size does not match dimensions");
    for (double v : values_) {
        if (!std::isfinite(v) || v < 0.0) throw NumericalError("intensity map values must be finite and >= 0");
    }
}

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
void to_little_endian(std::vector<T>& v) {
    if constexpr (std::endian::native == std::endian::big) {
        for (T& x : v) {
            unsigned char b[sizeof(T)];
            std::memcpy(b, &x, sizeof(T));
            std::reverse(b, b + sizeof(T));
            std::memcpy(&x, b, sizeof(T));
        }
    }
}

fs::path raw_path_for(const fs::path& header) {
    fs::path raw = header;
    raw.replace_extension(".raw");
    return raw;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

json cube_header(std::size_t h, std::size_t w, std::size_t bands, const fs::path& raw) {
    return json{{"height", h}, {"width", w}, {"bands", bands}, {"dtype", "f32"},
                {"interleave", "bsq"}, {"raw", raw.filename().string()}};
}

void write_raw_f32(const fs::path& raw, std::vector<float> values) {
    to_little_endian(values);
    std::ofstream out(raw, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + raw.string());
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (!out) throw IoError("write failed for " + raw.string());
}

}  // namespace

HyperCube read_cube(const fs::path& header) {
    const json h = read_json_file(header);
    std::size_t height = 0, width = 0, bands = 0;
    std::string raw_name;
    try {
        height = h.at("height").get<std::size_t>();
        width = h.at("width").get<std::size_t>();
        bands = h.at("bands").get<std::size_t>();
        raw_name = h.at("raw").get<std::string>();
        if (h.value("dtype", std::string("f32")) != "f32") {
            throw ConfigError("unsupported dtype " + h.at("dtype").get<std::string>());
        }
        if (h.value("interleave", std::string("bsq")) != "bsq") {
            throw ConfigError("unsupported interleave " + h.at("interleave").get<std::string>());
        }
    } catch (const json::exception& e) {
        throw ConfigError("invalid cube header " + header.string() + ": " + e.what());
    }

    const fs::path raw = header.parent_path() / raw_name;
    std::ifstream in(raw, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open raw file " + raw.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    const std::size_t expected = height * width * bands;
    if (bytes != expected * sizeof(float)) {
        throw ConfigError("raw size mismatch: " + raw.string() + " holds " + std::to_string(bytes / sizeof(float)) +
                          " values, header declares " + std::to_string(expected));
    }
    std::vector<float> data(expected);
    in.seekg(0);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw IoError("read failed for " + raw.string());
    to_little_endian(data);
    return HyperCube(height, width, bands, std::move(data));
}

void write_cube(const HyperCube& cube, const fs::path& header) {
    const fs::path raw = raw_path_for(header);
    write_raw_f32(raw, cube.data());
    write_text_file(header, cube_header(cube.height(), cube.width(), cube.bands(), raw).dump(2) + "\n");
}

PixelMatrix flatten(const HyperCube& cube) {
    const std::size_t m = cube.pixels();
    const std::size_t q = cube.bands();
    PixelMatrix out(m, q);
    const auto& d = cube.data();
    for (std::size_t b = 0; b < q; ++b)
        for (std::size_t i = 0; i < m; ++i) out(i, b) = d[b * m + i];
    return out;
}

HyperCube unflatten(const PixelMatrix& mat, std::size_t height, std::size_t width) {
    if (mat.rows() != height * width) throw ConfigError("unflatten: row count does not match H*W");
    const std::size_t m = mat.rows();
    const std::size_t q = mat.cols();
    std::vector<float> data(m * q);
    for (std::size_t b = 0; b < q; ++b)
        for (std::size_t i = 0; i < m; ++i) data[b * m + i] = static_cast<float>(mat(i, b));
    return HyperCube(height, width, q, std::move(data));
}

namespace {

// Reads one whitespace/comment-delimited PGM header token.
std::string pgm_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

std::size_t pgm_number(std::istream& in, const fs::path& path) {
    const std::string tok = pgm_token(in);
    if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(c); })) {
        throw ConfigError("malformed PGM header in " + path.string());
    }
    return std::stoul(tok);
}

}  // namespace

GroundTruthMask read_mask(const fs::path& path, std::optional<Shape2> expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    if (pgm_token(in) != "P5") throw ConfigError("not a binary PGM (P5): " + path.string());
    const std::size_t width = pgm_number(in, path);
    const std::size_t height = pgm_number(in, path);
    const std::size_t maxval = pgm_number(in, path);
    if (width == 0 || height == 0 || maxval == 0 || maxval > 255) {
        throw ConfigError("unsupported PGM geometry or maxval in " + path.string());
    }
    std::vector<unsigned char> bytes(width * height);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
        throw ConfigError("truncated PGM payload in " + path.string());
    }
    if (expected && (expected->height != height || expected->width != width)) {
        throw ConfigError("mask " + path.string() + " is " + std::to_string(height) + "x" + std::to_string(width) +
                          ", expected " + std::to_string(expected->height) + "x" +
                          std::to_string(expected->width));
    }
    std::vector<Label> labels(bytes.size());
    std::transform(bytes.begin(), bytes.end(), labels.begin(),
                   [](unsigned char b) { return b != 0 ? Label::anomaly : Label::background; });
    return GroundTruthMask(height, width, std::move(labels));
}

void write_mask(const GroundTruthMask& mask, const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P5\n" << mask.width() << " " << mask.height() << "\n255\n";
    for (Label l : mask.labels()) out.put(l == Label::anomaly ? static_cast<char>(255) : '\0');
    if (!out) throw IoError("write failed for " + path.string());
}

void write_map(const IntensityMap& map, const fs::path& header,
               const std::vector<std::pair<std::string, std::string>>& extra) {
    const fs::path raw = raw_path_for(header);
    std::vector<float> values(map.values().begin(), map.values().end());
    write_raw_f32(raw, std::move(values));
    json h = cube_header(map.height(), map.width(), 1, raw);
    for (const auto& [k, v] : extra) h[k] = v;
    write_text_file(header, h.dump(2) + "\n");
}

IntensityMap read_map(const fs::path& header) {
    const HyperCube cube = read_cube(header);
    if (cube.bands() != 1) throw ConfigError("intensity map must have exactly one band: " + header.string());
    std::vector<double> values(cube.data().begin(), cube.data().end());
    return IntensityMap(cube.height(), cube.width(), std::move(values));
}

}  // namespace acdkit
