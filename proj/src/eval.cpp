#include "acdkit/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include "acdkit/error.hpp"

namespace acdkit::eval {

namespace {

std::string shortest(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("bad number in ROC CSV: '" + s + "'");
    return v;
}

}  // namespace

RocCurve roc(const std::vector<double>& scores, const std::vector<Label>& labels) {
    if (scores.size() != labels.size()) throw ConfigError("roc: score and label counts differ");
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::anomaly));
    const std::size_t negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0) throw ConfigError("roc: ground truth needs both anomaly and background pixels");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    double area = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        const double t = scores[order[i]];
        std::size_t j = i;
        for (; j < order.size() && scores[order[j]] == t; ++j) {
            if (labels[order[j]] == Label::anomaly) ++tp; else ++fp;
        }
        const RocPoint p{t, static_cast<double>(fp) / static_cast<double>(negatives),
                         static_cast<double>(tp) / static_cast<double>(positives)};
        const RocPoint& prev = curve.points.back();
        area += (p.far - prev.far) * (p.dr + prev.dr) * 0.5;
        curve.points.push_back(p);
        i = j;
    }
    curve.auc = area;
    return curve;
}

RocCurve roc(const IntensityMap& map, const GroundTruthMask& truth) {
    if (map.shape() != truth.shape()) throw ConfigError("roc: map and mask dimensions differ");
    return roc(map.values(), truth.labels());
}

double detection_rate_at(const RocCurve& curve, double far) {
    double best = 0.0;
    for (const RocPoint& p : curve.points) {
        if (p.far <= far) best = std::max(best, p.dr);
    }
    return best;
}

Gray8 stretch2(const IntensityMap& map) {
    if (map.size() == 0) throw ConfigError("stretch2: empty map");
    std::vector<double> sorted = map.values();
    std::sort(sorted.begin(), sorted.end());
    auto pct = [&](double p) {
        const double pos = p * static_cast<double>(sorted.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    const double lo = pct(0.02);
    const double hi = pct(0.98);
    Gray8 img{map.height(), map.width(), std::vector<std::uint8_t>(map.size(), 0)};
    if (!(hi > lo)) return img;
    for (std::size_t i = 0; i < map.size(); ++i) {
        const double v = std::clamp((map[i] - lo) / (hi - lo), 0.0, 1.0) * 255.0;
        img.pixels[i] = static_cast<std::uint8_t>(std::round(v));
    }
    return img;
}

void write_pgm(const Gray8& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "threshold,far,dr\n";
    for (const RocPoint& p : curve.points) {
        out << shortest(p.threshold) << ',' << shortest(p.far) << ',' << shortest(p.dr) << '\n';
    }
    char auc[32];
    std::snprintf(auc, sizeof(auc), "%.6f", curve.auc);
    out << "# auc=" << auc << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

RocCurve read_roc_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "threshold,far,dr") throw ConfigError("missing ROC CSV header");
    RocCurve curve;
    bool have_auc = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# auc=", 0) == 0) {
            curve.auc = parse_double(line.substr(6));
            have_auc = true;
            continue;
        }
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) throw ConfigError("malformed ROC CSV row");
        curve.points.push_back({parse_double(line.substr(0, c1)), parse_double(line.substr(c1 + 1, c2 - c1 - 1)),
                                parse_double(line.substr(c2 + 1))});
    }
    if (!have_auc) throw ConfigError("ROC CSV lacks the auc comment");
    return curve;
}

}  // namespace acdkit::eval
