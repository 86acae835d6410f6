#include "acdkit/predetect.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>

#include "acdkit/error.hpp"
#include "acdkit/linalg.hpp"

namespace acdkit::predetect {

namespace {

constexpr double kLambdaFloor = 1e-12;

void check_pair(const PixelMatrix& x, const PixelMatrix& y) {
    if (x.rows() != y.rows() || x.cols() != y.cols()) throw ConfigError("image pair dimensions differ");
}

// Linear interpolation between order statistics, p in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

UsfaModel usfa_fit(const PixelMatrix& x, const PixelMatrix& y, double ridge) {
    check_pair(x, y);
    const linalg::Stats sx = linalg::mean_cov(x);
    const linalg::Stats sy = linalg::mean_cov(y);
    const PixelMatrix diff = x - y;
    const linalg::Stats sd = linalg::mean_cov(diff);

    const std::size_t q = x.cols();
    Matrix avg(q, q);
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < q; ++j) avg(i, j) = 0.5 * (sx.cov(i, j) + sy.cov(i, j));
    const linalg::SymMatrix b(std::move(avg));
    if (ridge < 0.0) ridge = linalg::default_ridge(b);

    const linalg::EigenDecomposition eig = linalg::generalized_eigh(sd.cov, b, ridge);

    UsfaModel model;
    model.mean_x = sx.mean;
    model.mean_y = sy.mean;
    std::size_t keep = 0;
    while (keep < eig.values.size() && eig.values[keep] < 1.0) ++keep;
    if (keep == 0) {
        keep = 1;
        model.fallback_single = true;
    }
    model.projection = Matrix(keep, q);
    for (std::size_t k = 0; k < keep; ++k) {
        model.eigenvalues.push_back(std::max(eig.values[k], 0.0));
        for (std::size_t b2 = 0; b2 < q; ++b2) model.projection(k, b2) = eig.vectors(b2, k);
    }
    return model;
}

IntensityMap usfa_intensity(const UsfaModel& model, const PixelMatrix& x, const PixelMatrix& y, Shape2 shape) {
    check_pair(x, y);
    const std::size_t q = x.cols();
    if (model.projection.cols() != q) throw ConfigError("USFA model band count does not match images");
    if (shape.pixels() != x.rows()) throw ConfigError("USFA: map shape does not match pixel count");

    std::vector<double> scores(x.rows());
    std::vector<double> d(q);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto xi = x.row(i);
        auto yi = y.row(i);
        for (std::size_t b = 0; b < q; ++b) d[b] = (xi[b] - model.mean_x[b]) - (yi[b] - model.mean_y[b]);
        double s = 0.0;
        for (std::size_t k = 0; k < model.components(); ++k) {
            auto p = model.projection.row(k);
            double proj = 0.0;
            for (std::size_t b = 0; b < q; ++b) proj += p[b] * d[b];
            s += proj * proj / std::max(model.eigenvalues[k], kLambdaFloor);
        }
        scores[i] = s;
    }
    return IntensityMap(shape.height, shape.width, std::move(scores));
}

ClusterResult kmeans_1d(std::span<const double> values, std::size_t k, std::uint64_t /*seed*/) {
    if (k == 0 || k > 255) throw ConfigError("kmeans_1d: k must be in [1, 255]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto distinct = static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
    if (distinct < k) throw ConfigError("kmeans_1d: fewer distinct values than clusters");
    sorted.assign(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());

    const std::size_t n = values.size();
    std::vector<double> centers(k);
    for (std::size_t j = 0; j < k; ++j) {
        centers[j] = quantile_sorted(sorted, static_cast<double>(2 * j + 1) / static_cast<double>(2 * k));
    }

    std::vector<std::uint8_t> assign(n, 0);
    auto nearest = [&](double v) {
        std::size_t best = 0;
        double best_d = std::abs(v - centers[0]);
        for (std::size_t j = 1; j < k; ++j) {
            const double dj = std::abs(v - centers[j]);
            if (dj < best_d) {
                best_d = dj;
                best = j;
            }
        }
        return static_cast<std::uint8_t>(best);
    };

    // Moves the point farthest from its own center into each empty cluster.
    auto reseed_empty = [&](std::vector<std::size_t>& counts) {
        bool any = false;
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] != 0) continue;
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[assign[i]] <= 1) continue;
                const double dist = std::abs(values[i] - centers[assign[i]]);
                if (dist > far_d) {
                    far_d = dist;
                    far = i;
                }
            }
            if (far == n) throw NumericalError("kmeans_1d: cannot reseed an empty cluster");
            --counts[assign[far]];
            assign[far] = static_cast<std::uint8_t>(j);
            counts[j] = 1;
            centers[j] = values[far];
            any = true;
        }
        return any;
    };

    auto update_centers = [&](const std::vector<std::size_t>& counts) {
        std::vector<double> sums(k, 0.0);
        for (std::size_t i = 0; i < n; ++i) sums[assign[i]] += values[i];
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] > 0) centers[j] = sums[j] / static_cast<double>(counts[j]);
        }
    };

    std::size_t iter = 0;
    bool first = true;
    while (iter < kMaxKmeansIterations) {
        ++iter;
        bool changed = first;
        first = false;
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint8_t a = nearest(values[i]);
            if (a != assign[i]) changed = true;
            assign[i] = a;
            ++counts[a];
        }
        if (reseed_empty(counts)) changed = true;
        update_centers(counts);
        if (!changed) break;
    }
    {
        std::vector<std::size_t> counts(k, 0);
        for (auto a : assign) ++counts[a];
        if (reseed_empty(counts)) update_centers(counts);
    }

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return centers[a] < centers[b]; });
    std::vector<std::uint8_t> rank(k);
    ClusterResult out;
    for (std::size_t r = 0; r < k; ++r) {
        rank[order[r]] = static_cast<std::uint8_t>(r);
        out.centers.push_back(centers[order[r]]);
    }
    out.assignments.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.assignments[i] = rank[assign[i]];
    out.iterations = iter;
    return out;
}

std::size_t default_sample_count(std::size_t pixels) {
    const auto scaled = static_cast<std::size_t>(std::ceil(0.06 * static_cast<double>(pixels)));
    return std::min<std::size_t>(10000, scaled);
}

Selection select_samples(const PixelMatrix& x, const PixelMatrix& y, const IntensityMap& intensity,
                         std::size_t count, std::uint64_t seed) {
    check_pair(x, y);
    if (count == 0) throw ConfigError("select_samples: sample count must be >= 1");
    if (intensity.size() != x.rows()) throw ConfigError("select_samples: intensity map does not match images");

    std::vector<double> distinct = intensity.values();
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    std::vector<std::size_t> pool;
    if (distinct.size() < 3) {
        // Too few levels for three clusters: the minimum level is the background.
        for (std::size_t i = 0; i < intensity.size(); ++i) {
            if (intensity[i] == distinct.front()) pool.push_back(i);
        }
    } else {
        const ClusterResult clusters = kmeans_1d(intensity.values(), 3, seed);
        for (std::size_t i = 0; i < clusters.assignments.size(); ++i) {
            if (clusters.assignments[i] == 0) pool.push_back(i);
        }
    }
    if (pool.empty()) throw NumericalError("select_samples: background cluster is empty");

    Selection sel;
    sel.pool_size = pool.size();
    if (count > pool.size()) {
        std::cerr << "warning: requested " << count << " samples but the background pool holds " << pool.size()
                  << "; using the whole pool\n";
        sel.clamped = true;
        count = pool.size();
    }
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first `count` entries become a uniform draw.
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    sel.indices.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(sel.indices.begin(), sel.indices.end());

    const std::size_t q = x.cols();
    sel.samples = nn::SampleSet{Matrix(count, q), Matrix(count, q)};
    for (std::size_t r = 0; r < count; ++r) {
        std::copy_n(x.row(sel.indices[r]).begin(), q, sel.samples.inputs.row(r).begin());
        std::copy_n(y.row(sel.indices[r]).begin(), q, sel.samples.labels.row(r).begin());
    }
    return sel;
}

}  // namespace acdkit::predetect
