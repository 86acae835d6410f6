#include "acdkit/baselines.hpp"

#include "acdkit/acda.hpp"
#include "acdkit/error.hpp"
#include "acdkit/linalg.hpp"

namespace acdkit::baselines {

namespace {

void check_pair(const PixelMatrix& x, const PixelMatrix& y) {
    if (x.rows() != y.rows() || x.cols() != y.cols()) throw ConfigError("image pair dimensions differ");
}

double pick_ridge(double ridge, const linalg::SymMatrix& a) { return ridge < 0.0 ? linalg::default_ridge(a) : ridge; }

}  // namespace

PixelMatrix LinearPredictor::predict(const PixelMatrix& x) const {
    const std::size_t q_in = gain.cols();
    const std::size_t q_out = gain.rows();
    if (x.cols() != q_in) throw ConfigError("linear predictor: band count mismatch");
    PixelMatrix out(x.rows(), q_out);
    std::vector<double> centered(q_in);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto xi = x.row(i);
        for (std::size_t b = 0; b < q_in; ++b) centered[b] = xi[b] - mean_in[b];
        auto yi = out.row(i);
        for (std::size_t o = 0; o < q_out; ++o) {
            auto g = gain.row(o);
            double s = mean_out[o];
            for (std::size_t b = 0; b < q_in; ++b) s += g[b] * centered[b];
            yi[o] = s;
        }
    }
    return out;
}

IntensityMap diff_rx(const PixelMatrix& x, const PixelMatrix& y, Shape2 shape, double ridge) {
    check_pair(x, y);
    if (shape.pixels() != x.rows()) throw ConfigError("diff_rx: map shape does not match pixel count");
    const PixelMatrix d = x - y;
    const linalg::Stats st = linalg::mean_cov(d);
    const std::size_t q = d.cols();
    std::vector<double> scores(d.rows(), 0.0);
    if (st.cov.trace() == 0.0) {
        // Every difference equals the mean difference.
        return IntensityMap(shape.height, shape.width, std::move(scores));
    }
    const Matrix inv = linalg::solve_spd(st.cov, Matrix::identity(q), pick_ridge(ridge, st.cov));
    std::vector<double> c(q);
    for (std::size_t i = 0; i < d.rows(); ++i) {
        auto di = d.row(i);
        for (std::size_t b = 0; b < q; ++b) c[b] = di[b] - st.mean[b];
        double s = 0.0;
        for (std::size_t a = 0; a < q; ++a) {
            auto row = inv.row(a);
            double t = 0.0;
            for (std::size_t b = 0; b < q; ++b) t += row[b] * c[b];
            s += c[a] * t;
        }
        scores[i] = std::max(s, 0.0);
    }
    return IntensityMap(shape.height, shape.width, std::move(scores));
}

LinearPredictor fit_cc(const PixelMatrix& x, const PixelMatrix& y, double ridge) {
    check_pair(x, y);
    const linalg::Stats sx = linalg::mean_cov(x);
    const linalg::Stats sy = linalg::mean_cov(y);
    const std::size_t q = x.cols();
    const std::size_t m = x.rows();
    // Cross covariance cov(x, y), Q x Q.
    Matrix cxy(q, q);
    for (std::size_t i = 0; i < m; ++i) {
        auto xi = x.row(i);
        auto yi = y.row(i);
        for (std::size_t a = 0; a < q; ++a) {
            const double xa = xi[a] - sx.mean[a];
            for (std::size_t b = 0; b < q; ++b) cxy(a, b) += xa * (yi[b] - sy.mean[b]);
        }
    }
    for (double& v : cxy.data()) v /= static_cast<double>(m);
    // gain^T = (Sxx + rI)^-1 Sxy
    const Matrix gain_t = linalg::solve_spd(sx.cov, cxy, pick_ridge(ridge, sx.cov));
    return LinearPredictor{PredictorKind::cc, gain_t.transposed(), sx.mean, sy.mean};
}

LinearPredictor fit_ce(const PixelMatrix& x, const PixelMatrix& y, double ridge) {
    check_pair(x, y);
    const linalg::Stats sx = linalg::mean_cov(x);
    const linalg::Stats sy = linalg::mean_cov(y);
    const linalg::SymMatrix whiten = linalg::inv_sqrt(sx.cov, pick_ridge(ridge, sx.cov));
    const linalg::SymMatrix color = linalg::sqrt_psd(sy.cov);
    return LinearPredictor{PredictorKind::ce, color.matrix() * whiten.matrix(), sx.mean, sy.mean};
}

IntensityMap baseline_map(const LinearPredictor& pred, const PixelMatrix& x, const PixelMatrix& y, Shape2 shape) {
    check_pair(x, y);
    return acda::loss_map(pred.predict(x), y, shape);
}

BaselineResult run_baseline(PredictorKind kind, const HyperCube& x_cube, const HyperCube& y_cube, double ridge) {
    if (x_cube.height() != y_cube.height() || x_cube.width() != y_cube.width() ||
        x_cube.bands() != y_cube.bands()) {
        throw ConfigError("cube dimensions differ");
    }
    const PixelMatrix x = flatten(x_cube);
    const PixelMatrix y = flatten(y_cube);
    auto fit = [&](const PixelMatrix& in, const PixelMatrix& out) {
        return kind == PredictorKind::cc ? fit_cc(in, out, ridge) : fit_ce(in, out, ridge);
    };
    BaselineResult r;
    r.forward = baseline_map(fit(x, y), x, y, x_cube.shape());
    r.backward = baseline_map(fit(y, x), y, x, x_cube.shape());
    r.fused = acda::fuse_min(r.forward, r.backward);
    return r;
}

std::string to_string(PredictorKind kind) { return kind == PredictorKind::cc ? "cc" : "ce"; }

}  // namespace acdkit::baselines
