#include "acdkit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "acdkit/error.hpp"

namespace acdkit {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw ConfigError("matrix data length does not match dimensions");
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ConfigError("matrix product dimension mismatch");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double s = a(i, k);
            if (s == 0.0) continue;
            auto src = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += s * src[j];
        }
    }
    return out;
}

namespace {
template <class Op>
Matrix elementwise(const Matrix& a, const Matrix& b, Op op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ConfigError("matrix elementwise dimension mismatch");
    }
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.data().size(); ++i) out.data()[i] = op(a.data()[i], b.data()[i]);
    return out;
}
}  // namespace

Matrix operator+(const Matrix& a, const Matrix& b) {
    return elementwise(a, b, [](double u, double v) { return u + v; });
}
Matrix operator-(const Matrix& a, const Matrix& b) {
    return elementwise(a, b, [](double u, double v) { return u - v; });
}
Matrix operator*(double s, const Matrix& a) {
    Matrix out = a;
    for (double& v : out.data()) v *= s;
    return out;
}

double frobenius(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return std::sqrt(s);
}

}  // namespace acdkit

namespace acdkit::linalg {

namespace {

constexpr double kSymmetryTol = 1e-9;
constexpr double kPsdTol = 1e-8;
constexpr double kJacobiTol = 1e-12;
constexpr int kJacobiMaxSweeps = 100;

double max_abs(const Matrix& m) {
    double v = 0.0;
    for (double x : m.data()) v = std::max(v, std::abs(x));
    return v;
}

// Lowest admissible eigenvalue for a nominally PSD matrix.
double psd_floor(const std::vector<double>& values) {
    double scale = 0.0;
    for (double v : values) scale += std::abs(v);
    return -kPsdTol * scale;
}

SymMatrix from_eigen(const EigenDecomposition& e, auto&& f) {
    const std::size_t n = e.values.size();
    Matrix out(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double d = f(e.values[k]);
        if (d == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const double vi = d * e.vectors(i, k);
            for (std::size_t j = 0; j < n; ++j) out(i, j) += vi * e.vectors(j, k);
        }
    }
    return SymMatrix(std::move(out));
}

}  // namespace

SymMatrix::SymMatrix(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw ConfigError("symmetric matrix must be square");
    const double scale = std::max(1.0, max_abs(m_));
    for (double v : m_.data()) {
        if (!std::isfinite(v)) throw NumericalError("matrix has non-finite entries");
    }
    const std::size_t n = m_.rows();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(m_(i, j) - m_(j, i)) > kSymmetryTol * scale) {
                throw ConfigError("matrix is not symmetric");
            }
            const double avg = 0.5 * (m_(i, j) + m_(j, i));
            m_(i, j) = avg;
            m_(j, i) = avg;
        }
    }
}

double SymMatrix::trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) t += m_(i, i);
    return t;
}

Stats mean_cov(const Matrix& m) {
    const std::size_t rows = m.rows();
    const std::size_t q = m.cols();
    if (rows < 2) throw ConfigError("mean_cov needs at least 2 samples");
    std::vector<double> mean(q, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        auto r = m.row(i);
        for (std::size_t b = 0; b < q; ++b) mean[b] += r[b];
    }
    for (double& v : mean) v /= static_cast<double>(rows);

    Matrix cov(q, q);
    std::vector<double> centered(q);
    for (std::size_t i = 0; i < rows; ++i) {
        auto r = m.row(i);
        for (std::size_t b = 0; b < q; ++b) centered[b] = r[b] - mean[b];
        for (std::size_t a = 0; a < q; ++a) {
            const double ca = centered[a];
            for (std::size_t b = a; b < q; ++b) cov(a, b) += ca * centered[b];
        }
    }
    for (std::size_t a = 0; a < q; ++a) {
        for (std::size_t b = a; b < q; ++b) {
            cov(a, b) /= static_cast<double>(rows);
            cov(b, a) = cov(a, b);
        }
    }
    return Stats{std::move(mean), SymMatrix(std::move(cov)), rows};
}

EigenDecomposition eigh(const SymMatrix& sym) {
    const std::size_t n = sym.dim();
    Matrix a = sym.matrix();
    Matrix v = Matrix::identity(n);
    const double norm = frobenius(a);

    auto off_diagonal = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) s += a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    bool converged = norm == 0.0;
    for (int sweep = 0; sweep < kJacobiMaxSweeps && !converged; ++sweep) {
        if (off_diagonal() <= kJacobiTol * norm) {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (!converged && off_diagonal() > kJacobiTol * norm) {
        throw NumericalError("Jacobi eigensolver did not converge in " + std::to_string(kJacobiMaxSweeps) +
                             " sweeps");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
    EigenDecomposition out{std::vector<double>(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

double default_ridge(const SymMatrix& a) {
    if (a.dim() == 0) return 0.0;
    return 1e-6 * a.trace() / static_cast<double>(a.dim());
}

SymMatrix inv_sqrt(const SymMatrix& a, double ridge) {
    const EigenDecomposition e = eigh(a);
    const double floor = psd_floor(e.values);
    const double top = e.values.empty() ? 0.0 : std::abs(e.values.back()) + ridge;
    for (double lambda : e.values) {
        if (lambda < floor) throw NumericalError("matrix is not positive semidefinite");
        if (lambda + ridge <= 1e-14 * top || lambda + ridge <= 0.0) {
            throw NumericalError("matrix is singular after ridge; increase the ridge");
        }
    }
    return from_eigen(e, [ridge](double lambda) { return 1.0 / std::sqrt(lambda + ridge); });
}

SymMatrix sqrt_psd(const SymMatrix& a) {
    const EigenDecomposition e = eigh(a);
    const double floor = psd_floor(e.values);
    for (double lambda : e.values) {
        if (lambda < floor) throw NumericalError("matrix is not positive semidefinite");
    }
    return from_eigen(e, [](double lambda) { return std::sqrt(std::max(lambda, 0.0)); });
}

EigenDecomposition generalized_eigh(const SymMatrix& a, const SymMatrix& b, double ridge) {
    if (a.dim() != b.dim()) throw ConfigError("generalized_eigh: dimension mismatch");
    const SymMatrix w = inv_sqrt(b, ridge);
    const Matrix reduced = w.matrix() * a.matrix() * w.matrix();
    // Products of symmetric factors drift from exact symmetry by rounding only.
    Matrix sym = reduced;
    const std::size_t n = sym.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) sym(i, j) = sym(j, i) = 0.5 * (reduced(i, j) + reduced(j, i));
    EigenDecomposition e = eigh(SymMatrix(std::move(sym)));
    e.vectors = w.matrix() * e.vectors;
    return e;
}

Matrix solve_spd(const SymMatrix& a, const Matrix& rhs, double ridge) {
    const std::size_t n = a.dim();
    if (rhs.rows() != n) throw ConfigError("solve_spd: right-hand side has wrong row count");
    Matrix l(n, n);
    const double scale = std::max(a.trace() / std::max<std::size_t>(n, 1), 0.0) + ridge;
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j) + ridge;
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 1e-14 * scale) || d <= 0.0) {
            throw NumericalError("matrix is singular or indefinite after ridge; increase the ridge");
        }
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    Matrix x = rhs;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
            x(i, c) = s / l(i, i);
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x(i, c);
            for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x(k, c);
            x(i, c) = s / l(i, i);
        }
    }
    return x;
}

}  // namespace acdkit::linalg
