#pragma once

#include <cstddef>
#include <vector>

#include "acdkit/matrix.hpp"

namespace acdkit::linalg {

/// Square symmetric matrix. Construction checks symmetry to 1e-9 relative
/// tolerance and finiteness, then stores the exactly symmetrized average.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(Matrix m);

    std::size_t dim() const { return m_.rows(); }
    double operator()(std::size_t r, std::size_t c) const { return m_(r, c); }
    const Matrix& matrix() const { return m_; }
    double trace() const;

private:
    Matrix m_;
};

struct Stats {
    std::vector<double> mean;
    SymMatrix cov;
    std::size_t count = 0;
};

struct EigenDecomposition {
    std::vector<double> values;  ///< ascending
    Matrix vectors;              ///< column k pairs with values[k]
};

/// Column means and population (1/M) covariance. Requires M >= 2.
Stats mean_cov(const Matrix& m);

/// Cyclic Jacobi eigensolver.
EigenDecomposition eigh(const SymMatrix& a);

/// 1e-6 * trace(a) / dim, the conditioning ridge used when none is given.
double default_ridge(const SymMatrix& a);

/// V diag(1/sqrt(lambda + ridge)) V^T.
SymMatrix inv_sqrt(const SymMatrix& a, double ridge);

/// V diag(sqrt(max(lambda, 0))) V^T for a PSD matrix.
SymMatrix sqrt_psd(const SymMatrix& a);

/// Solves A w = lambda B w through the whitening W = inv_sqrt(B, ridge).
/// Eigenvectors are returned as columns, B-orthonormal.
EigenDecomposition generalized_eigh(const SymMatrix& a, const SymMatrix& b, double ridge);

/// Solves (A + ridge I) X = rhs by Cholesky factorization.
Matrix solve_spd(const SymMatrix& a, const Matrix& rhs, double ridge);

}  // namespace acdkit::linalg
