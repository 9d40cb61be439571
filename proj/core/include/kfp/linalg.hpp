#pragma once

#include <Eigen/Dense>

#include "kfp/errors.hpp"

namespace kfp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

/// Cholesky-type factor of a symmetric positive definite matrix together
/// with its log-determinant, read off the factor diagonal.
struct SpdFactor {
    Matrix lower;          // lower-triangular, strictly positive diagonal
    double log_det = 0.0;  // = 2 * sum(log(diag(lower)))

    int n() const { return static_cast<int>(lower.rows()); }

    // Solves S x = b through the two triangular factors.
    Vector solve(const Vector& b) const;
    Matrix inverse() const;
};

// exp(s*M) by scaling-and-squaring with a Pade(13,13) core.
// Relative accuracy ~1e-12 for ||s*M|| up to ~50; throws OverflowError when
// the result is not representable in double.
Matrix mat_exp(const Matrix& M, double s = 1.0);

// Cholesky factorization with diagonal balancing, so badly scaled matrices
// (entries spanning many orders of magnitude) keep an accurate log-det.
// Input is symmetrized first; throws NotSymmetric if the asymmetry exceeds
// 1e-12 relative, NotPositiveDefinite if the matrix is not positive.
SpdFactor spd_factor(const Matrix& S);

// Symmetric square root via eigendecomposition: R*R = S to ~1e-10 relative.
Matrix spd_sqrt(const Matrix& S);

// Number of singular values above tol_rel * (largest singular value).
int rank_with_tolerance(const Matrix& M, double tol_rel = 1e-10);

inline Matrix symmetrized(const Matrix& S) { return 0.5 * (S + S.transpose()); }

} // namespace linalg
} // namespace kfp
