#include "kfp/linalg.hpp"

#include <cmath>
#include <string>

namespace kfp::linalg {

Vector SpdFactor::solve(const Vector& b) const {
    Vector y = lower.triangularView<Eigen::Lower>().solve(b);
    return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix SpdFactor::inverse() const {
    const int m = n();
    Matrix inv(m, m);
    for (int j = 0; j < m; ++j)
        inv.col(j) = solve(Vector::Unit(m, j));
    return symmetrized(inv);
}

namespace {

// Pade(13,13) numerator/denominator split for exp(A), Higham's coefficients.
void pade13(const Matrix& A, Matrix& U, Matrix& V) {
    static const double b[] = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0,  129060195264000.0,   10559470521600.0,
        670442572800.0,      33522128640.0,       1323241920.0,
        40840800.0,          960960.0,            16380.0,
        182.0,               1.0};
    const int n = static_cast<int>(A.rows());
    const Matrix I = Matrix::Identity(n, n);
    const Matrix A2 = A * A;
    const Matrix A4 = A2 * A2;
    const Matrix A6 = A4 * A2;
    U = A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) +
             b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
    V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) +
        b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
}

} // namespace

Matrix mat_exp(const Matrix& M, double s) {
    if (M.rows() != M.cols())
        throw Error(errc::validation, "mat_exp: matrix must be square");
    if (!M.allFinite() || !std::isfinite(s))
        throw Error(errc::validation, "mat_exp: non-finite input");

    Matrix A = s * M;
    const double norm1 = A.cwiseAbs().colwise().sum().maxCoeff();
    if (norm1 > 700.0)
        throw OverflowError("mat_exp: ||s*M|| = " + std::to_string(norm1) +
                            " exceeds the representable range");

    // theta_13 from the double-precision scaling analysis
    const double theta13 = 5.371920351148152;
    int squarings = 0;
    if (norm1 > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
        A /= std::pow(2.0, squarings);
    }

    Matrix U, V;
    pade13(A, U, V);
    Matrix R = (V - U).partialPivLu().solve(V + U);
    for (int i = 0; i < squarings; ++i)
        R = R * R;

    if (!R.allFinite())
        throw OverflowError("mat_exp: result overflowed");
    return R;
}

SpdFactor spd_factor(const Matrix& S) {
    if (S.rows() != S.cols())
        throw Error(errc::validation, "spd_factor: matrix must be square");
    const double scale = S.cwiseAbs().maxCoeff();
    const double asym = (S - S.transpose()).cwiseAbs().maxCoeff();
    if (scale > 0.0 && asym > 1e-12 * scale)
        throw NotSymmetric("spd_factor: input asymmetry " + std::to_string(asym / scale) +
                           " relative exceeds 1e-12");

    const Matrix A = symmetrized(S);
    const int n = static_cast<int>(A.rows());

    // Balance by the diagonal so that the factored matrix has unit diagonal;
    // keeps log-det accurate when eigenvalues span many orders of magnitude.
    Vector d(n);
    for (int i = 0; i < n; ++i) {
        if (!(A(i, i) > 0.0))
            throw NotPositiveDefinite("spd_factor: nonpositive diagonal entry at " + std::to_string(i));
        d(i) = std::sqrt(A(i, i));
    }
    Matrix balanced = A.array().colwise() / d.array();
    balanced = balanced.array().rowwise() / d.transpose().array();

    Eigen::LLT<Matrix> llt(balanced);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("spd_factor: matrix is not positive definite");

    SpdFactor f;
    f.lower = d.asDiagonal() * Matrix(llt.matrixL());
    f.log_det = 0.0;
    for (int i = 0; i < n; ++i) {
        const double lii = f.lower(i, i);
        if (!(lii > 0.0))
            throw NotPositiveDefinite("spd_factor: factor diagonal not positive");
        f.log_det += 2.0 * std::log(lii);
    }
    return f;
}

Matrix spd_sqrt(const Matrix& S) {
    if (S.rows() != S.cols())
        throw Error(errc::validation, "spd_sqrt: matrix must be square");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(S));
    if (eig.info() != Eigen::Success)
        throw Error(errc::numeric, "spd_sqrt: eigendecomposition failed");
    const Vector& ev = eig.eigenvalues();
    if (ev.minCoeff() <= 0.0)
        throw NotPositiveDefinite("spd_sqrt: matrix is not positive definite (min eigenvalue " +
                                  std::to_string(ev.minCoeff()) + ")");
    Matrix R = eig.eigenvectors() * ev.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
    return symmetrized(R);
}

int rank_with_tolerance(const Matrix& M, double tol_rel) {
    if (M.size() == 0)
        return 0;
    Eigen::JacobiSVD<Matrix> svd(M);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0)
        return 0;
    const double cut = tol_rel * sv(0);
    int r = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > cut)
            ++r;
    return r;
}

} // namespace kfp::linalg
