#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

#include "kfp/linalg.hpp"
#include "kfp/operator_spec.hpp"

namespace kfp {

/// Covariance matrix C(t, t0) of one (t0, t) pair together with everything
/// the kernel evaluation needs: Cholesky factor, inverse, the propagator
/// E(t - t0) and the conjugated inverse C' = E^T C^{-1} E.
struct CovarianceBundle {
    double t0 = 0.0;
    double t = 0.0;
    Matrix C;
    linalg::SpdFactor factor;
    Matrix C_inv;
    Matrix E_fwd;
    Matrix C_prime;

    double log_det() const { return factor.log_det; }
};

using BundlePtr = std::shared_ptr<const CovarianceBundle>;

/// Memoizes bundles per (t0, t), keyed bitwise. Concurrent reads are cheap;
/// insertion is internally synchronized. Bundles are immutable once published.
class CovarianceCache {
public:
    BundlePtr find(double t0, double t) const;
    BundlePtr insert(double t0, double t, BundlePtr bundle);
    BundlePtr find_model(double dt) const;
    BundlePtr insert_model(double dt, BundlePtr bundle);

private:
    mutable std::mutex mtx_;
    std::map<std::pair<double, double>, BundlePtr> bundles_;
    std::map<double, BundlePtr> model_bundles_;
};

// Propagator E(s) = exp(-s B).
Matrix propagator(const OperatorSpec& spec, double s);

// C(t, t0) = integral over (t0, t) of E(t - s) A(s) E(t - s)^T ds, split at
// coefficient jumps, Gauss-Legendre 16 per subinterval with adaptive
// bisection until the entrywise relative change drops below 1e-12.
// Throws NotAfterInitialTime for t <= t0, CovarianceFailure when the result
// is not positive definite (rank-condition violation).
BundlePtr covariance(const OperatorSpec& spec, double t0, double t);

// Model covariance with constant coefficients alpha * I_q over a span dt:
// C_alpha(dt) = alpha * C_0(dt). The alpha = 1 bundle is cached per spec.
BundlePtr model_covariance(const OperatorSpec& spec, double dt, double alpha = 1.0);

/// Sampled check of the matrix-ordering facts: if xi'C1 xi <= xi'C2 xi then
/// xi'C2^{-1} xi <= xi'C1^{-1} xi and det C1 <= det C2.
struct OrderingReport {
    int samples = 0;
    int premise_violations = 0;  // xi with xi'C1 xi > xi'C2 xi
    int inverse_violations = 0;  // xi with xi'C2^{-1} xi > xi'C1^{-1} xi
    double worst_premise_margin = 0.0;  // min over xi of (q2 - q1) / max(q2, tiny)
    double worst_inverse_margin = 0.0;  // min over xi of (q1inv - q2inv) / max(q1inv, tiny)
    double det_margin = 0.0;            // log det C2 - log det C1, should be >= 0
    bool det_ok = false;
    bool conclusion_holds() const { return inverse_violations == 0 && det_ok; }
};

OrderingReport ordering_check(const Matrix& C1, const Matrix& C2, int samples = 1000,
                              std::uint64_t seed = 42);

// |d/dt log det C(t,t0) / 2 - (Tr(A(t) C^{-1})/2 - Tr B)| with the
// t-derivative taken by central difference, step h = 1e-6 * max(1, |t|).
// Throws BreakpointTooClose when t is within 10h of a coefficient jump.
double trace_identity_residual(const OperatorSpec& spec, double t0, double t);

// Same in the pole time: |d/ds log det C(t,s) / 2 + Tr(A(s) C'(t,s)) / 2|.
double adjoint_trace_identity_residual(const OperatorSpec& spec, double s, double t);

} // namespace kfp
