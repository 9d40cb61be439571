#include "kfp/covariance.hpp"

#include <cmath>
#include <random>
#include <string>

#include "kfp/quadrature.hpp"

namespace kfp {

BundlePtr CovarianceCache::find(double t0, double t) const {
    std::lock_guard<std::mutex> lock(mtx_);
    auto it = bundles_.find({t0, t});
    return it == bundles_.end() ? nullptr : it->second;
}

BundlePtr CovarianceCache::insert(double t0, double t, BundlePtr bundle) {
    std::lock_guard<std::mutex> lock(mtx_);
    auto [it, fresh] = bundles_.emplace(std::make_pair(t0, t), std::move(bundle));
    (void)fresh;  // first writer wins; concurrent duplicates are identical
    return it->second;
}

BundlePtr CovarianceCache::find_model(double dt) const {
    std::lock_guard<std::mutex> lock(mtx_);
    auto it = model_bundles_.find(dt);
    return it == model_bundles_.end() ? nullptr : it->second;
}

BundlePtr CovarianceCache::insert_model(double dt, BundlePtr bundle) {
    std::lock_guard<std::mutex> lock(mtx_);
    auto [it, fresh] = model_bundles_.emplace(dt, std::move(bundle));
    (void)fresh;
    return it->second;
}

namespace {

// Gauss-Legendre 16 of E(t - s) A E(t - s)^T over [a, b] (A constant there).
Matrix gl_segment(const Matrix& B, const Matrix& A, double t, double a, double b) {
    const auto& rule = quad::gauss_legendre(16);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    Matrix sum = Matrix::Zero(B.rows(), B.cols());
    for (int k = 0; k < rule.nodes.size(); ++k) {
        const double s = mid + half * rule.nodes(k);
        const Matrix E = linalg::mat_exp(B, -(t - s));
        sum.noalias() += (half * rule.weights(k)) * (E * A * E.transpose());
    }
    return sum;
}

Matrix integrate_segment(const Matrix& B, const Matrix& A, double t, double a, double b,
                         const Matrix& whole, int depth) {
    const double mid = 0.5 * (a + b);
    const Matrix left = gl_segment(B, A, t, a, mid);
    const Matrix right = gl_segment(B, A, t, mid, b);
    const Matrix refined = left + right;
    const double scale = std::max(refined.cwiseAbs().maxCoeff(), 1e-300);
    const double change = (refined - whole).cwiseAbs().maxCoeff();
    if (change <= 1e-12 * scale || depth >= 24)
        return refined;
    return integrate_segment(B, A, t, a, mid, left, depth + 1) +
           integrate_segment(B, A, t, mid, b, right, depth + 1);
}

Matrix covariance_integral(const OperatorSpec& spec, const Matrix& B, double t0, double t,
                           bool model_coefficients) {
    std::vector<double> cuts{t0};
    if (!model_coefficients)
        for (double jump : spec.track.jumps_in(t0, t))
            cuts.push_back(jump);
    cuts.push_back(t);

    Matrix identity_block = Matrix::Zero(spec.N, spec.N);
    identity_block.topLeftCorner(spec.q, spec.q).setIdentity();

    Matrix C = Matrix::Zero(spec.N, spec.N);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = cuts[i], b = cuts[i + 1];
        const Matrix A = model_coefficients ? identity_block : spec.A_at(0.5 * (a + b));
        const Matrix whole = gl_segment(B, A, t, a, b);
        C += integrate_segment(B, A, t, a, b, whole, 0);
    }
    return linalg::symmetrized(C);
}

BundlePtr finish_bundle(const OperatorSpec& spec, double t0, double t, Matrix C) {
    auto bundle = std::make_shared<CovarianceBundle>();
    bundle->t0 = t0;
    bundle->t = t;
    bundle->C = std::move(C);
    try {
        bundle->factor = linalg::spd_factor(bundle->C);
    } catch (const NotPositiveDefinite& e) {
        std::string msg = "covariance C(t,t0) is not positive definite for t0=" +
                          std::to_string(t0) + ", t=" + std::to_string(t) + ": " + e.what();
        if (!kalman_hypoelliptic(spec.B, spec.q))
            msg += " (the Kalman rank condition fails for this drift)";
        throw CovarianceFailure(msg);
    }
    bundle->C_inv = bundle->factor.inverse();
    bundle->E_fwd = linalg::mat_exp(spec.B, -(t - t0));
    bundle->C_prime =
        linalg::symmetrized(bundle->E_fwd.transpose() * bundle->C_inv * bundle->E_fwd);
    return bundle;
}

} // namespace

Matrix propagator(const OperatorSpec& spec, double s) { return linalg::mat_exp(spec.B, -s); }

BundlePtr covariance(const OperatorSpec& spec, double t0, double t) {
    if (!(t > t0))
        throw NotAfterInitialTime("covariance requires t > t0 (got t0=" + std::to_string(t0) +
                                  ", t=" + std::to_string(t) + ")");
    if (spec.cache)
        if (BundlePtr hit = spec.cache->find(t0, t))
            return hit;

    BundlePtr bundle = finish_bundle(spec, t0, t, covariance_integral(spec, spec.B, t0, t, false));
    return spec.cache ? spec.cache->insert(t0, t, std::move(bundle)) : bundle;
}

BundlePtr model_covariance(const OperatorSpec& spec, double dt, double alpha) {
    if (!(dt > 0.0))
        throw NotAfterInitialTime("model covariance requires a positive span");
    if (!(alpha > 0.0))
        throw Error(errc::validation, "model covariance requires alpha > 0");

    BundlePtr base;
    if (spec.cache)
        base = spec.cache->find_model(dt);
    if (!base) {
        base = finish_bundle(spec, 0.0, dt, covariance_integral(spec, spec.B, 0.0, dt, true));
        if (spec.cache)
            base = spec.cache->insert_model(dt, std::move(base));
    }
    if (alpha == 1.0)
        return base;

    // C_alpha(dt) = alpha * C_0(dt); rescale the base bundle.
    auto scaled = std::make_shared<CovarianceBundle>(*base);
    scaled->C *= alpha;
    scaled->factor.lower *= std::sqrt(alpha);
    scaled->factor.log_det += spec.N * std::log(alpha);
    scaled->C_inv /= alpha;
    scaled->C_prime /= alpha;
    return scaled;
}

OrderingReport ordering_check(const Matrix& C1, const Matrix& C2, int samples,
                              std::uint64_t seed) {
    const auto f1 = linalg::spd_factor(C1);
    const auto f2 = linalg::spd_factor(C2);
    const int n = static_cast<int>(C1.rows());

    OrderingReport report;
    report.samples = samples;
    report.det_margin = f2.log_det - f1.log_det;
    report.det_ok = report.det_margin >= -1e-12 * std::max(1.0, std::abs(f1.log_det));
    report.worst_premise_margin = std::numeric_limits<double>::infinity();
    report.worst_inverse_margin = std::numeric_limits<double>::infinity();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < samples; ++i) {
        Vector xi(n);
        for (int k = 0; k < n; ++k)
            xi(k) = gauss(rng);
        const double q1 = xi.dot(C1 * xi);
        const double q2 = xi.dot(C2 * xi);
        const double q1inv = xi.dot(f1.solve(xi));
        const double q2inv = xi.dot(f2.solve(xi));

        const double premise = (q2 - q1) / std::max(q2, 1e-300);
        const double inverse = (q1inv - q2inv) / std::max(q1inv, 1e-300);
        report.worst_premise_margin = std::min(report.worst_premise_margin, premise);
        report.worst_inverse_margin = std::min(report.worst_inverse_margin, inverse);
        if (premise < -1e-12)
            ++report.premise_violations;
        if (inverse < -1e-12)
            ++report.inverse_violations;
    }
    return report;
}

namespace {

double difference_step(double t) { return 1e-6 * std::max(1.0, std::abs(t)); }

void require_clear_of_jumps(const OperatorSpec& spec, double t, double h, const char* who) {
    const double dist = spec.track.distance_to_jump(t);
    if (dist < 10.0 * h)
        throw BreakpointTooClose(std::string(who) + ": t=" + std::to_string(t) +
                                 " is within 10h of a coefficient jump (h=" + std::to_string(h) + ")");
}

} // namespace

double trace_identity_residual(const OperatorSpec& spec, double t0, double t) {
    const double h = difference_step(t);
    require_clear_of_jumps(spec, t, h, "trace_identity_residual");
    if (!(t - h > t0))
        throw NotAfterInitialTime("trace_identity_residual: t - h must stay above t0");

    const double ld_plus = covariance(spec, t0, t + h)->log_det();
    const double ld_minus = covariance(spec, t0, t - h)->log_det();
    const double lhs = (ld_plus - ld_minus) / (4.0 * h);

    const BundlePtr bundle = covariance(spec, t0, t);
    const Matrix& A0 = spec.track.at(t);
    const double tr = (A0 * bundle->C_inv.topLeftCorner(spec.q, spec.q)).trace();
    const double rhs = 0.5 * tr - spec.trace_B;
    return std::abs(lhs - rhs);
}

double adjoint_trace_identity_residual(const OperatorSpec& spec, double s, double t) {
    const double h = difference_step(s);
    require_clear_of_jumps(spec, s, h, "adjoint_trace_identity_residual");
    if (!(s + h < t))
        throw NotAfterInitialTime("adjoint_trace_identity_residual: s + h must stay below t");

    const double ld_plus = covariance(spec, s + h, t)->log_det();
    const double ld_minus = covariance(spec, s - h, t)->log_det();
    const double lhs = (ld_plus - ld_minus) / (4.0 * h);

    const BundlePtr bundle = covariance(spec, s, t);
    const Matrix& A0 = spec.track.at(s);
    const double tr = (A0 * bundle->C_prime.topLeftCorner(spec.q, spec.q)).trace();
    const double rhs = -0.5 * tr;
    return std::abs(lhs - rhs);
}

} // namespace kfp
