#include "kfp/kernel.hpp"

#include <cmath>
#include <string>

namespace kfp {

namespace {

constexpr double LOG_4PI = 2.5310242469692907;  // log(4*pi)

KernelEval from_log(double log_value) {
    KernelEval eval;
    eval.log_value = log_value;
    eval.value = std::exp(log_value);
    return eval;
}

void require_dimension(const OperatorSpec& spec, const Vector& x, const Vector& x0,
                       const char* who) {
    if (x.size() != spec.N || x0.size() != spec.N)
        throw Error(errc::validation, std::string(who) + ": points must have dimension " +
                                          std::to_string(spec.N));
}

} // namespace

KernelEval gamma(const OperatorSpec& spec, const Vector& x, double t, const Vector& x0,
                 double t0) {
    require_dimension(spec, x, x0, "gamma");
    if (!(t > t0))
        return {};
    const BundlePtr bundle = covariance(spec, t0, t);
    const Vector u = x - bundle->E_fwd * x0;
    const double quad_form = u.dot(bundle->factor.solve(u));
    const double log_value = -0.5 * spec.N * LOG_4PI - 0.5 * bundle->log_det() -
                             0.25 * quad_form - (t - t0) * spec.trace_B;
    return from_log(log_value);
}

KernelEval gamma_model(const OperatorSpec& spec, double alpha, const Vector& x, double t,
                       const Vector& x0, double t0) {
    require_dimension(spec, x, x0, "gamma_model");
    if (!(alpha > 0.0))
        throw Error(errc::validation, "gamma_model requires alpha > 0");
    if (!(t > t0))
        return {};
    const BundlePtr base = model_covariance(spec, t - t0, 1.0);
    const Vector u = x - base->E_fwd * x0;
    const double quad_form = u.dot(base->factor.solve(u));
    const double log_value = -0.5 * spec.N * (LOG_4PI + std::log(alpha)) -
                             0.5 * base->log_det() - 0.25 * quad_form / alpha -
                             (t - t0) * spec.trace_B;
    return from_log(log_value);
}

DerivBundle derivatives(const OperatorSpec& spec, const Vector& x, double t, const Vector& y,
                        double s) {
    require_dimension(spec, x, y, "derivatives");
    if (!(t > s))
        throw NotAfterInitialTime("derivatives require t > s");
    const BundlePtr bundle = covariance(spec, s, t);

    DerivBundle d;
    d.at = gamma(spec, x, t, y, s);
    const double g = d.at.value;

    // x-side: factor (x - E(t-s) y), coefficients from C^{-1}
    const Vector u = x - bundle->E_fwd * y;
    const Vector cu = bundle->C_inv * u;
    d.grad_x = -0.5 * g * cu;
    d.hess_x = g * (0.25 * cu * cu.transpose() - 0.5 * bundle->C_inv);

    // y-side: factor (y - E(s-t) x) = -E(t-s)^{-1} (x - E(t-s) y),
    // coefficients from C' = E^T C^{-1} E
    const Vector w = -bundle->E_fwd.partialPivLu().solve(u);
    const Vector cw = bundle->C_prime * w;
    d.grad_y = -0.5 * g * cw;
    d.hess_y = g * (0.25 * cw * cw.transpose() - 0.5 * bundle->C_prime);

    // time derivative from the equation, at the coefficient value at t
    const Matrix& A0 = spec.track.at(t);
    double dt = 0.0;
    for (int i = 0; i < spec.q; ++i)
        for (int j = 0; j < spec.q; ++j)
            dt += A0(i, j) * d.hess_x(i, j);
    dt += d.grad_x.dot(spec.B * x);
    d.dt = dt;
    return d;
}

ComparisonBounds comparison_bounds(const OperatorSpec& spec, const Vector& x, double t,
                                   const Vector& x0, double t0) {
    const double nu = spec.nu;
    const KernelEval lower_kernel = gamma_model(spec, nu, x, t, x0, t0);
    const KernelEval upper_kernel = gamma_model(spec, 1.0 / nu, x, t, x0, t0);
    ComparisonBounds bounds;
    bounds.log_lower = spec.N * std::log(nu) + lower_kernel.log_value;
    bounds.log_upper = -spec.N * std::log(nu) + upper_kernel.log_value;
    bounds.lower = std::exp(bounds.log_lower);
    bounds.upper = std::exp(bounds.log_upper);
    return bounds;
}

double short_time_upper_log(const OperatorSpec& spec, const Vector& x, double t, const Vector& x0,
                            double t0, const ShortTimeConstants& fitted) {
    const double dt = t - t0;
    if (!(dt > 0.0))
        throw NotAfterInitialTime("short_time_upper_log requires t > t0");
    if (dt > fitted.delta)
        throw HorizonExceeded(fitted.delta, "short-time bound only holds for t - t0 <= delta = " +
                                                std::to_string(fitted.delta));
    const Vector u = x - propagator(spec, dt) * x0;
    return -std::log(fitted.c) - 0.5 * spec.structure.Q * std::log(dt) -
           fitted.c * u.squaredNorm() / dt;
}

} // namespace kfp
