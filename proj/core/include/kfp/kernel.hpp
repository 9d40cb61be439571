#pragma once

#include "kfp/covariance.hpp"
#include "kfp/operator_spec.hpp"

namespace kfp {

/// Kernel value at one point; zero (log = -inf) whenever t <= t0.
struct KernelEval {
    double value = 0.0;
    double log_value = -std::numeric_limits<double>::infinity();
    bool positive() const { return value > 0.0 || std::isfinite(log_value); }
};

/// Closed-form first and second derivatives in both space variables, plus the
/// time derivative obtained from the equation itself (valid a.e. in t).
struct DerivBundle {
    KernelEval at;
    Vector grad_x;
    Matrix hess_x;
    Vector grad_y;
    Matrix hess_y;
    double dt = 0.0;
};

struct ComparisonBounds {
    double lower = 0.0;
    double upper = 0.0;
    double log_lower = -std::numeric_limits<double>::infinity();
    double log_upper = -std::numeric_limits<double>::infinity();
};

/// Empirically fitted constants of the short-time envelope.
struct ShortTimeConstants {
    double c = 0.0;
    double delta = 0.0;
};

// Fundamental solution with pole (x0, t0), evaluated in the log domain and
// exponentiated last. Returns 0 for t <= t0.
KernelEval gamma(const OperatorSpec& spec, const Vector& x, double t, const Vector& x0, double t0);

// Model kernel with constant coefficients alpha * I_q; shares the drift of
// the spec. Satisfies the translation rule
// Gamma_alpha(x,t;x0,t0) = Gamma_alpha(x - E(t-t0) x0, t-t0; 0, 0).
KernelEval gamma_model(const OperatorSpec& spec, double alpha, const Vector& x, double t,
                       const Vector& x0, double t0);

// Closed-form gradient/Hessian bundles in x and y, with the time derivative
// from the equation rearrangement at the coefficient value at t.
DerivBundle derivatives(const OperatorSpec& spec, const Vector& x, double t, const Vector& y,
                        double s);

// Two-sided model-kernel bounds: (nu^N Gamma_nu, nu^{-N} Gamma_{1/nu}).
ComparisonBounds comparison_bounds(const OperatorSpec& spec, const Vector& x, double t,
                                   const Vector& x0, double t0);

// log of the fitted short-time envelope (1/(c dt^{Q/2})) exp(-c |x-Ex0|^2/dt).
// Throws HorizonExceeded when t - t0 > fitted.delta.
double short_time_upper_log(const OperatorSpec& spec, const Vector& x, double t, const Vector& x0,
                            double t0, const ShortTimeConstants& fitted);

} // namespace kfp
