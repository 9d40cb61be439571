#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "kfp/kernel.hpp"

namespace kfp {

/// Compactly supported datum sampled on a uniform grid over [lo, hi].
/// values are row-major with the last dimension fastest.
struct GridSampled {
    Vector lo;
    Vector hi;
    std::vector<int> shape;
    std::vector<double> values;

    int dim() const { return static_cast<int>(shape.size()); }
    std::size_t size() const;
    Vector point(std::size_t flat) const;
    double weight(std::size_t flat) const;  // trapezoid weight times cell volume
    void validate() const;
};

struct BoundedCallable {
    std::function<double(const Vector&)> f;
    double sup_bound = std::numeric_limits<double>::infinity();
};

/// Datum with int |f| exp(-alpha |x|^2) dx < infinity; solvable only up to a
/// finite horizon computed from alpha.
struct GaussianGrowth {
    std::function<double(const Vector&)> f;
    double alpha = 0.0;
};

using CauchyDatum = std::variant<GridSampled, BoundedCallable, GaussianGrowth>;

struct SolveConfig {
    int hermite_order = 40;      // >= 8
    double horizon_safety = 0.5; // fraction of the raw horizon that is usable
    unsigned threads = 0;        // 0 = hardware concurrency
};

struct Horizon {
    double raw = 0.0;     // largest T with lambda_min(C'(t0+s,t0))/4 > alpha on (0, T]
    double usable = 0.0;  // raw * horizon_safety
};

// Existence horizon for Gaussian-growth data, by bisection to relative 1e-6.
Horizon horizon(const OperatorSpec& spec, double alpha, double t0 = 0.0, double safety = 0.5);

// u(x, t) by the representation formula. Callable data go through the
// Gauss-Hermite substitution u = pi^{-N/2} int exp(-|z|^2)
// f(E(t0-t)(x - 2 C^{1/2} z)) dz; grid data through a direct weighted sum.
// Throws HorizonExceeded past the usable horizon, UnsupportedDimension for
// tensor Hermite beyond N = 3.
double solve_at(const OperatorSpec& spec, const CauchyDatum& f, double t0, const Vector& x,
                double t, const SolveConfig& cfg = {});

// Relative defect of Gamma(x,t;y,s) = int Gamma(x,t;z,tau) Gamma(z,tau;y,s) dz
// with the z-integral taken by Gauss-Hermite in the second factor's Gaussian.
double reproduction_residual(const OperatorSpec& spec, const Vector& x, double t, const Vector& y,
                             double s, double tau, const SolveConfig& cfg = {});

// Uniform is a sup over the evaluation grid, not over all of R^N; a finite
// grid cannot certify more.
enum class TraceMode { Lp, Uniform, Pointwise };

struct InitialTraceReport {
    TraceMode mode = TraceMode::Lp;
    double p = 1.0;
    std::vector<std::pair<double, double>> rows;  // (t, discrepancy)
    bool decreasing = false;
    double final_value = 0.0;
};

struct TraceRequest {
    TraceMode mode = TraceMode::Lp;
    double p = 1.0;
    Vector x0;                       // pointwise mode only
    std::vector<double> schedule;    // offsets above t0; default 10^-k, k=1..5
    // evaluation box for callable data (grid data use their own grid)
    Vector box_lo, box_hi;
    int box_points = 33;
};

// Discrepancy between u(., t) and f as t decreases to t0, in the requested
// mode, over the schedule. The report carries the data; nothing throws.
InitialTraceReport initial_trace_report(const OperatorSpec& spec, const CauchyDatum& f, double t0,
                                        const TraceRequest& request, const SolveConfig& cfg = {});

// Truncated-box estimate of int_t0^{t0+T} int |u| exp(-C_growth |x|^2) dx dt;
// a finiteness sanity certificate, not a proof.
double growth_class_certificate(const OperatorSpec& spec, const CauchyDatum& f, double t0,
                                double T, double c_growth, const SolveConfig& cfg = {});

} // namespace kfp
