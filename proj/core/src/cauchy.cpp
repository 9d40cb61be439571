#include "kfp/cauchy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kfp/parallel.hpp"
#include "kfp/quadrature.hpp"

namespace kfp {

std::size_t GridSampled::size() const {
    std::size_t n = 1;
    for (int s : shape)
        n *= static_cast<std::size_t>(s);
    return n;
}

Vector GridSampled::point(std::size_t flat) const {
    const int d = dim();
    Vector x(d);
    for (int i = d - 1; i >= 0; --i) {
        const auto n = static_cast<std::size_t>(shape[i]);
        const auto idx = flat % n;
        flat /= n;
        x(i) = lo(i) + (hi(i) - lo(i)) * static_cast<double>(idx) / (shape[i] - 1);
    }
    return x;
}

double GridSampled::weight(std::size_t flat) const {
    const int d = dim();
    double w = 1.0;
    for (int i = d - 1; i >= 0; --i) {
        const auto n = static_cast<std::size_t>(shape[i]);
        const auto idx = flat % n;
        flat /= n;
        const double h = (hi(i) - lo(i)) / (shape[i] - 1);
        w *= (idx == 0 || idx == n - 1) ? 0.5 * h : h;
    }
    return w;
}

void GridSampled::validate() const {
    const int d = dim();
    if (d < 1 || lo.size() != d || hi.size() != d)
        throw Error(errc::validation, "grid datum: box and shape dimensions disagree");
    for (int i = 0; i < d; ++i) {
        if (shape[i] < 2)
            throw Error(errc::validation, "grid datum: need at least 2 points per dimension");
        if (!(hi(i) > lo(i)))
            throw Error(errc::validation, "grid datum: box must have positive extent");
    }
    if (values.size() != size())
        throw Error(errc::validation, "grid datum: expected " + std::to_string(size()) +
                                          " values, got " + std::to_string(values.size()));
    for (double v : values)
        if (!std::isfinite(v))
            throw Error(errc::validation, "grid datum: non-finite sample");
}

Horizon horizon(const OperatorSpec& spec, double alpha, double t0, double safety) {
    if (!(alpha > 0.0))
        throw Error(errc::validation, "horizon requires alpha > 0");
    constexpr double cap = 1e3;

    auto margin = [&](double span) {
        const BundlePtr bundle = covariance(spec, t0, t0 + span);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(bundle->C_prime);
        return 0.25 * eig.eigenvalues().minCoeff() - alpha;
    };

    // C' blows up as the span shrinks, so the condition holds near 0.
    double lo = 1e-6;
    while (margin(lo) <= 0.0) {
        lo /= 4.0;
        if (lo < 1e-12)
            throw NoPositiveHorizon("no positive horizon found for alpha = " + std::to_string(alpha));
    }
    double hi = lo;
    bool bracketed = false;
    while (hi < cap) {
        hi = std::min(cap, 2.0 * hi);
        if (margin(hi) <= 0.0) {
            bracketed = true;
            break;
        }
        lo = hi;
    }

    Horizon result;
    if (!bracketed) {
        result.raw = cap;
    } else {
        while (hi - lo > 1e-6 * hi)
            (margin(0.5 * (lo + hi)) > 0.0 ? lo : hi) = 0.5 * (lo + hi);
        result.raw = lo;
    }
    result.usable = safety * result.raw;
    return result;
}

namespace {

double solve_callable(const OperatorSpec& spec, const std::function<double(const Vector&)>& f,
                      double t0, const Vector& x, double t, const SolveConfig& cfg) {
    if (spec.N > 3)
        throw UnsupportedDimension("tensor Gauss-Hermite solve supports N <= 3, got N = " +
                                   std::to_string(spec.N));
    const BundlePtr bundle = covariance(spec, t0, t);
    const Matrix root = linalg::spd_sqrt(bundle->C);
    const Matrix E_back = linalg::mat_exp(spec.B, t - t0);  // E(t0 - t)
    const double sum = quad::hermite_integrate(spec.N, cfg.hermite_order, [&](const Vector& z) {
        return f(E_back * (x - 2.0 * root * z));
    });
    return sum / std::pow(M_PI, 0.5 * spec.N);
}

} // namespace

double solve_at(const OperatorSpec& spec, const CauchyDatum& f, double t0, const Vector& x,
                double t, const SolveConfig& cfg) {
    if (cfg.hermite_order < 8)
        throw Error(errc::validation, "hermite_order must be at least 8");
    if (x.size() != spec.N)
        throw Error(errc::validation, "solve_at: point must have dimension " +
                                          std::to_string(spec.N));
    if (!(t > t0))
        throw NotAfterInitialTime("solve_at requires t > t0");

    return std::visit(
        [&](const auto& datum) -> double {
            using T = std::decay_t<decltype(datum)>;
            if constexpr (std::is_same_v<T, GridSampled>) {
                datum.validate();
                double u = 0.0;
                const std::size_t n = datum.size();
                for (std::size_t j = 0; j < n; ++j) {
                    const double fj = datum.values[j];
                    if (fj == 0.0)
                        continue;
                    u += datum.weight(j) * gamma(spec, x, t, datum.point(j), t0).value * fj;
                }
                return u;
            } else if constexpr (std::is_same_v<T, BoundedCallable>) {
                return solve_callable(spec, datum.f, t0, x, t, cfg);
            } else {
                const Horizon h = horizon(spec, datum.alpha, t0, cfg.horizon_safety);
                if (!(t - t0 < h.usable))
                    throw HorizonExceeded(h.usable,
                                          "t - t0 = " + std::to_string(t - t0) +
                                              " exceeds the usable horizon " + std::to_string(h.usable) +
                                              " for alpha = " + std::to_string(datum.alpha));
                return solve_callable(spec, datum.f, t0, x, t, cfg);
            }
        },
        f);
}

double reproduction_residual(const OperatorSpec& spec, const Vector& x, double t, const Vector& y,
                             double s, double tau, const SolveConfig& cfg) {
    if (!(s < tau && tau < t))
        throw Error(errc::validation, "reproduction_residual requires s < tau < t");
    if (spec.N > 3)
        throw UnsupportedDimension("reproduction residual supports N <= 3");

    const double lhs = gamma(spec, x, t, y, s).value;
    const BundlePtr inner = covariance(spec, s, tau);
    const Matrix root = linalg::spd_sqrt(inner->C);
    const Vector center = inner->E_fwd * y;

    // Substituting z = E(tau-s) y + 2 C(tau,s)^{1/2} w absorbs the second
    // factor into the Gauss-Hermite weight.
    const double sum = quad::hermite_integrate(spec.N, cfg.hermite_order, [&](const Vector& w) {
        return gamma(spec, x, t, center + 2.0 * root * w, tau).value;
    });
    const double rhs =
        sum * std::exp(-(tau - s) * spec.trace_B) / std::pow(M_PI, 0.5 * spec.N);
    return std::abs(lhs - rhs) / lhs;
}

namespace {

double datum_value(const CauchyDatum& f, std::size_t grid_index, const Vector& x) {
    return std::visit(
        [&](const auto& datum) -> double {
            using T = std::decay_t<decltype(datum)>;
            if constexpr (std::is_same_v<T, GridSampled>)
                return datum.values[grid_index];
            else
                return datum.f(x);
        },
        f);
}

} // namespace

InitialTraceReport initial_trace_report(const OperatorSpec& spec, const CauchyDatum& f, double t0,
                                        const TraceRequest& request, const SolveConfig& cfg) {
    InitialTraceReport report;
    report.mode = request.mode;
    report.p = request.p;

    std::vector<double> offsets = request.schedule;
    if (offsets.empty())
        for (int k = 1; k <= 5; ++k)
            offsets.push_back(std::pow(10.0, -k));
    std::sort(offsets.rbegin(), offsets.rend());

    // Pointwise mode needs only the single probe point.
    if (request.mode == TraceMode::Pointwise) {
        if (std::holds_alternative<GridSampled>(f))
            throw Error(errc::validation, "pointwise trace mode requires a callable datum");
        const double target = datum_value(f, 0, request.x0);
        for (double off : offsets) {
            const double u = solve_at(spec, f, t0, request.x0, t0 + off, cfg);
            report.rows.emplace_back(t0 + off, std::abs(u - target));
        }
    } else {
        // Grid data compare on their own grid; callables on the request box.
        GridSampled grid;
        if (const auto* g = std::get_if<GridSampled>(&f)) {
            grid = *g;
        } else {
            grid.lo = request.box_lo;
            grid.hi = request.box_hi;
            if (grid.lo.size() == 0) {
                grid.lo = Vector::Constant(spec.N, -4.0);
                grid.hi = Vector::Constant(spec.N, 4.0);
            }
            grid.shape.assign(spec.N, request.box_points);
            grid.values.resize(grid.size());
            for (std::size_t j = 0; j < grid.values.size(); ++j)
                grid.values[j] = datum_value(f, j, grid.point(j));
        }

        const std::size_t n = grid.size();
        std::vector<double> u(n);
        for (double off : offsets) {
            const double t = t0 + off;
            parallel_for(n, cfg.threads,
                         [&](std::size_t j) { u[j] = solve_at(spec, f, t0, grid.point(j), t, cfg); });
            double disc = 0.0;
            if (request.mode == TraceMode::Uniform) {
                for (std::size_t j = 0; j < n; ++j)
                    disc = std::max(disc, std::abs(u[j] - grid.values[j]));
            } else {
                for (std::size_t j = 0; j < n; ++j)
                    disc += grid.weight(j) * std::pow(std::abs(u[j] - grid.values[j]), request.p);
                disc = std::pow(disc, 1.0 / request.p);
            }
            report.rows.emplace_back(t, disc);
        }
    }

    report.decreasing = true;
    for (std::size_t i = 1; i < report.rows.size(); ++i)
        if (report.rows[i].second > 1.05 * report.rows[i - 1].second && report.rows[i].second > 1e-14)
            report.decreasing = false;
    report.final_value = report.rows.empty() ? 0.0 : report.rows.back().second;
    return report;
}

double growth_class_certificate(const OperatorSpec& spec, const CauchyDatum& f, double t0,
                                double T, double c_growth, const SolveConfig& cfg) {
    if (!(T > 0.0) || !(c_growth > 0.0))
        throw Error(errc::validation, "certificate requires T > 0 and C > 0");
    if (const auto* g = std::get_if<GaussianGrowth>(&f)) {
        const Horizon h = horizon(spec, g->alpha, t0, cfg.horizon_safety);
        if (!(T <= h.usable))
            throw HorizonExceeded(h.usable, "certificate window T = " + std::to_string(T) +
                                                " exceeds the usable horizon " +
                                                std::to_string(h.usable));
    }

    // Box half-width where the Gaussian weight tail drops below 1e-12.
    const double R = std::sqrt(std::log(1e12) / c_growth);
    const int pts = spec.N == 1 ? 201 : (spec.N == 2 ? 61 : 21);

    GridSampled box;
    box.lo = Vector::Constant(spec.N, -R);
    box.hi = Vector::Constant(spec.N, R);
    box.shape.assign(spec.N, pts);
    box.values.assign(box.size(), 0.0);

    const auto& tq = quad::gauss_legendre(8);
    const std::size_t n = box.size();
    double total = 0.0;
    for (int k = 0; k < tq.nodes.size(); ++k) {
        const double t = t0 + 0.5 * T * (1.0 + tq.nodes(k));
        const double wt = 0.5 * T * tq.weights(k);
        std::vector<double> slice(n);
        parallel_for(n, cfg.threads, [&](std::size_t j) {
            const Vector x = box.point(j);
            slice[j] = std::abs(solve_at(spec, f, t0, x, t, cfg)) *
                       std::exp(-c_growth * x.squaredNorm());
        });
        double space = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            space += box.weight(j) * slice[j];
        total += wt * space;
    }
    if (!std::isfinite(total))
        throw Error(errc::numeric, "growth-class certificate did not evaluate to a finite value");
    return total;
}

} // namespace kfp
