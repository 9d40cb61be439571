#include "kfp/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "kfp/parallel.hpp"
#include "kfp/quadrature.hpp"

namespace kfp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Counter-based stream: sample i gets its own generator, so reports do not
// depend on thread count or evaluation order.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ (index + 1)));
}

std::string point_string(const Vector& x, double t) {
    std::ostringstream os;
    os << "x=(";
    for (int i = 0; i < x.size(); ++i)
        os << (i ? "," : "") << x(i);
    os << ") t=" << t;
    return os.str();
}

double fd_step(double t) { return 1e-6 * std::max(1.0, std::abs(t)); }

// Draws a span in [min_gap, span] whose endpoint keeps clear of coefficient
// jumps by ten difference steps.
double draw_clear_span(const OperatorSpec& spec, std::mt19937_64& rng, double base,
                       double min_gap, double span, bool base_plus_span) {
    std::uniform_real_distribution<double> uni(min_gap, span);
    for (int attempt = 0; attempt < 256; ++attempt) {
        const double tau = uni(rng);
        const double at = base_plus_span ? base + tau : base - tau;
        if (spec.track.distance_to_jump(at) >= 10.0 * fd_step(at))
            return tau;
    }
    throw BreakpointTooClose("could not place a sample time away from coefficient jumps");
}

// Trapezoid quadrature of fn over a box aligned with the principal axes of
// the Gaussian shape matrix Sigma, centered at `center`. Step sigma/2 and
// extent 8 sigma per axis keep the error far below 1e-10.
double principal_axis_integral(const Vector& center, const Matrix& Sigma,
                               const std::function<double(const Vector&)>& fn) {
    const int n = static_cast<int>(center.size());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Sigma);
    const Vector scale = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Matrix axes = eig.eigenvectors();

    const int per_axis = 33;  // +-8 sigma, step sigma/2
    std::size_t total = 1;
    for (int i = 0; i < n; ++i)
        total *= per_axis;

    double sum = 0.0;
    Vector u(n);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rest = flat;
        double w = 1.0;
        for (int i = n - 1; i >= 0; --i) {
            const std::size_t idx = rest % per_axis;
            rest /= per_axis;
            const double h = scale(i) / 2.0;
            u(i) = -8.0 * scale(i) + h * static_cast<double>(idx);
            w *= (idx == 0 || idx == per_axis - 1) ? 0.5 * h : h;
        }
        sum += w * fn(center + axes * u);
    }
    return sum;
}

} // namespace

VerificationReport pde_residual(const OperatorSpec& spec, const Vector& x0, double t0,
                                const VerifyConfig& cfg) {
    VerificationReport report;
    report.suite = "pde";
    report.seed = cfg.seed;
    report.config = "samples=" + std::to_string(cfg.samples);

    CheckRecord rec;
    rec.id = "pde_residual";
    rec.samples = cfg.samples;
    rec.tol = 1e-4;

    std::vector<double> residuals(cfg.samples);
    std::vector<std::string> where(cfg.samples);
    parallel_for(cfg.samples, cfg.threads, [&](std::size_t i) {
        auto rng = stream_rng(cfg.seed, i);
        const double tau = draw_clear_span(spec, rng, t0, cfg.min_gap, cfg.span, true);
        const double t = t0 + tau;
        const BundlePtr bundle = covariance(spec, t0, t);
        const Matrix root = linalg::spd_sqrt(bundle->C);
        std::uniform_real_distribution<double> spread(-2.5, 2.5);
        Vector xi(spec.N);
        for (int k = 0; k < spec.N; ++k)
            xi(k) = spread(rng);
        const Vector x = bundle->E_fwd * x0 + 2.0 * root * xi;

        const DerivBundle d = derivatives(spec, x, t, x0, t0);
        const Matrix& A0 = spec.track.at(t);
        double diffusion = 0.0;
        for (int a = 0; a < spec.q; ++a)
            for (int b = 0; b < spec.q; ++b)
                diffusion += A0(a, b) * d.hess_x(a, b);
        const double drift = d.grad_x.dot(spec.B * x);

        const double h = fd_step(t);
        const double dt_fd = (gamma(spec, x, t + h, x0, t0).value -
                              gamma(spec, x, t - h, x0, t0).value) /
                             (2.0 * h);
        const double raw = std::abs(diffusion + drift - dt_fd);
        const double denom =
            std::abs(diffusion) + std::abs(drift) + std::abs(dt_fd) + d.at.value + 1e-300;
        residuals[i] = raw / denom;
        where[i] = point_string(x, t);
    });

    for (int i = 0; i < cfg.samples; ++i) {
        if (residuals[i] >= rec.worst) {
            rec.worst = residuals[i];
            rec.worst_at = where[i];
        }
    }
    rec.pass = rec.worst <= rec.tol;
    report.add(std::move(rec));
    return report;
}

VerificationReport adjoint_residual(const OperatorSpec& spec, const Vector& x, double t,
                                    const VerifyConfig& cfg) {
    VerificationReport report;
    report.suite = "adjoint";
    report.seed = cfg.seed;
    report.config = "samples=" + std::to_string(cfg.samples);

    CheckRecord rec;
    rec.id = "adjoint_residual";
    rec.samples = cfg.samples;
    rec.tol = 1e-4;

    std::vector<double> residuals(cfg.samples);
    std::vector<std::string> where(cfg.samples);
    parallel_for(cfg.samples, cfg.threads, [&](std::size_t i) {
        auto rng = stream_rng(cfg.seed, i + 0x517cc1b727220a95ull);
        const double tau = draw_clear_span(spec, rng, t, cfg.min_gap, cfg.span, false);
        const double s = t - tau;
        const BundlePtr bundle = covariance(spec, s, t);

        // Gaussian in y has shape 2 C'^{-1} = 2 E^{-1} C E^{-T}
        const Matrix Einv = bundle->E_fwd.inverse();
        const Matrix shape = linalg::symmetrized(Einv * bundle->C * Einv.transpose());
        const Matrix root = linalg::spd_sqrt(shape);
        const Vector center = Einv * x;
        std::uniform_real_distribution<double> spread(-2.5, 2.5);
        Vector xi(spec.N);
        for (int k = 0; k < spec.N; ++k)
            xi(k) = spread(rng);
        const Vector y = center + 2.0 * root * xi;

        const DerivBundle d = derivatives(spec, x, t, y, s);
        const Matrix& A0 = spec.track.at(s);
        double diffusion = 0.0;
        for (int a = 0; a < spec.q; ++a)
            for (int b = 0; b < spec.q; ++b)
                diffusion += A0(a, b) * d.hess_y(a, b);
        const double drift = d.grad_y.dot(spec.B * y);

        const double h = fd_step(s);
        const double ds_fd = (gamma(spec, x, t, y, s + h).value -
                              gamma(spec, x, t, y, s - h).value) /
                             (2.0 * h);
        const double raw = std::abs(diffusion - drift - d.at.value * spec.trace_B + ds_fd);
        const double denom = std::abs(diffusion) + std::abs(drift) +
                             std::abs(d.at.value * spec.trace_B) + std::abs(ds_fd) +
                             d.at.value + 1e-300;
        residuals[i] = raw / denom;
        where[i] = point_string(y, s);
    });

    for (int i = 0; i < cfg.samples; ++i) {
        if (residuals[i] >= rec.worst) {
            rec.worst = residuals[i];
            rec.worst_at = where[i];
        }
    }
    rec.pass = rec.worst <= rec.tol;
    report.add(std::move(rec));
    return report;
}

VerificationReport mass_identities(const OperatorSpec& spec, const VerifyConfig& cfg) {
    VerificationReport report;
    report.suite = "mass";
    report.seed = cfg.seed;
    report.config = "spans=0.1,1,5";

    const double t0 = 0.0;
    const Vector x0 = Vector::Constant(spec.N, 0.3);
    for (double tau : {0.1, 1.0, 5.0}) {
        const double t = t0 + tau;
        const BundlePtr bundle = covariance(spec, t0, t);

        // int Gamma(x,t;x0,t0) dx: Gaussian in x with shape 2C around E x0
        {
            const double integral = principal_axis_integral(
                bundle->E_fwd * x0, 2.0 * bundle->C,
                [&](const Vector& x) { return gamma(spec, x, t, x0, t0).value; });
            const double target = std::exp(-tau * spec.trace_B);
            CheckRecord rec;
            rec.id = "mass_x_span_" + std::to_string(tau);
            rec.samples = 1;
            rec.tol = 1e-6;
            rec.worst = std::abs(integral - target) / target;
            rec.pass = rec.worst <= rec.tol;
            rec.worst_at = "integral=" + std::to_string(integral);
            report.add(std::move(rec));
        }

        // int Gamma(x0,t;y,t0) dy: Gaussian in y with shape 2 C'^{-1}
        {
            const Matrix Einv = bundle->E_fwd.inverse();
            const Matrix shape = linalg::symmetrized(2.0 * Einv * bundle->C * Einv.transpose());
            const double integral = principal_axis_integral(
                Einv * x0, shape,
                [&](const Vector& y) { return gamma(spec, x0, t, y, t0).value; });
            CheckRecord rec;
            rec.id = "mass_y_span_" + std::to_string(tau);
            rec.samples = 1;
            rec.tol = 1e-6;
            rec.worst = std::abs(integral - 1.0);
            rec.pass = rec.worst <= rec.tol;
            rec.worst_at = "integral=" + std::to_string(integral);
            report.add(std::move(rec));
        }
    }
    return report;
}

VerificationReport gauss_moment_selftest(int dim, std::uint64_t seed, int order) {
    VerificationReport report;
    report.suite = "gauss_moment";
    report.seed = seed;
    report.config = "order=" + std::to_string(order);

    auto rng = stream_rng(seed, 7);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Matrix A(dim, dim);
    Vector x0(dim);
    for (int i = 0; i < dim; ++i) {
        x0(i) = uni(rng);
        for (int j = 0; j < dim; ++j)
            A(i, j) = uni(rng);
    }

    const double pi_half = std::pow(M_PI, 0.5 * dim);

    {
        const double integral =
            quad::hermite_integrate(dim, order, [&](const Vector& z) { return z.dot(A * z); });
        const double target = 0.5 * pi_half * A.trace();
        CheckRecord rec;
        rec.id = "trace_moment";
        rec.samples = 1;
        rec.tol = 1e-10;
        rec.worst = std::abs(integral - target) / std::max(1.0, std::abs(target));
        rec.pass = rec.worst <= rec.tol;
        report.add(std::move(rec));
    }
    {
        const Matrix anti = 0.5 * (A - A.transpose());
        const double integral =
            quad::hermite_integrate(dim, order, [&](const Vector& z) { return z.dot(anti * z); });
        CheckRecord rec;
        rec.id = "antisymmetric_trace_moment";
        rec.samples = 1;
        rec.tol = 1e-10;
        rec.worst = std::abs(integral);
        rec.pass = rec.worst <= rec.tol;
        report.add(std::move(rec));
    }
    {
        const double integral =
            quad::hermite_integrate(dim, order, [&](const Vector& z) { return x0.dot(A * z); });
        CheckRecord rec;
        rec.id = "odd_moment";
        rec.samples = 1;
        rec.tol = 1e-12;
        rec.worst = std::abs(integral);
        rec.pass = rec.worst <= rec.tol;
        report.add(std::move(rec));
    }
    return report;
}

std::pair<double, CheckRecord> short_time_slope(const OperatorSpec& spec) {
    std::vector<double> xs, ys;
    for (int k = 6; k <= 16; ++k) {
        const double t = std::pow(2.0, -k);
        xs.push_back(std::log(t));
        ys.push_back(model_covariance(spec, t)->log_det());
    }
    const double n = static_cast<double>(xs.size());
    double xbar = 0.0, ybar = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xbar += xs[i];
        ybar += ys[i];
    }
    xbar /= n;
    ybar /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - xbar) * (ys[i] - ybar);
        sxx += (xs[i] - xbar) * (xs[i] - xbar);
    }
    const double q_fit = sxy / sxx;

    CheckRecord rec;
    rec.id = "short_time_slope";
    rec.samples = static_cast<int>(xs.size());
    rec.tol = 0.01;
    rec.worst = std::abs(q_fit - spec.structure.Q) / spec.structure.Q;
    rec.pass = rec.worst <= rec.tol;
    rec.worst_at = "Q_fit=" + std::to_string(q_fit);
    return {q_fit, rec};
}

namespace {

struct EnvelopeSample {
    double log_tau;
    double ratio;  // |x - E x0|^2 / tau
    double log_gamma;
};

std::vector<EnvelopeSample> draw_envelope_samples(const OperatorSpec& spec, int count,
                                                  std::uint64_t seed, double delta_max) {
    std::vector<EnvelopeSample> samples(count);
    parallel_for(count, 0, [&](std::size_t i) {
        auto rng = stream_rng(seed, i + 0x2545F4914F6CDD1Dull);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        const double log_lo = std::log10(1e-3), log_hi = std::log10(delta_max);
        const double tau = std::pow(10.0, log_lo + (log_hi - log_lo) * uni(rng));

        Vector x0(spec.N);
        for (int k = 0; k < spec.N; ++k)
            x0(k) = 2.0 * uni(rng) - 1.0;

        const BundlePtr bundle = covariance(spec, 0.0, tau);
        Vector offset(spec.N);
        if (uni(rng) < 0.5) {
            // near field: spread of the kernel itself
            Vector xi(spec.N);
            for (int k = 0; k < spec.N; ++k)
                xi(k) = 6.0 * uni(rng) - 3.0;
            offset = 2.0 * linalg::spd_sqrt(bundle->C) * xi;
        } else {
            // far field: the envelope's own sqrt(tau) scale
            for (int k = 0; k < spec.N; ++k)
                offset(k) = std::sqrt(tau) * (16.0 * uni(rng) - 8.0);
        }
        const Vector x = bundle->E_fwd * x0 + offset;
        samples[i] = {std::log(tau), offset.squaredNorm() / tau,
                      gamma(spec, x, tau, x0, 0.0).log_value};
    });
    return samples;
}

bool envelope_holds(const std::vector<EnvelopeSample>& samples, double c, double delta,
                    int Q) {
    const double log_delta = std::log(delta);
    for (const auto& s : samples) {
        if (s.log_tau > log_delta)
            continue;
        const double bound = -std::log(c) - 0.5 * Q * s.log_tau - c * s.ratio;
        if (s.log_gamma > bound + 1e-9 * std::max(1.0, std::abs(bound)))
            return false;
    }
    return true;
}

} // namespace

std::pair<ShortTimeConstants, CheckRecord> fit_short_time_constants(const OperatorSpec& spec,
                                                                    int train_samples,
                                                                    std::uint64_t seed) {
    const int Q = spec.structure.Q;
    const auto train = draw_envelope_samples(spec, train_samples, seed, 0.9);

    ShortTimeConstants best{0.0, 0.0};
    for (double delta = 0.9; delta >= 0.0999; delta -= 0.1) {
        for (double c = 0.95; c >= 0.0499; c -= 0.05) {
            if (envelope_holds(train, c, delta, Q)) {
                if (c > best.c + 1e-12 || (std::abs(c - best.c) < 1e-12 && delta > best.delta))
                    best = {c, delta};
                break;  // largest admissible c for this delta found
            }
        }
    }
    if (best.c == 0.0)
        throw FitFailed("no (c, delta) pair satisfies the short-time envelope on training data");

    // Validate on a fresh holdout; back off c a little if it overfit.
    const auto holdout = draw_envelope_samples(spec, train_samples, seed + 1, 0.9);
    CheckRecord rec;
    rec.id = "short_time_envelope_holdout";
    rec.samples = train_samples;
    rec.tol = 0.0;
    for (int attempt = 0; attempt < 3; ++attempt) {
        if (envelope_holds(holdout, best.c, best.delta, Q)) {
            rec.pass = true;
            break;
        }
        best.c -= 0.05;
        if (best.c < 0.05)
            throw FitFailed("short-time envelope failed holdout validation");
    }
    rec.worst_at = "c=" + std::to_string(best.c) + " delta=" + std::to_string(best.delta);
    return {best, rec};
}

LongTimeProbe long_time_probe(const OperatorSpec& spec, const Vector& x,
                              const std::vector<double>& t_schedule) {
    LongTimeProbe probe;
    const Vector origin = Vector::Zero(spec.N);
    for (double t : t_schedule) {
        const KernelEval eval = gamma(spec, x, t, origin, 0.0);
        probe.times.push_back(t);
        probe.values.push_back(eval.value);
        probe.log_values.push_back(eval.log_value);
    }
    return probe;
}

SdeConfig SdeConfig::from_spec(const OperatorSpec& spec, long paths, double dt) {
    SdeConfig cfg;
    cfg.paths = paths;
    cfg.dt = dt;
    for (const Matrix& piece : spec.track.pieces) {
        // sigma = sqrt(2) * chol(A0) in the first q rows satisfies
        // A0 = sigma sigma^T / 2 exactly.
        const auto factor = linalg::spd_factor(piece);
        Matrix sigma = Matrix::Zero(spec.N, spec.q);
        sigma.topLeftCorner(spec.q, spec.q) = std::sqrt(2.0) * factor.lower;
        cfg.sigma_pieces.push_back(std::move(sigma));
    }
    return cfg;
}

VerificationReport mc_crosscheck(const OperatorSpec& spec, const Vector& x0, double t0, double t,
                                 const SdeConfig& sde, std::uint64_t seed, unsigned threads) {
    VerificationReport report;
    report.suite = "mc";
    report.seed = seed;
    report.config = "paths=" + std::to_string(sde.paths) + " dt=" + std::to_string(sde.dt);

    if (sde.sigma_pieces.size() != spec.track.pieces.size())
        throw InconsistentSigma("sigma track must carry one piece per coefficient piece");
    for (std::size_t i = 0; i < sde.sigma_pieces.size(); ++i) {
        const Matrix& sigma = sde.sigma_pieces[i];
        if (sigma.rows() != spec.N || sigma.cols() != spec.q)
            throw InconsistentSigma("sigma piece has wrong shape");
        if (spec.N > spec.q && sigma.bottomRows(spec.N - spec.q).cwiseAbs().maxCoeff() > 0.0)
            throw InconsistentSigma("sigma piece must vanish below row q");
        const Matrix a_check = 0.5 * sigma.topRows(spec.q) * sigma.topRows(spec.q).transpose();
        const double scale = std::max(spec.track.pieces[i].cwiseAbs().maxCoeff(), 1e-300);
        if ((a_check - spec.track.pieces[i]).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw InconsistentSigma("sigma sigma^T / 2 does not reproduce A0 on piece " +
                                    std::to_string(i));
    }

    // Step schedule: never straddle a coefficient jump.
    struct Segment {
        double h;
        long steps;
        const Matrix* sigma;
    };
    std::vector<Segment> segments;
    std::vector<double> cuts{t0};
    for (double jump : spec.track.jumps_in(t0, t))
        cuts.push_back(jump);
    cuts.push_back(t);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = cuts[i], b = cuts[i + 1];
        const long steps = std::max<long>(1, static_cast<long>(std::ceil((b - a) / sde.dt)));
        // locate the piece like CoefficientTrack::at
        const double mid = 0.5 * (a + b);
        std::size_t idx = 0;
        for (std::size_t j = 0; j < spec.track.breakpoints.size(); ++j)
            if (spec.track.breakpoints[j] <= mid)
                idx = j;
        segments.push_back({(b - a) / steps, steps, &sde.sigma_pieces[idx]});
    }

    // Fixed-size blocks summed in index order keep the result bit-identical
    // for any thread count.
    const long per_block = 4096;
    const long nblocks = (sde.paths + per_block - 1) / per_block;
    std::vector<Vector> block_sum(nblocks, Vector::Zero(spec.N));
    std::vector<Matrix> block_outer(nblocks, Matrix::Zero(spec.N, spec.N));

    parallel_for(static_cast<std::size_t>(nblocks), threads, [&](std::size_t blk) {
        const long lo = static_cast<long>(blk) * per_block;
        const long hi = std::min(sde.paths, lo + per_block);
        Vector sum = Vector::Zero(spec.N);
        Matrix outer = Matrix::Zero(spec.N, spec.N);
        for (long p = lo; p < hi; ++p) {
            auto rng = stream_rng(seed, static_cast<std::uint64_t>(p));
            std::normal_distribution<double> gauss(0.0, 1.0);
            Vector X = x0;
            for (const Segment& seg : segments) {
                const double sqrt_h = std::sqrt(seg.h);
                for (long s = 0; s < seg.steps; ++s) {
                    Vector dw(spec.q);
                    for (int k = 0; k < spec.q; ++k)
                        dw(k) = sqrt_h * gauss(rng);
                    X += -seg.h * (spec.B * X) + (*seg.sigma) * dw;
                }
            }
            sum += X;
            outer += X * X.transpose();
        }
        block_sum[blk] = sum;
        block_outer[blk] = outer;
    });

    Vector sum = Vector::Zero(spec.N);
    Matrix outer = Matrix::Zero(spec.N, spec.N);
    for (long b = 0; b < nblocks; ++b) {
        sum += block_sum[b];
        outer += block_outer[b];
    }
    const double n = static_cast<double>(sde.paths);
    const Vector mean = sum / n;
    const Matrix cov = (outer - n * mean * mean.transpose()) / (n - 1.0);

    const BundlePtr bundle = covariance(spec, t0, t);
    const Vector mean_target = bundle->E_fwd * x0;
    const Matrix cov_target = 2.0 * bundle->C;

    CheckRecord mean_rec;
    mean_rec.id = "mc_mean";
    mean_rec.samples = static_cast<int>(std::min<long>(sde.paths, 1 << 30));
    mean_rec.tol = 5.0;
    for (int i = 0; i < spec.N; ++i) {
        const double se = std::sqrt(cov_target(i, i) / n);
        const double dev = std::abs(mean(i) - mean_target(i)) / se;
        if (dev >= mean_rec.worst) {
            mean_rec.worst = dev;
            mean_rec.worst_at = "component " + std::to_string(i);
        }
    }
    mean_rec.pass = mean_rec.worst <= mean_rec.tol;
    report.add(std::move(mean_rec));

    CheckRecord cov_rec;
    cov_rec.id = "mc_covariance";
    cov_rec.samples = static_cast<int>(std::min<long>(sde.paths, 1 << 30));
    cov_rec.tol = 5.0;
    for (int i = 0; i < spec.N; ++i) {
        for (int j = 0; j <= i; ++j) {
            const double var = cov_target(i, i) * cov_target(j, j) + cov_target(i, j) * cov_target(i, j);
            const double se = std::sqrt(var / n);
            const double dev = std::abs(cov(i, j) - cov_target(i, j)) / se;
            if (dev >= cov_rec.worst) {
                cov_rec.worst = dev;
                cov_rec.worst_at = "entry (" + std::to_string(i) + "," + std::to_string(j) + ")";
            }
        }
    }
    cov_rec.pass = cov_rec.worst <= cov_rec.tol;
    report.add(std::move(cov_rec));
    return report;
}

VerificationReport comparison_sweep(const OperatorSpec& spec, int samples, std::uint64_t seed) {
    VerificationReport report;
    report.suite = "comparison";
    report.seed = seed;
    report.config = "samples=" + std::to_string(samples);

    CheckRecord rec;
    rec.id = "comparison_sandwich";
    rec.samples = samples;
    rec.tol = 1e-12;

    std::vector<double> exceedance(samples);
    std::vector<std::string> where(samples);
    parallel_for(samples, 0, [&](std::size_t i) {
        auto rng = stream_rng(seed, i + 0xD1B54A32D192ED03ull);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        const double t0 = 2.0 * uni(rng) - 1.0;
        const double tau = 0.05 + 1.95 * uni(rng);
        const double t = t0 + tau;
        Vector x0(spec.N);
        for (int k = 0; k < spec.N; ++k)
            x0(k) = 4.0 * uni(rng) - 2.0;
        const BundlePtr bundle = covariance(spec, t0, t);
        Vector xi(spec.N);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int k = 0; k < spec.N; ++k)
            xi(k) = gauss(rng);
        const Vector x = bundle->E_fwd * x0 + 2.0 * linalg::spd_sqrt(bundle->C) * xi;

        const double log_g = gamma(spec, x, t, x0, t0).log_value;
        const ComparisonBounds bounds = comparison_bounds(spec, x, t, x0, t0);
        const double slack = std::max(1.0, std::abs(log_g));
        const double low_violation = (bounds.log_lower - log_g) / slack;
        const double up_violation = (log_g - bounds.log_upper) / slack;
        exceedance[i] = std::max({low_violation, up_violation, 0.0});
        where[i] = point_string(x, t) + " t0=" + std::to_string(t0);
    });

    for (int i = 0; i < samples; ++i) {
        if (exceedance[i] >= rec.worst) {
            rec.worst = exceedance[i];
            rec.worst_at = where[i];
        }
    }
    rec.pass = rec.worst <= rec.tol;
    report.add(std::move(rec));
    return report;
}

VerificationReport trace_identities(const OperatorSpec& spec, int times, double t0) {
    VerificationReport report;
    report.suite = "traces";
    report.config = "times=" + std::to_string(times);

    CheckRecord direct;
    direct.id = "det_derivative_t";
    direct.samples = times;
    direct.tol = 1e-5;

    CheckRecord adjoint;
    adjoint.id = "det_derivative_s";
    adjoint.samples = times;
    adjoint.tol = 1e-5;

    const double span = 2.0;
    const double t_top = t0 + span + 0.1071;
    for (int k = 0; k < times; ++k) {
        double tau = 0.1071 + span * (k + 0.5) / times;
        // nudge away from coefficient jumps if needed
        for (int tries = 0; tries < 64 && spec.track.distance_to_jump(t0 + tau) < 1e-4; ++tries)
            tau += 3.1e-4;
        const double t = t0 + tau;
        const double r1 = trace_identity_residual(spec, t0, t);
        if (r1 >= direct.worst) {
            direct.worst = r1;
            direct.worst_at = "t=" + std::to_string(t);
        }

        double s = t_top - tau;
        for (int tries = 0; tries < 64 && spec.track.distance_to_jump(s) < 1e-4; ++tries)
            s += 3.1e-4;
        const double r2 = adjoint_trace_identity_residual(spec, s, t_top);
        if (r2 >= adjoint.worst) {
            adjoint.worst = r2;
            adjoint.worst_at = "s=" + std::to_string(s);
        }
    }
    direct.pass = direct.worst <= direct.tol;
    adjoint.pass = adjoint.worst <= adjoint.tol;
    report.add(std::move(direct));
    report.add(std::move(adjoint));
    return report;
}

} // namespace kfp
