#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kfp/cauchy.hpp"
#include "kfp/kernel.hpp"

namespace kfp {

struct CheckRecord {
    std::string id;
    int samples = 0;
    double worst = 0.0;  // worst residual (or margin) seen
    double tol = 0.0;
    bool pass = false;
    std::string worst_at;  // location of the worst case
};

/// One verification run; deterministic given (spec, seed, config).
struct VerificationReport {
    std::string suite;
    std::uint64_t seed = 0;
    std::string config;
    std::vector<CheckRecord> checks;

    bool passed() const {
        for (const auto& c : checks)
            if (!c.pass)
                return false;
        return true;
    }
    void add(CheckRecord record) { checks.push_back(std::move(record)); }
};

struct VerifyConfig {
    int samples = 100;
    std::uint64_t seed = 42;
    double min_gap = 0.05;  // smallest t - t0 for residual samples
    double span = 2.0;      // largest t - t0 for residual samples
    unsigned threads = 0;
};

/// Euler-Maruyama configuration; sigma_pieces follow the track pieces and
/// must satisfy sigma sigma^T / 2 = A0 blockwise.
struct SdeConfig {
    long paths = 100000;
    double dt = 1e-3;
    std::vector<Matrix> sigma_pieces;  // N x q, zero rows below row q

    static SdeConfig from_spec(const OperatorSpec& spec, long paths = 100000, double dt = 1e-3);
};

// Worst normalized residual of L Gamma over random off-jump samples; spatial
// derivatives analytic, time derivative by central difference within a piece.
VerificationReport pde_residual(const OperatorSpec& spec, const Vector& x0, double t0,
                                const VerifyConfig& cfg = {});

// Same for the transposed equation in the pole variables (y, s), (x, t) fixed.
VerificationReport adjoint_residual(const OperatorSpec& spec, const Vector& x, double t,
                                    const VerifyConfig& cfg = {});

// int Gamma dx = exp(-(t-t0) Tr B) and int Gamma dy = 1 by grid quadrature
// over the Gaussian's principal axes, spans t - t0 in {0.1, 1, 5}.
VerificationReport mass_identities(const OperatorSpec& spec, const VerifyConfig& cfg = {});

// Gauss-Hermite self-test: int exp(-|x|^2) x'Ax dx = pi^{N/2}/2 Tr A and the
// odd moment vanishes. Validates the quadrature stack itself.
VerificationReport gauss_moment_selftest(int dim, std::uint64_t seed = 42, int order = 24);

// Least-squares slope of log det C0(t) against log t over t = 2^-k, k = 6..16;
// recovers the homogeneous dimension Q.
std::pair<double, CheckRecord> short_time_slope(const OperatorSpec& spec);

// Fits (c, delta) for the short-time envelope on a training sample, then
// validates on a fresh holdout with a different seed.
std::pair<ShortTimeConstants, CheckRecord> fit_short_time_constants(
    const OperatorSpec& spec, int train_samples = 10000, std::uint64_t seed = 42);

struct LongTimeProbe {
    std::vector<double> times;
    std::vector<double> values;
    std::vector<double> log_values;
};

// Tabulates Gamma(x, t; 0, 0) along a schedule; purely diagnostic.
LongTimeProbe long_time_probe(const OperatorSpec& spec, const Vector& x,
                              const std::vector<double>& t_schedule);

// Euler-Maruyama cross-check: empirical mean against E(t-t0) x0 and empirical
// covariance against 2 C(t, t0), both within 5 standard errors.
VerificationReport mc_crosscheck(const OperatorSpec& spec, const Vector& x0, double t0, double t,
                                 const SdeConfig& sde, std::uint64_t seed = 42,
                                 unsigned threads = 0);

// Two-sided model-kernel sandwich at random samples, log domain, with
// violations tolerated only within 1e-12 relative slack.
VerificationReport comparison_sweep(const OperatorSpec& spec, int samples = 10000,
                                    std::uint64_t seed = 42);

// Derivative-of-determinant identities at off-jump sample times.
VerificationReport trace_identities(const OperatorSpec& spec, int times = 20, double t0 = 0.0);

} // namespace kfp
