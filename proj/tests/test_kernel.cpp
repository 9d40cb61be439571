#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "kfp/kernel.hpp"
#include "kfp/parallel.hpp"
#include "kfp/verify.hpp"

using kfp::Matrix;
using kfp::Vector;

namespace {

Vector vec1(double a) {
    Vector v(1);
    v << a;
    return v;
}

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

// central finite differences of gamma in the x variables
Vector fd_grad_x(const kfp::OperatorSpec& spec, const Vector& x, double t, const Vector& y,
                 double s) {
    Vector g(spec.N);
    for (int k = 0; k < spec.N; ++k) {
        const double h = 1e-5 * (1.0 + std::abs(x(k)));
        Vector xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        g(k) = (kfp::gamma(spec, xp, t, y, s).value - kfp::gamma(spec, xm, t, y, s).value) /
               (2.0 * h);
    }
    return g;
}

Matrix fd_hess_x(const kfp::OperatorSpec& spec, const Vector& x, double t, const Vector& y,
                 double s) {
    Matrix H(spec.N, spec.N);
    for (int a = 0; a < spec.N; ++a) {
        for (int b = 0; b < spec.N; ++b) {
            const double ha = 1e-5 * (1.0 + std::abs(x(a)));
            const double hb = 1e-5 * (1.0 + std::abs(x(b)));
            if (a == b) {
                Vector xp = x, xm = x;
                xp(a) += ha;
                xm(a) -= ha;
                H(a, a) = (kfp::gamma(spec, xp, t, y, s).value -
                           2.0 * kfp::gamma(spec, x, t, y, s).value +
                           kfp::gamma(spec, xm, t, y, s).value) /
                          (ha * ha);
            } else {
                Vector pp = x, pm = x, mp = x, mm = x;
                pp(a) += ha; pp(b) += hb;
                pm(a) += ha; pm(b) -= hb;
                mp(a) -= ha; mp(b) += hb;
                mm(a) -= ha; mm(b) -= hb;
                H(a, b) = (kfp::gamma(spec, pp, t, y, s).value - kfp::gamma(spec, pm, t, y, s).value -
                           kfp::gamma(spec, mp, t, y, s).value + kfp::gamma(spec, mm, t, y, s).value) /
                          (4.0 * ha * hb);
            }
        }
    }
    return H;
}

Vector fd_grad_y(const kfp::OperatorSpec& spec, const Vector& x, double t, const Vector& y,
                 double s) {
    Vector g(spec.N);
    for (int k = 0; k < spec.N; ++k) {
        const double h = 1e-5 * (1.0 + std::abs(y(k)));
        Vector yp = y, ym = y;
        yp(k) += h;
        ym(k) -= h;
        g(k) = (kfp::gamma(spec, x, t, yp, s).value - kfp::gamma(spec, x, t, ym, s).value) /
               (2.0 * h);
    }
    return g;
}

Matrix fd_hess_y(const kfp::OperatorSpec& spec, const Vector& x, double t, const Vector& y,
                 double s) {
    Matrix H(spec.N, spec.N);
    for (int a = 0; a < spec.N; ++a) {
        for (int b = 0; b < spec.N; ++b) {
            const double ha = 1e-5 * (1.0 + std::abs(y(a)));
            const double hb = 1e-5 * (1.0 + std::abs(y(b)));
            if (a == b) {
                Vector yp = y, ym = y;
                yp(a) += ha;
                ym(a) -= ha;
                H(a, a) = (kfp::gamma(spec, x, t, yp, s).value -
                           2.0 * kfp::gamma(spec, x, t, y, s).value +
                           kfp::gamma(spec, x, t, ym, s).value) /
                          (ha * ha);
            } else {
                Vector pp = y, pm = y, mp = y, mm = y;
                pp(a) += ha; pp(b) += hb;
                pm(a) += ha; pm(b) -= hb;
                mp(a) -= ha; mp(b) += hb;
                mm(a) -= ha; mm(b) -= hb;
                H(a, b) = (kfp::gamma(spec, x, t, pp, s).value - kfp::gamma(spec, x, t, pm, s).value -
                           kfp::gamma(spec, x, t, mp, s).value + kfp::gamma(spec, x, t, mm, s).value) /
                          (4.0 * ha * hb);
            }
        }
    }
    return H;
}

void check_derivative_oracle(const kfp::OperatorSpec& spec, int points, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int i = 0; i < points; ++i) {
        const double s = uni(rng);
        const double t = s + 0.4 + 0.8 * std::abs(uni(rng));
        Vector y(spec.N), x(spec.N);
        for (int k = 0; k < spec.N; ++k)
            y(k) = uni(rng);
        const auto bundle = kfp::covariance(spec, s, t);
        Vector xi(spec.N);
        for (int k = 0; k < spec.N; ++k)
            xi(k) = 1.5 * uni(rng);
        x = bundle->E_fwd * y + kfp::linalg::spd_sqrt(bundle->C) * xi;

        const kfp::DerivBundle d = kfp::derivatives(spec, x, t, y, s);

        const Vector gx = fd_grad_x(spec, x, t, y, s);
        CHECK((d.grad_x - gx).cwiseAbs().maxCoeff() <=
              1e-5 * std::max(gx.cwiseAbs().maxCoeff(), d.at.value));

        const Matrix hx = fd_hess_x(spec, x, t, y, s);
        CHECK((d.hess_x - hx).cwiseAbs().maxCoeff() <=
              2e-5 * std::max(hx.cwiseAbs().maxCoeff(), d.at.value));

        const Vector gy = fd_grad_y(spec, x, t, y, s);
        CHECK((d.grad_y - gy).cwiseAbs().maxCoeff() <=
              1e-5 * std::max(gy.cwiseAbs().maxCoeff(), d.at.value));

        const Matrix hy = fd_hess_y(spec, x, t, y, s);
        CHECK((d.hess_y - hy).cwiseAbs().maxCoeff() <=
              2e-5 * std::max(hy.cwiseAbs().maxCoeff(), d.at.value));
    }
}

} // namespace

TEST_CASE("gamma reduces to the 1-d heat kernel") {
    const auto spec = fixtures::heat();
    const auto eval = kfp::gamma(spec, vec1(0.0), 1.0, vec1(0.0), 0.0);
    CHECK(eval.value == doctest::Approx(0.28209479177387814).epsilon(1e-12));

    // general point: (4 pi t)^{-1/2} exp(-x^2 / 4t)
    const double x = 0.8, t = 0.37;
    const double expected = std::exp(-x * x / (4.0 * t)) / std::sqrt(4.0 * M_PI * t);
    CHECK(kfp::gamma(spec, vec1(x), t, vec1(0.0), 0.0).value ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("gamma matches the Kolmogorov example closed form") {
    const auto spec = fixtures::kolmogorov();
    const auto eval = kfp::gamma(spec, vec2(0.0, 0.0), 1.0, vec2(0.0, 0.0), 0.0);
    CHECK(eval.value == doctest::Approx(0.27566444771089604).epsilon(1e-10));

    // full closed form at a generic point:
    // sqrt(3)/(2 pi t^2) exp(-(x1^2/t + 3 x1 x2/t^2 + 3 x2^2/t^3))
    const double t = 0.8, x1 = 0.3, x2 = -0.2;
    const double expected = std::sqrt(3.0) / (2.0 * M_PI * t * t) *
                            std::exp(-(x1 * x1 / t + 3.0 * x1 * x2 / (t * t) +
                                       3.0 * x2 * x2 / (t * t * t)));
    CHECK(kfp::gamma(spec, vec2(x1, x2), t, vec2(0.0, 0.0), 0.0).value ==
          doctest::Approx(expected).epsilon(1e-11));
}

TEST_CASE("evaluation proceeds arbitrarily close to the pole time") {
    // no artificial floor: at span 1e-13 the heat kernel is just a very tall
    // Gaussian, (4 pi 1e-13)^{-1/2} at the center
    const auto spec = fixtures::heat();
    const auto eval = kfp::gamma(spec, vec1(0.0), 1e-13, vec1(0.0), 0.0);
    CHECK(std::isfinite(eval.log_value));
    CHECK(eval.value == doctest::Approx(1.0 / std::sqrt(4.0 * M_PI * 1e-13)).epsilon(1e-10));
}

TEST_CASE("kernel entry points reject mismatched dimensions") {
    const auto spec = fixtures::kolmogorov();
    CHECK_THROWS_AS(kfp::gamma(spec, vec1(0.0), 1.0, vec2(0.0, 0.0), 0.0), kfp::Error);
    CHECK_THROWS_AS(kfp::derivatives(spec, vec2(0.0, 0.0), 1.0, vec1(0.0), 0.0), kfp::Error);
}

TEST_CASE("gamma vanishes at and before the pole time") {
    const auto spec = fixtures::kolmogorov();
    for (double t : {0.0, -0.5}) {
        const auto eval = kfp::gamma(spec, vec2(1.0, 1.0), t, vec2(0.0, 0.0), 0.0);
        CHECK(eval.value == 0.0);
        CHECK(std::isinf(eval.log_value));
        CHECK(eval.log_value < 0.0);
    }
}

TEST_CASE("gamma_model equals gamma for constant coefficients") {
    const double alpha = 0.7;
    const auto spec = fixtures::kolmogorov(alpha);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const double t0 = uni(rng);
        const double t = t0 + 0.1 + std::abs(uni(rng));
        const Vector x = vec2(2.0 * uni(rng), 2.0 * uni(rng));
        const Vector x0 = vec2(uni(rng), uni(rng));
        const double direct = kfp::gamma(spec, x, t, x0, t0).value;
        const double model = kfp::gamma_model(spec, alpha, x, t, x0, t0).value;
        CHECK(model == doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("model kernel translation invariance") {
    const auto spec = fixtures::kolmogorov_piecewise();
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const double alpha = 0.5 + std::abs(uni(rng));
        const double t0 = uni(rng);
        const double tau = 0.2 + std::abs(uni(rng));
        const Vector x = vec2(2.0 * uni(rng), 2.0 * uni(rng));
        const Vector x0 = vec2(uni(rng), uni(rng));
        const double lhs = kfp::gamma_model(spec, alpha, x, t0 + tau, x0, t0).log_value;
        const Vector shifted = x - kfp::propagator(spec, tau) * x0;
        const double rhs =
            kfp::gamma_model(spec, alpha, shifted, tau, Vector::Zero(2), 0.0).log_value;
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("gradient vanishes at the moving center") {
    const auto spec = fixtures::kolmogorov();
    const Vector y = vec2(0.4, -0.3);
    const double s = 0.1, t = 1.3;
    const Vector center = kfp::propagator(spec, t - s) * y;
    const auto d = kfp::derivatives(spec, center, t, y, s);
    CHECK(d.grad_x.cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("heat kernel spatial derivative closed form") {
    // at t = 1, C = 1, so d/dx Gamma = -(x/2) Gamma
    const auto spec = fixtures::heat();
    const double x = 0.7;
    const auto d = kfp::derivatives(spec, vec1(x), 1.0, vec1(0.0), 0.0);
    CHECK(d.grad_x(0) == doctest::Approx(-0.5 * x * d.at.value).epsilon(1e-12));
}

TEST_CASE("derivative closed forms match finite differences") {
    check_derivative_oracle(fixtures::heat(), 25, 101);
    check_derivative_oracle(fixtures::kolmogorov(), 25, 102);
    check_derivative_oracle(fixtures::ou(), 25, 103);
    check_derivative_oracle(fixtures::chain3(), 10, 104);
}

TEST_CASE("time derivative equals the finite difference away from jumps") {
    for (const auto& spec : {fixtures::kolmogorov(), fixtures::ou()}) {
        const Vector x = Vector::Constant(spec.N, 0.4);
        const Vector y = Vector::Zero(spec.N);
        const double t = 1.1007, s = 0.0;
        const auto d = kfp::derivatives(spec, x, t, y, s);
        const double h = 1e-6 * t;
        const double fd = (kfp::gamma(spec, x, t + h, y, s).value -
                           kfp::gamma(spec, x, t - h, y, s).value) /
                          (2.0 * h);
        CHECK(d.dt == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("comparison bounds collapse to equality for nu = 1") {
    const auto spec = fixtures::kolmogorov();
    REQUIRE(spec.nu == doctest::Approx(1.0));
    const Vector x = vec2(0.7, -0.4);
    const double g = kfp::gamma(spec, x, 1.0, vec2(0.0, 0.0), 0.0).log_value;
    const auto bounds = kfp::comparison_bounds(spec, x, 1.0, vec2(0.0, 0.0), 0.0);
    CHECK(bounds.log_lower == doctest::Approx(g).epsilon(1e-12));
    CHECK(bounds.log_upper == doctest::Approx(g).epsilon(1e-12));
}

TEST_CASE("comparison sandwich is strict for the piecewise fixture") {
    const auto spec = fixtures::kolmogorov_piecewise();
    const Vector x = vec2(1.0, 1.0);
    const double g = kfp::gamma(spec, x, 1.0, vec2(0.0, 0.0), 0.0).log_value;
    const auto bounds = kfp::comparison_bounds(spec, x, 1.0, vec2(0.0, 0.0), 0.0);
    CHECK(bounds.log_lower < g);
    CHECK(g < bounds.log_upper);
}

TEST_CASE("scalar heat with a = 2 is tight against the lower model bound at the origin") {
    kfp::Matrix B(1, 1), a(1, 1);
    B << 0.0;
    a << 2.0;
    const auto spec = kfp::OperatorSpec::make(B, {1}, kfp::CoefficientTrack::constant(a), 0.5);
    const Vector zero = vec1(0.0);
    const double g = kfp::gamma(spec, zero, 1.0, zero, 0.0).value;
    CHECK(g == doctest::Approx(0.19947114020071635).epsilon(1e-12));  // (8 pi)^{-1/2}
    const auto bounds = kfp::comparison_bounds(spec, zero, 1.0, zero, 0.0);
    CHECK(bounds.lower == doctest::Approx(g).epsilon(1e-12));
    CHECK(bounds.upper == doctest::Approx(2.0 * g).epsilon(1e-12));
}

TEST_CASE("short-time upper bound is a usable envelope after fitting") {
    const auto spec = fixtures::heat();
    const auto [fitted, holdout] = kfp::fit_short_time_constants(spec, 2000, 7);
    CHECK(holdout.pass);
    CHECK(fitted.c >= 0.2);

    const Vector zero = vec1(0.0);
    const double log_bound = kfp::short_time_upper_log(spec, zero, 0.01, zero, 0.0, fitted);
    CHECK(kfp::gamma(spec, zero, 0.01, zero, 0.0).log_value <= log_bound);

    // far from the center both sides underflow; compare in the log domain
    const double far_bound = kfp::short_time_upper_log(spec, vec1(10.0), 0.01, zero, 0.0, fitted);
    const double far_log = kfp::gamma(spec, vec1(10.0), 0.01, zero, 0.0).log_value;
    CHECK(far_log < -690.0);  // value underflows to zero
    CHECK(far_log <= far_bound);

    CHECK_THROWS_AS(
        kfp::short_time_upper_log(spec, zero, fitted.delta + 1.0, zero, 0.0, fitted),
        kfp::HorizonExceeded);
}

TEST_CASE("parallel evaluation matches serial evaluation bitwise") {
    // one covariance cache shared across threads; whoever computes a bundle
    // first, the quadrature is deterministic, so values must agree exactly
    const int n = 200;
    auto eval_all = [&](const kfp::OperatorSpec& spec, unsigned threads) {
        std::vector<double> out(n);
        kfp::parallel_for(n, threads, [&](std::size_t i) {
            std::mt19937_64 rng(1000 + i);
            std::uniform_real_distribution<double> uni(-1.0, 1.0);
            const double t0 = uni(rng);
            const double t = t0 + 0.2 + std::abs(uni(rng));
            const Vector x = vec2(2.0 * uni(rng), 2.0 * uni(rng));
            const Vector x0 = vec2(uni(rng), uni(rng));
            out[i] = kfp::gamma(spec, x, t, x0, t0).log_value;
        });
        return out;
    };
    const auto serial = eval_all(fixtures::kolmogorov_piecewise(), 1);
    const auto parallel = eval_all(fixtures::kolmogorov_piecewise(), 4);
    for (int i = 0; i < n; ++i)
        CHECK(serial[i] == parallel[i]);
}

TEST_CASE("copies of a spec share the covariance cache") {
    const auto spec = fixtures::kolmogorov();
    const auto copy = spec;
    const auto a = kfp::covariance(spec, 0.0, 0.77);
    const auto b = kfp::covariance(copy, 0.0, 0.77);
    CHECK(a.get() == b.get());
}

TEST_CASE("joint continuity off the pole: gamma -> 0 approaching the initial time") {
    const auto spec = fixtures::kolmogorov();
    const Vector x0 = vec2(0.0, 0.0);
    const Vector target = vec2(1.0, 0.5);  // != x0
    double previous = 1.0;
    for (int k = 1; k <= 5; ++k) {
        const double t = std::pow(10.0, -k);
        // five approach paths: x converges to the target alongside t
        const Vector x = target + Vector::Constant(2, 0.1 * t);
        const double value = kfp::gamma(spec, x, t, x0, 0.0).value;
        CHECK(value <= previous + 1e-300);
        previous = value;
    }
    CHECK(previous <= 1e-10);
}

TEST_CASE("spatial decay of gamma and its derivatives") {
    // along the diffusive direction x1 the exponent is -x1^2/t; at |x| = 40
    // the value underflows to an exact zero, which still counts as decay
    const auto spec = fixtures::kolmogorov();
    const Vector y = vec2(0.0, 0.0);
    double prev_gamma = std::numeric_limits<double>::infinity();
    double prev_grad = std::numeric_limits<double>::infinity();
    double prev_hess = std::numeric_limits<double>::infinity();
    for (double radius : {10.0, 20.0, 40.0}) {
        const Vector x = vec2(radius, 0.0);
        const auto d = kfp::derivatives(spec, x, 1.0, y, 0.0);
        CHECK(d.at.value <= prev_gamma);
        CHECK(d.grad_x.cwiseAbs().maxCoeff() <= prev_grad);
        CHECK(d.hess_x.cwiseAbs().maxCoeff() <= prev_hess);
        if (radius <= 20.0)
            CHECK(d.at.value > 0.0);  // representable until ~exp(-708)
        prev_gamma = d.at.value;
        prev_grad = d.grad_x.cwiseAbs().maxCoeff();
        prev_hess = d.hess_x.cwiseAbs().maxCoeff();
    }
    CHECK(prev_gamma == 0.0);  // fully underflowed at |x| = 40
}
