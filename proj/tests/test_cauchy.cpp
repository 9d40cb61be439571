#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "kfp/cauchy.hpp"
#include "kfp/problem_io.hpp"

using kfp::Matrix;
using kfp::Vector;

namespace {

Vector vec1(double a) {
    Vector v(1);
    v << a;
    return v;
}

kfp::CauchyDatum constant_one() {
    kfp::BoundedCallable f;
    f.f = [](const Vector&) { return 1.0; };
    f.sup_bound = 1.0;
    return f;
}

kfp::GridSampled bump_grid() {
    auto file = kfp::io::load_datum(fixtures::path("datum_bump_grid.json"), 1);
    return std::get<kfp::GridSampled>(file.datum);
}

} // namespace

TEST_CASE("constant datum is transported exactly (mass identity)") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (const auto& spec : {fixtures::heat(), fixtures::kolmogorov(), fixtures::ou(),
                             fixtures::kolmogorov_piecewise()}) {
        for (int i = 0; i < 5; ++i) {
            Vector x(spec.N);
            for (int k = 0; k < spec.N; ++k)
                x(k) = 2.0 * uni(rng);
            const double t = 0.3 + std::abs(uni(rng));
            const double u = kfp::solve_at(spec, constant_one(), 0.0, x, t);
            CHECK(u == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("heat blow-up datum reproduces the closed-form solution") {
    const auto spec = fixtures::heat();
    kfp::GaussianGrowth f;
    f.f = [](const Vector& y) { return std::exp(y(0) * y(0)); };
    f.alpha = 1.01;
    // u(x,t) = exp(x^2/(1-4t)) / sqrt(1-4t); at x = 0, t = 0.1: 1/sqrt(0.6)
    const double u = kfp::solve_at(spec, kfp::CauchyDatum(f), 0.0, vec1(0.0), 0.1);
    CHECK(u == doctest::Approx(1.2909944487358056).epsilon(1e-6));

    // second point, still inside the usable horizon 0.5/(4*1.01)
    const double x = 0.25, t = 0.12;
    const double expected = std::exp(x * x / (1.0 - 4.0 * t)) / std::sqrt(1.0 - 4.0 * t);
    CHECK(kfp::solve_at(spec, kfp::CauchyDatum(f), 0.0, vec1(x), t) ==
          doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("horizon matches the blow-up threshold for the heat operator") {
    const auto spec = fixtures::heat();
    const auto h = kfp::horizon(spec, 1.0);
    CHECK(h.raw == doctest::Approx(0.25).epsilon(1e-5));
    CHECK(h.usable == doctest::Approx(0.5 * h.raw));

    // alpha -> 0: condition holds everywhere on the bracket, capped at 1e3
    CHECK(kfp::horizon(spec, 1e-9).raw == doctest::Approx(1e3));

    // generic operator: a finite horizon exists and the solve is stable
    const auto example = fixtures::kolmogorov();
    const auto he = kfp::horizon(example, 1.0);
    CHECK(he.raw > 0.0);
    CHECK(he.raw < 1e3);
}

TEST_CASE("gaussian-growth solve is stable under order doubling near the horizon") {
    const auto spec = fixtures::kolmogorov();
    kfp::GaussianGrowth f;
    f.f = [](const Vector& y) { return std::exp(0.75 * y.squaredNorm()); };
    f.alpha = 0.8;
    const auto h = kfp::horizon(spec, f.alpha);
    REQUIRE(h.raw > 0.0);
    const double t = 0.9 * h.usable;
    kfp::SolveConfig coarse, fine;
    coarse.hermite_order = 40;
    fine.hermite_order = 80;
    const Vector x = Vector::Constant(2, 0.2);
    const double u1 = kfp::solve_at(spec, kfp::CauchyDatum(f), 0.0, x, t, coarse);
    const double u2 = kfp::solve_at(spec, kfp::CauchyDatum(f), 0.0, x, t, fine);
    CHECK(std::isfinite(u1));
    CHECK(std::abs(u1 - u2) <= 1e-6 * std::abs(u2));
}

TEST_CASE("solve refuses spans past the usable horizon") {
    const auto spec = fixtures::heat();
    kfp::GaussianGrowth f;
    f.f = [](const Vector& y) { return std::exp(y(0) * y(0)); };
    f.alpha = 1.01;
    try {
        kfp::solve_at(spec, kfp::CauchyDatum(f), 0.0, vec1(0.0), 0.3);
        FAIL("expected HorizonExceeded");
    } catch (const kfp::HorizonExceeded& e) {
        // usable horizon = 0.5 / (4 * 1.01)
        CHECK(e.usable_horizon == doctest::Approx(0.125 / 1.01).epsilon(1e-4));
    }
}

TEST_CASE("hermite order doubling changes smooth solves below 1e-8") {
    const auto spec = fixtures::kolmogorov();
    kfp::BoundedCallable f;
    f.f = [](const Vector& y) { return std::cos(y(0)) * std::cos(0.5 * y(1)); };
    kfp::SolveConfig coarse, fine;
    coarse.hermite_order = 40;
    fine.hermite_order = 80;
    const Vector x = Vector::Constant(2, 0.3);
    const double u1 = kfp::solve_at(spec, kfp::CauchyDatum(f), 0.0, x, 1.0, coarse);
    const double u2 = kfp::solve_at(spec, kfp::CauchyDatum(f), 0.0, x, 1.0, fine);
    CHECK(std::abs(u1 - u2) <= 1e-8 * std::abs(u2));
}

TEST_CASE("solve_at is linear and positive") {
    const auto spec = fixtures::heat();
    kfp::BoundedCallable f, g, combo;
    f.f = [](const Vector& y) { return std::cos(y(0)); };
    g.f = [](const Vector& y) { return 1.0 / (1.0 + y(0) * y(0)); };
    const double a = 2.5, b = -1.25;
    combo.f = [&](const Vector& y) { return a * std::cos(y(0)) + b / (1.0 + y(0) * y(0)); };

    const Vector x = vec1(0.4);
    const double uf = kfp::solve_at(spec, kfp::CauchyDatum(f), 0.0, x, 0.7);
    const double ug = kfp::solve_at(spec, kfp::CauchyDatum(g), 0.0, x, 0.7);
    const double uc = kfp::solve_at(spec, kfp::CauchyDatum(combo), 0.0, x, 0.7);
    CHECK(uc == doctest::Approx(a * uf + b * ug).epsilon(1e-12));

    // nonnegative datum gives a nonnegative solution
    const auto bump = bump_grid();
    for (double xv : {-1.0, 0.0, 2.0})
        CHECK(kfp::solve_at(spec, kfp::CauchyDatum(bump), 0.0, vec1(xv), 0.5) >= 0.0);
}

TEST_CASE("grid datum conserves mass under the heat flow") {
    const auto spec = fixtures::heat();
    const auto bump = bump_grid();

    // reference mass of the datum by its own trapezoid weights
    double mass_f = 0.0;
    for (std::size_t j = 0; j < bump.size(); ++j)
        mass_f += bump.weight(j) * bump.values[j];

    // integrate u(., t) over a wider box
    const double t = 0.1;
    kfp::GridSampled wide;
    wide.lo = vec1(-5.0);
    wide.hi = vec1(5.0);
    wide.shape = {201};
    wide.values.assign(201, 0.0);
    double mass_u = 0.0;
    for (std::size_t j = 0; j < wide.size(); ++j)
        mass_u += wide.weight(j) *
                  kfp::solve_at(spec, kfp::CauchyDatum(bump), 0.0, wide.point(j), t);
    CHECK(mass_u == doctest::Approx(mass_f).epsilon(1e-4));
}

TEST_CASE("solving in two hops equals solving directly") {
    const auto spec = fixtures::heat();
    const auto bump = bump_grid();
    const double tau = 0.1, t = 0.25;

    // first hop: sample u(., tau) on a wide grid and use it as a new datum
    kfp::GridSampled mid;
    mid.lo = vec1(-5.0);
    mid.hi = vec1(5.0);
    mid.shape = {401};
    mid.values.resize(401);
    for (std::size_t j = 0; j < mid.size(); ++j)
        mid.values[j] = kfp::solve_at(spec, kfp::CauchyDatum(bump), 0.0, mid.point(j), tau);

    for (double xv : {0.0, 0.5, -1.2}) {
        const double direct = kfp::solve_at(spec, kfp::CauchyDatum(bump), 0.0, vec1(xv), t);
        const double hopped = kfp::solve_at(spec, kfp::CauchyDatum(mid), tau, vec1(xv), t);
        CHECK(hopped == doctest::Approx(direct).epsilon(1e-6));
    }
}

TEST_CASE("reproduction formula residuals") {
    // heat: Gaussian convolution closes exactly, residual at quadrature level
    CHECK(kfp::reproduction_residual(fixtures::heat(), vec1(0.0), 1.0, vec1(0.0), 0.0, 0.5) <=
          1e-8);

    // Kolmogorov example at a generic off-axis point
    Vector x(2), y(2);
    x << 1.0, 1.0;
    y << 0.0, 0.0;
    CHECK(kfp::reproduction_residual(fixtures::kolmogorov(), x, 1.0, y, 0.0, 0.5) <= 1e-6);

    // OU with closed-form covariance
    CHECK(kfp::reproduction_residual(fixtures::ou(), vec1(0.0), 2.0, vec1(0.0), 0.0, 1.0) <=
          1e-8);

    CHECK_THROWS_AS(
        kfp::reproduction_residual(fixtures::heat(), vec1(0.0), 1.0, vec1(0.0), 0.0, 1.5),
        kfp::Error);
}

TEST_CASE("replication: gamma itself used as a datum reproduces gamma") {
    // The datum must be wide relative to the remaining transport for the
    // fixed-order Hermite rule to resolve it, so keep tau close to t.
    const auto spec = fixtures::kolmogorov();
    const double s = 0.0, tau = 0.8, t = 1.0;
    const Vector y = Vector::Zero(2);
    kfp::BoundedCallable f;
    f.f = [&](const Vector& z) { return kfp::gamma(spec, z, tau, y, s).value; };
    const Vector x = Vector::Constant(2, 0.6);
    kfp::SolveConfig cfg;
    cfg.hermite_order = 60;
    const double u = kfp::solve_at(spec, kfp::CauchyDatum(f), tau, x, t, cfg);
    const double expected = kfp::gamma(spec, x, t, y, s).value;
    CHECK(u == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("initial trace report for a grid bump in L1") {
    const auto spec = fixtures::heat();
    const auto bump = bump_grid();
    kfp::TraceRequest request;
    request.mode = kfp::TraceMode::Lp;
    request.p = 1.0;
    const auto report = kfp::initial_trace_report(spec, kfp::CauchyDatum(bump), 0.0, request);
    REQUIRE(report.rows.size() == 5);
    CHECK(report.decreasing);
    CHECK(report.final_value < 1e-2);
}

TEST_CASE("initial trace of a constant datum stays at quadrature error") {
    const auto spec = fixtures::kolmogorov();
    kfp::TraceRequest request;
    request.mode = kfp::TraceMode::Uniform;
    request.box_lo = Vector::Constant(2, -2.0);
    request.box_hi = Vector::Constant(2, 2.0);
    request.box_points = 9;
    const auto report = kfp::initial_trace_report(spec, constant_one(), 0.0, request);
    for (const auto& [t, disc] : report.rows)
        CHECK(disc <= 1e-8);
}

TEST_CASE("pointwise initial trace converges for a continuous datum") {
    const auto spec = fixtures::heat();
    kfp::BoundedCallable f;
    f.f = [](const Vector& y) { return std::cos(y(0)); };
    kfp::TraceRequest request;
    request.mode = kfp::TraceMode::Pointwise;
    request.x0 = vec1(0.3);
    const auto report = kfp::initial_trace_report(spec, kfp::CauchyDatum(f), 0.0, request);
    CHECK(report.decreasing);
    CHECK(report.final_value <= 1e-4);
}

TEST_CASE("growth class certificate stays finite") {
    const auto spec = fixtures::heat();

    // bounded datum: |u| <= 1, so the certificate is at most T (pi/C)^{N/2}
    const double cert_one = kfp::growth_class_certificate(spec, constant_one(), 0.0, 1.0, 1.0);
    CHECK(std::isfinite(cert_one));
    CHECK(cert_one <= 1.0 * std::sqrt(M_PI / 1.0) * 1.01);
    CHECK(cert_one >= 0.95 * std::sqrt(M_PI));

    // Gaussian-growth datum within its horizon
    kfp::GaussianGrowth f;
    f.f = [](const Vector& y) { return std::exp(y(0) * y(0)); };
    f.alpha = 1.01;
    const double cert_growth = kfp::growth_class_certificate(spec, kfp::CauchyDatum(f), 0.0,
                                                             0.12, 4.0);
    CHECK(std::isfinite(cert_growth));
    CHECK(cert_growth > 0.0);

    // grid bump
    const double cert_bump =
        kfp::growth_class_certificate(spec, kfp::CauchyDatum(bump_grid()), 0.0, 1.0, 1.0);
    CHECK(std::isfinite(cert_bump));
    CHECK(cert_bump > 0.0);

    // past the horizon the certificate must refuse
    CHECK_THROWS_AS(
        kfp::growth_class_certificate(spec, kfp::CauchyDatum(f), 0.0, 0.2, 4.0),
        kfp::HorizonExceeded);
}

TEST_CASE("unsupported dimension for tensor quadrature") {
    kfp::Matrix B = kfp::Matrix::Zero(4, 4);
    const auto spec = kfp::OperatorSpec::make(
        B, {4}, kfp::CoefficientTrack::constant(kfp::Matrix::Identity(4, 4)));
    CHECK_THROWS_AS(
        kfp::solve_at(spec, constant_one(), 0.0, Vector::Zero(4), 1.0),
        kfp::UnsupportedDimension);
}

TEST_CASE("grid datum validation") {
    kfp::GridSampled bad;
    bad.lo = vec1(0.0);
    bad.hi = vec1(1.0);
    bad.shape = {1};  // too few points
    bad.values = {1.0};
    CHECK_THROWS_AS(bad.validate(), kfp::Error);

    bad.shape = {3};
    bad.values = {1.0, 2.0};  // wrong count
    CHECK_THROWS_AS(bad.validate(), kfp::Error);
}
