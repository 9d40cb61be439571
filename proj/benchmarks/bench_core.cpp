#include <benchmark/benchmark.h>

#include "kfp/cauchy.hpp"
#include "kfp/kernel.hpp"

namespace {

kfp::OperatorSpec example_spec() {
    kfp::Matrix B(2, 2);
    B << 0, 0, 1, 0;
    kfp::Matrix a(1, 1);
    a << 1.0;
    return kfp::OperatorSpec::make(B, {1, 1}, kfp::CoefficientTrack::constant(a));
}

void BM_MatExp(benchmark::State& state) {
    kfp::Matrix M(3, 3);
    M << 0, 1, 0.5, -1, 0, 2, 0.3, -2, 0;
    for (auto _ : state)
        benchmark::DoNotOptimize(kfp::linalg::mat_exp(M, 0.7));
}
BENCHMARK(BM_MatExp);

void BM_CovarianceBundle(benchmark::State& state) {
    const auto spec = example_spec();
    double t = 1.0;
    for (auto _ : state) {
        t += 1e-9;  // defeat the cache: every span is fresh
        benchmark::DoNotOptimize(kfp::covariance(spec, 0.0, t));
    }
}
BENCHMARK(BM_CovarianceBundle);

void BM_GammaCached(benchmark::State& state) {
    const auto spec = example_spec();
    const kfp::Vector x = kfp::Vector::Constant(2, 0.3);
    const kfp::Vector x0 = kfp::Vector::Zero(2);
    kfp::gamma(spec, x, 1.0, x0, 0.0);  // warm the bundle
    for (auto _ : state)
        benchmark::DoNotOptimize(kfp::gamma(spec, x, 1.0, x0, 0.0));
}
BENCHMARK(BM_GammaCached);

void BM_DerivBundle(benchmark::State& state) {
    const auto spec = example_spec();
    const kfp::Vector x = kfp::Vector::Constant(2, 0.3);
    const kfp::Vector x0 = kfp::Vector::Zero(2);
    kfp::gamma(spec, x, 1.0, x0, 0.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(kfp::derivatives(spec, x, 1.0, x0, 0.0));
}
BENCHMARK(BM_DerivBundle);

void BM_SolveHermite(benchmark::State& state) {
    const auto spec = example_spec();
    kfp::BoundedCallable datum;
    datum.f = [](const kfp::Vector& y) { return std::cos(y(0)) * std::cos(y(1)); };
    const kfp::Vector x = kfp::Vector::Zero(2);
    kfp::SolveConfig cfg;
    cfg.hermite_order = static_cast<int>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(kfp::solve_at(spec, kfp::CauchyDatum(datum), 0.0, x, 1.0, cfg));
}
BENCHMARK(BM_SolveHermite)->Arg(20)->Arg(40)->Arg(80);

} // namespace

int main(int argc, char** argv) {
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv))
        return 1;
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
