#include "qch/baselines.hpp"
#include "qch/joint_em.hpp"
#include "qch/query.hpp"
#include "qch/simulation.hpp"

#include <benchmark/benchmark.h>

using namespace qch;

namespace {

SimulatedData scenario(std::size_t n, int q) {
    ScenarioSpec spec;
    spec.n = n;
    spec.num_tests = q;
    CounterRng rng(7);
    return generate(spec, rng);
}

} // namespace

static void BM_FixedPoint(benchmark::State& state) {
    const auto data = scenario(static_cast<std::size_t>(state.range(0)), 2);
    std::vector<double> p(data.pmatrix.num_items());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = data.pmatrix(i, 0);
    const auto scores = probit_transform(p);
    const double pi0 = estimate_pi0(p);
    const double h = select_bandwidth(scores);
    for (auto _ : state) benchmark::DoNotOptimize(kde_fixed_point(scores, pi0, h));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FixedPoint)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

static void BM_EStep(benchmark::State& state) {
    const int q = static_cast<int>(state.range(1));
    const auto data = scenario(static_cast<std::size_t>(state.range(0)), q);
    const auto model = fit_joint(data.pmatrix);
    std::vector<ProbitScores> scores;
    for (int c = 0; c < q; ++c) {
        std::vector<double> p(data.pmatrix.num_items());
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = data.pmatrix(i, c);
        scores.push_back(probit_transform(p));
    }
    const auto logdens = build_component_densities(model.marginals, scores);
    for (auto _ : state) benchmark::DoNotOptimize(compute_posteriors(logdens, model.joint.weights, 1));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EStep)->Args({100000, 2})->Args({100000, 8})->Unit(benchmark::kMillisecond);

static void BM_Query(benchmark::State& state) {
    const auto data = scenario(static_cast<std::size_t>(state.range(0)), 8);
    const auto model = fit_joint(data.pmatrix);
    const auto c1 = at_least_k(8, 8);
    for (auto _ : state) benchmark::DoNotOptimize(run_query(model.joint, c1, 0.05));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Query)->Arg(100000)->Unit(benchmark::kMillisecond);

static void BM_BenjaminiHochberg(benchmark::State& state) {
    const auto data = scenario(static_cast<std::size_t>(state.range(0)), 2);
    std::vector<double> p(data.pmatrix.num_items());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = data.pmatrix(i, 0);
    for (auto _ : state) benchmark::DoNotOptimize(bh_adjust(p));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BenjaminiHochberg)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
