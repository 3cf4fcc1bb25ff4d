#include "oracles.hpp"

#include "qch/error.hpp"
#include "qch/simulation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace qch;

TEST(Rng, CounterBasedAndSplittable) {
    CounterRng a(42), b(42);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(a(), b());
    CounterRng c(42);
    EXPECT_EQ(c.at(5), CounterRng(42).at(5));
    EXPECT_NE(c.split(1).at(0), c.split(2).at(0));
    EXPECT_NE(CounterRng(1).at(0), CounterRng(2).at(0));
    double mean = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = a.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        mean += u / 100000;
    }
    EXPECT_NEAR(mean, 0.5, 0.005);
}

TEST(Weights, DirichletMarginalsAndFloor) {
    CounterRng rng(5);
    double mean_pi0 = 0.0;
    const int draws = 4000;
    for (int d = 0; d < draws; ++d) {
        const auto w = draw_weights(1, 1e-9, FloorRule::resample, rng);
        mean_pi0 += w[0] / draws;
    }
    EXPECT_NEAR(mean_pi0, 0.8, 0.01);

    for (int q : {2, 4, 8}) {
        const auto w = draw_weights(q, 0.03, FloorRule::boost, rng);
        EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
        EXPECT_GE(w.back(), 0.03 - 1e-15);
    }
    const auto w = draw_weights(2, 0.03, FloorRule::resample, rng);
    EXPECT_GE(w.back(), 0.03);
}

TEST(Weights, ResampleFailsWhenInfeasible) {
    CounterRng rng(1);
    EXPECT_THROW(draw_weights(8, 0.03, FloorRule::resample, rng), GenerationFailure);
    EXPECT_THROW(draw_weights(2, 1.0, FloorRule::boost, rng), InvalidArgument);
}

TEST(Generate, ReproducibleAndShapedAsRequested) {
    ScenarioSpec spec;
    spec.n = 1000;
    spec.num_tests = 3;
    CounterRng r1(9), r2(9);
    const auto a = generate(spec, r1);
    const auto b = generate(spec, r2);
    EXPECT_EQ(a.truth, b.truth);
    EXPECT_TRUE(std::equal(a.pmatrix.values().begin(), a.pmatrix.values().end(), b.pmatrix.values().begin()));
    EXPECT_EQ(a.pmatrix.num_items(), 1000u);
    EXPECT_EQ(a.pmatrix.num_tests(), 3);
}

TEST(Generate, H1ScoresFollowTheShiftedNormal) {
    ScenarioSpec spec;
    spec.n = 200000;
    spec.num_tests = 2;
    spec.effect = 2.0;
    CounterRng rng(17);
    const auto data = generate(spec, rng);
    double s0 = 0, s1 = 0, ss1 = 0;
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < spec.n; ++i) {
        const double x = -oracle::Phi_inv(data.pmatrix(i, 0));
        if (data.truth[i].bit(1)) {
            s1 += x;
            ss1 += x * x;
            ++n1;
        } else {
            s0 += x;
            ++n0;
        }
    }
    const double m1 = s1 / static_cast<double>(n1);
    EXPECT_NEAR(s0 / static_cast<double>(n0), 0.0, 0.01);
    EXPECT_NEAR(m1, 2.0, 0.02);
    EXPECT_NEAR(ss1 / static_cast<double>(n1) - m1 * m1, 1.0, 0.03);
    // Empirical configuration shares follow the drawn weights.
    std::vector<double> share(4, 0.0);
    for (const auto& c : data.truth) share[c.index()] += 1.0 / static_cast<double>(spec.n);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(share[k], data.weights_true[k], 0.005);
}

TEST(Generate, LinearEffectsAndOverride) {
    ScenarioSpec spec;
    spec.num_tests = 4;
    spec.delta = DeltaKind::linear;
    EXPECT_EQ(effect_sizes(spec), (std::vector<double>{2, 3, 4, 5}));
    spec.effect_override = {1, 1, 1, 1};
    EXPECT_EQ(effect_sizes(spec), (std::vector<double>{1, 1, 1, 1}));
    spec.effect_override = {1};
    EXPECT_THROW(spec.validate(), InvalidArgument);
}

TEST(Targets, SetsAndBaselineParameters) {
    EXPECT_EQ(target_set(Target::all_h1, 3).str(), "111");
    EXPECT_EQ(target_set(Target::at_least_qm1, 3).str(), "011,101,110,111");
    EXPECT_EQ(pmax_k(Target::at_least_qm1), 2);
    EXPECT_EQ(intersect_k(Target::at_least_qm1, 8), 7);
}

TEST(Score, CountsAgainstTruth) {
    const std::vector<Configuration> truth{Configuration(2, 3), Configuration(2, 3), Configuration(2, 0),
                                           Configuration(2, 1)};
    const auto c1 = at_least_k(2, 2);
    const auto s = score(Flags{1, 0, 1, 0}, truth, c1);
    EXPECT_EQ(s.true_positives, 1u);
    EXPECT_EQ(s.false_positives, 1u);
    EXPECT_DOUBLE_EQ(s.fdr, 0.5);
    EXPECT_DOUBLE_EQ(s.power, 0.5);
    const auto none = score(Flags{0, 0, 0, 0}, truth, c1);
    EXPECT_EQ(none.fdr, 0.0);
}

TEST(Roc, EndpointsAndMonotone) {
    const std::vector<double> stat{0.9, 0.8, 0.8, 0.1};
    const auto roc = roc_curve(stat, Flags{1, 0, 1, 0});
    ASSERT_GE(roc.size(), 2u);
    EXPECT_EQ(roc.front().fpr, 0.0);
    EXPECT_EQ(roc.front().tpr, 0.0);
    EXPECT_DOUBLE_EQ(roc.back().fpr, 1.0);
    EXPECT_DOUBLE_EQ(roc.back().tpr, 1.0);
    // The tied pair enters as one step.
    EXPECT_DOUBLE_EQ(roc[1].tpr, 0.5);
    EXPECT_DOUBLE_EQ(roc[2].tpr, 1.0);
    EXPECT_DOUBLE_EQ(roc[2].fpr, 0.5);
}

TEST(Benchmark, RunsAreSeededIndependently) {
    ScenarioSpec spec;
    spec.n = 2000;
    spec.num_tests = 2;
    spec.n_runs = 3;
    const auto a = run_benchmark(spec);
    const auto b = run_benchmark(spec);
    ASSERT_EQ(a.runs.size(), 3u);
    EXPECT_EQ(a.failed_runs, 0u);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t m = 0; m < a.runs[r].methods.size(); ++m)
            EXPECT_EQ(a.runs[r].methods[m].score.power, b.runs[r].methods[m].score.power);
    EXPECT_NE(a.runs[0].seed, a.runs[1].seed);
    EXPECT_NE(format_table(std::span(&a, 1)).find("QCH"), std::string::npos);
}

TEST(DependenceDemo, CorrelatedPValues) {
    CounterRng rng(3);
    const auto demo = dependence_demo(20000, rng);
    EXPECT_GT(demo.corr_pvalues, 0.08);
    EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}), 1.0, 1e-15);
}
