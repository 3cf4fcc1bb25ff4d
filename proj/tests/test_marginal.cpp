#include "oracles.hpp"

#include "qch/error.hpp"
#include "qch/marginal.hpp"
#include "qch/normal.hpp"
#include "qch/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace qch;

namespace {

// Two-group probit scores: N(0,1) nulls and N(mu,1) alternatives.
std::vector<double> mixture_scores(std::size_t n, double pi0, double mu, std::uint64_t seed) {
    CounterRng rng(seed);
    std::vector<double> x(n);
    for (auto& v : x) {
        const bool alt = rng.uniform() > pi0;
        v = normal::quantile(rng.uniform()) + (alt ? mu : 0.0);
    }
    return x;
}

std::vector<double> to_pvalues(const std::vector<double>& x) {
    std::vector<double> p(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) p[i] = normal::upper_tail(x[i]);
    return p;
}

} // namespace

TEST(Normal, QuantileMatchesBisection) {
    for (double p : {1e-300, 1e-15, 1e-8, 0.001, 0.025, 0.3, 0.5, 0.77, 0.975, 0.999}) {
        const double ref = oracle::Phi_inv(p);
        EXPECT_NEAR(normal::quantile(p), ref, 1e-9 * std::max(1.0, std::abs(ref))) << p;
    }
    EXPECT_NEAR(normal::quantile(0.975), 1.959963984540054, 1e-12);
    EXPECT_NEAR(normal::cdf(1.0) + normal::upper_tail(1.0), 1.0, 1e-15);
    EXPECT_NEAR(normal::upper_tail(10.0), 7.619853024160527e-24, 1e-36);
    EXPECT_NEAR(normal::log_pdf(3.0), std::log(oracle::phi(3.0)), 1e-13);
}

TEST(Probit, InvertsTheUpperTail) {
    const std::vector<double> p{0.5, 0.025, 0.975, 1e-20, 0.0, 1.0};
    const auto x = probit_transform(p).x;
    EXPECT_NEAR(x[0], 0.0, 1e-15);
    EXPECT_NEAR(x[1], 1.959963984540054, 1e-12);
    EXPECT_NEAR(x[2], -1.959963984540054, 1e-12);
    // Clamped at 1e-15 on both ends, so the scores stay finite.
    EXPECT_NEAR(x[3], -oracle::Phi_inv(1e-15), 1e-8);
    EXPECT_DOUBLE_EQ(x[4], x[3]);
    // 1 - 1e-15 is only representable to about 1e-16, hence the looser match.
    EXPECT_NEAR(x[5], -x[4], 1e-3);
}

TEST(Probit, RejectsInvalidValues) {
    EXPECT_THROW(probit_transform(std::vector<double>{0.2, std::nan("")}), InvalidData);
    EXPECT_THROW(probit_transform(std::vector<double>{1.5}), InvalidData);
}

TEST(Pi0, StoreyEstimator) {
    // 3 of 8 values above 0.5: 3 / (8 * 0.5).
    const std::vector<double> p{0.01, 0.2, 0.3, 0.4, 0.45, 0.6, 0.7, 0.9};
    EXPECT_DOUBLE_EQ(estimate_pi0(p, 0.5), 0.75);
    EXPECT_DOUBLE_EQ(estimate_pi0(std::vector<double>{0.9, 0.8}, 0.5), 1.0);
    // Values equal to lambda are not counted.
    EXPECT_DOUBLE_EQ(estimate_pi0(std::vector<double>{0.5, 0.51}, 0.5), 1.0);
    EXPECT_THROW(estimate_pi0(p, 1.0), InvalidArgument);
}

TEST(Bandwidth, SilvermanReference) {
    const std::vector<double> x{-2, -1, 0, 1, 2};
    // sd = sqrt(2.5), IQR = 2, min(1.5811, 1.4925) = 1.4925.
    EXPECT_NEAR(silverman_bandwidth(x), 0.9 * (2.0 / 1.34) * std::pow(5.0, -0.2), 1e-12);
    EXPECT_THROW(silverman_bandwidth(std::vector<double>{1, 1, 1}), DegenerateData);
}

TEST(Bandwidth, CandidatesAreLogSpaced) {
    const auto c = bandwidth_candidates(0.4);
    ASSERT_EQ(c.size(), 32u);
    EXPECT_NEAR(c.front(), 0.02, 1e-14);
    EXPECT_NEAR(c.back(), 1.2, 1e-12);
    for (std::size_t k = 2; k < c.size(); ++k) EXPECT_NEAR(c[k] / c[k - 1], c[1] / c[0], 1e-12);
}

TEST(Bandwidth, BinnedLscvTracksExactCriterion) {
    const auto x = mixture_scores(800, 0.8, 3.0, 11);
    const auto cands = bandwidth_candidates(silverman_bandwidth(x));
    const auto binned = binned_lscv(x, cands);
    std::size_t best_exact = 0, best_binned = 0;
    std::vector<double> exact;
    for (double h : cands) exact.push_back(oracle::lscv(x, h));
    for (std::size_t k = 0; k < cands.size(); ++k) {
        // Binning error is of order (step / h)^2; the smallest candidates are
        // within a few grid steps, so the comparison is relative to the scale.
        EXPECT_NEAR(binned[k], exact[k], 2e-3 * std::abs(exact[k]) + 1e-4) << "h=" << cands[k];
        if (exact[k] < exact[best_exact]) best_exact = k;
        if (binned[k] < binned[best_binned]) best_binned = k;
    }
    EXPECT_LE(std::abs(static_cast<long>(best_exact) - static_cast<long>(best_binned)), 1);
}

TEST(Bandwidth, SelectionStaysInRange) {
    const ProbitScores s{mixture_scores(5000, 0.7, 2.5, 3)};
    const double ref = silverman_bandwidth(s.x);
    const double h = select_bandwidth(s);
    EXPECT_GE(h, 0.05 * ref * (1 - 1e-12));
    EXPECT_LE(h, 3.0 * ref * (1 + 1e-12));
    EXPECT_THROW(select_bandwidth(ProbitScores{{1, 2, 3}}), InvalidArgument);
}

TEST(FixedPoint, SmallCaseMatchesDenseOracle) {
    const std::vector<double> x{-1.0, 0.0, 3.0};
    const auto fit = kde_fixed_point(ProbitScores{x}, 2.0 / 3.0, 1.0);
    const auto ref = oracle::dense_fixed_point(x, 2.0 / 3.0, 1.0);
    ASSERT_TRUE(fit.converged);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(fit.tau[i], ref[i], 1e-3);
    EXPECT_NEAR(fit.g1.integral(), 1.0, 1e-12);
}

TEST(FixedPoint, BoundaryPi0) {
    const ProbitScores s{{-1.0, 0.5, 2.0, 4.0}};
    const auto none = kde_fixed_point(s, 1.0, 0.5);
    for (double t : none.tau) EXPECT_EQ(t, 0.0);
    const auto all = kde_fixed_point(s, 0.0, 0.5);
    for (double t : all.tau) EXPECT_EQ(t, 1.0);
    EXPECT_NEAR(all.g1.integral(), 1.0, 1e-12);
    EXPECT_TRUE(all.converged);
}

TEST(FixedPoint, ReportsNonConvergence) {
    const ProbitScores s{mixture_scores(2000, 0.8, 2.0, 5)};
    FixedPointOptions opt;
    opt.max_iter = 2;
    const auto fit = kde_fixed_point(s, 0.8, 0.3, opt);
    EXPECT_FALSE(fit.converged);
    EXPECT_EQ(fit.iterations, 2);
    EXPECT_EQ(fit.tau.size(), 2000u);
}

TEST(FixedPoint, InputValidation) {
    const ProbitScores s{{0.0, 1.0}};
    EXPECT_THROW(kde_fixed_point(s, 1.5, 1.0), InvalidArgument);
    EXPECT_THROW(kde_fixed_point(s, 0.5, 0.0), InvalidArgument);
    FixedPointOptions bad;
    bad.initial_tau = std::vector<double>{0.5};
    EXPECT_THROW(kde_fixed_point(s, 0.5, 1.0, bad), InvalidArgument);
}

TEST(FixedPointProperty, RandomInstancesMatchDenseOracle) {
    CounterRng meta(2024);
    double worst = 0.0;
    for (int inst = 0; inst < 50; ++inst) {
        const std::size_t n = 50 + meta() % 1951;
        const double pi0 = 0.5 + 0.45 * meta.uniform();
        const double mu = 1.5 + 2.5 * meta.uniform();
        const auto x = mixture_scores(n, pi0, mu, meta());
        const auto p = to_pvalues(x);
        const ProbitScores s = probit_transform(p);
        const double est = std::clamp(estimate_pi0(p), 0.05, 0.95);
        const double h = n >= 10 ? select_bandwidth(s) : silverman_bandwidth(s.x);
        FixedPointOptions opt;
        opt.tol = 1e-10;
        opt.max_iter = 5000;
        const auto fit = kde_fixed_point(s, est, h, opt);
        const auto ref = oracle::dense_fixed_point(s.x, est, h);
        double sup = 0.0;
        for (std::size_t i = 0; i < n; ++i) sup = std::max(sup, std::abs(fit.tau[i] - ref[i]));
        worst = std::max(worst, sup);
        EXPECT_LE(sup, 1e-3) << "instance " << inst << " n=" << n << " h=" << h;
    }
    RecordProperty("worst_sup_norm", std::to_string(worst));
}

TEST(FixedPointProperty, InitialisationDoesNotMatter) {
    for (int inst = 0; inst < 5; ++inst) {
        const auto x = mixture_scores(3000, 0.8, 2.5, 100 + inst);
        const auto p = to_pvalues(x);
        const ProbitScores s = probit_transform(p);
        const double pi0 = estimate_pi0(p);
        const double h = select_bandwidth(s);
        CounterRng rng(inst);
        std::vector<double> random_init(x.size());
        for (double& t : random_init) t = rng.uniform();
        std::vector<std::vector<double>> taus;
        for (int k = 0; k < 3; ++k) {
            FixedPointOptions opt;
            opt.max_iter = 2000;
            if (k == 1) opt.initial_tau = random_init;
            if (k == 2) opt.initial_tau = std::vector<double>(x.size(), 0.9);
            const auto fit = kde_fixed_point(s, pi0, h, opt);
            EXPECT_TRUE(fit.converged);
            taus.push_back(fit.tau);
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            EXPECT_NEAR(taus[0][i], taus[1][i], 1e-4);
            EXPECT_NEAR(taus[0][i], taus[2][i], 1e-4);
        }
    }
}

TEST(MarginalFit, RecoversMixture) {
    const auto x = mixture_scores(20000, 0.8, 3.0, 77);
    const auto fit = fit_marginal(to_pvalues(x));
    EXPECT_NEAR(fit.pi0, 0.8, 0.03);
    EXPECT_NEAR(fit.g1.integral(), 1.0, 1e-12);
    // The alternative mass should sit around mu = 3.
    double mean = 0.0;
    const auto grid = fit.g1.abscissae();
    for (std::size_t k = 0; k < grid.size(); ++k) mean += grid[k] * fit.g1.values()[k] * fit.g1.step();
    EXPECT_NEAR(mean, 3.0, 0.5);
    double tau_mean = 0.0;
    for (double t : fit.tau) tau_mean += t / static_cast<double>(fit.tau.size());
    EXPECT_NEAR(tau_mean, 1.0 - fit.pi0, 0.02);
}

TEST(GridDensity, InterpolatesAndIntegrates) {
    const GridDensity g(0.0, 0.5, {0.0, 1.0, 1.0, 0.0});
    EXPECT_DOUBLE_EQ(g(0.25), 0.5);
    EXPECT_DOUBLE_EQ(g(1.0), 1.0);
    EXPECT_DOUBLE_EQ(g(-0.1), 0.0);
    EXPECT_DOUBLE_EQ(g(1.6), 0.0);
    EXPECT_DOUBLE_EQ(g.integral(), 1.0);
    EXPECT_THROW(GridDensity(0.0, 0.0, {1.0, 1.0}), InvalidArgument);
}
