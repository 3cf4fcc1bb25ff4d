#pragma once

#include "qch/config.hpp"
#include "qch/pvalue_matrix.hpp"
#include "qch/query.hpp"
#include "qch/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qch {

enum class DeltaKind { equal, linear };
enum class Target { all_h1, at_least_qm1 };

// How draw_weights enforces the minimum share of the all-H1 configuration.
// resample: redraw every marginal until the product form meets the floor.
// boost: raise w_{c_max} to the floor and rescale the other weights.
enum class FloorRule { resample, boost };

enum class Method { qch, pmax, intersect };

// one_sided: P = 1 - Phi(T). two_sided: P = 2 (1 - Phi(|T|)).
enum class Sidedness { one_sided, two_sided };

std::string to_string(DeltaKind d);
std::string to_string(Target t);
std::string to_string(FloorRule f);
std::string to_string(Method m);
std::string to_string(Sidedness s);
Sidedness parse_sidedness(const std::string& s);
DeltaKind parse_delta_kind(const std::string& s);
Target parse_target(const std::string& s);
FloorRule parse_floor_rule(const std::string& s);
Method parse_method(const std::string& s);

struct ScenarioSpec {
    std::size_t n = 10000;
    int num_tests = 2;
    DeltaKind delta = DeltaKind::equal;
    // Shift of every H1 statistic for DeltaKind::equal.
    double effect = 2.0;
    // Explicit per-test H1 shifts; overrides delta/effect when non-empty.
    std::vector<double> effect_override;
    double h1_floor = 0.03;
    FloorRule floor_rule = FloorRule::boost;
    Sidedness sidedness = Sidedness::one_sided;
    Target target = Target::all_h1;
    int n_runs = 20;
    std::uint64_t seed = 1;

    void validate() const;
};

// mu_q under H1 for q = 1..Q: effect for Equal, q + 1 for Linear.
std::vector<double> effect_sizes(const ScenarioSpec& spec);

// Alternative set, Pmax order statistic and IntersectFDR column count for a target.
ConfigSet target_set(Target target, int num_tests);
int pmax_k(Target target);
int intersect_k(Target target, int num_tests);

inline constexpr int kMaxWeightDraws = 100000;

// Per test, (pi0, 1 - pi0) ~ Dirichlet(8, 2); weights are the product form,
// then the floor on w_{c_max} is enforced per the rule.
std::vector<double> draw_weights(int num_tests, double h1_floor, FloorRule rule, CounterRng& rng);

struct SimulatedData {
    PValueMatrix pmatrix;
    std::vector<Configuration> truth;
    std::vector<double> weights_true;
};

// Latent configurations drawn from the weights; T_iq ~ N(mu_iq, 1) with
// mu_iq = 0 under H0; p-values from the upper tail (or both tails).
SimulatedData generate(const ScenarioSpec& spec, CounterRng& rng);
SimulatedData generate_with_weights(const ScenarioSpec& spec, std::vector<double> weights, CounterRng& rng);

// Latent configurations sampled i.i.d. from the weights.
std::vector<Configuration> draw_configurations(std::size_t n, int num_tests,
                                               std::span<const double> weights, CounterRng rng);

struct Score {
    double fdr = 0.0;
    double power = 0.0;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t positives = 0;
};

Score score(const Flags& rejected, std::span<const Configuration> truth, const ConfigSet& c1);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

// ROC curve of a ranking statistic (larger = more significant), one point
// per distinct cutoff, starting at (0,0).
std::vector<RocPoint> roc_curve(std::span<const double> statistic, const Flags& positive);

struct MethodRun {
    Method method = Method::qch;
    Score score;
    double seconds = 0.0;
};

struct RunRecord {
    int run = 0;
    std::uint64_t seed = 0;
    bool ok = true;
    std::string error;
    std::vector<MethodRun> methods;
    // EM diagnostics of the QCH fit.
    double max_loglik_decrease = 0.0;
    double max_row_sum_error = 0.0;
    bool em_converged = true;
    int em_iterations = 0;
};

struct MethodSummary {
    Method method = Method::qch;
    double fdr_mean = 0.0;
    double fdr_sd = 0.0;
    double power_mean = 0.0;
    double power_sd = 0.0;
    double seconds_mean = 0.0;
};

struct ScoreReport {
    ScenarioSpec spec;
    double alpha = 0.05;
    std::vector<RunRecord> runs;
    std::vector<MethodSummary> summaries;
    std::size_t failed_runs = 0;
    double max_loglik_decrease = 0.0;
    double max_row_sum_error = 0.0;

    const MethodSummary* find(Method m) const;
};

struct BenchOptions {
    std::vector<Method> methods{Method::pmax, Method::intersect, Method::qch};
    double alpha = 0.05;
    int threads = 0;
};

ScoreReport run_benchmark(const ScenarioSpec& spec, const BenchOptions& options = {});

// Results table: NbObs, Q, then FDR / Power "mean (sd)" per method.
std::string format_table(std::span<const ScoreReport> reports);
// One TSV row per (scenario, method).
std::string format_tsv(std::span<const ScoreReport> reports);

struct DependenceDemo {
    SimulatedData data;
    double corr_pvalues = 0.0;
    double corr_probit = 0.0;
    double corr_latent = 0.0;
};

// Two tests with fixed configuration weights (canonical order 00, 01, 10,
// 11); p-values Uniform under H0 and Beta(1, 20) under H1.
inline constexpr double kDependenceWeights[4] = {0.8, 0.05, 0.05, 0.1};
DependenceDemo dependence_demo(std::size_t n, CounterRng& rng,
                        std::span<const double> weights = kDependenceWeights);

double pearson(std::span<const double> a, std::span<const double> b);

} // namespace qch
