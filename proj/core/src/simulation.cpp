#include "qch/simulation.hpp"

#include "qch/baselines.hpp"
#include "qch/error.hpp"
#include "qch/joint_em.hpp"
#include "qch/normal.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace qch {

namespace {

// Stream identifiers for CounterRng::split.
enum Stream : std::uint64_t { weights_stream = 1, labels_stream = 2, statistics_stream = 16 };

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string item_id(std::size_t i) { return "item" + std::to_string(i + 1); }

std::vector<std::string> item_ids(std::size_t n) {
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = item_id(i);
    return ids;
}

std::string method_label(Method m) {
    switch (m) {
    case Method::qch: return "QCH";
    case Method::pmax: return "Pmax_BH";
    case Method::intersect: return "IntersectFDR";
    }
    return "?";
}

} // namespace

std::string to_string(DeltaKind d) { return d == DeltaKind::equal ? "equal" : "linear"; }
std::string to_string(Target t) { return t == Target::all_h1 ? "all" : "qm1"; }
std::string to_string(FloorRule f) { return f == FloorRule::resample ? "resample" : "boost"; }
std::string to_string(Method m) {
    switch (m) {
    case Method::qch: return "qch";
    case Method::pmax: return "pmax";
    case Method::intersect: return "intersect";
    }
    return "?";
}

std::string to_string(Sidedness s) { return s == Sidedness::one_sided ? "one" : "two"; }

Sidedness parse_sidedness(const std::string& s) {
    if (s == "one") return Sidedness::one_sided;
    if (s == "two") return Sidedness::two_sided;
    throw InvalidArgument("unknown sidedness '" + s + "' (expected one or two)");
}

DeltaKind parse_delta_kind(const std::string& s) {
    if (s == "equal") return DeltaKind::equal;
    if (s == "linear") return DeltaKind::linear;
    throw InvalidArgument("unknown scenario '" + s + "' (expected equal or linear)");
}

Target parse_target(const std::string& s) {
    if (s == "all") return Target::all_h1;
    if (s == "qm1") return Target::at_least_qm1;
    throw InvalidArgument("unknown target '" + s + "' (expected all or qm1)");
}

FloorRule parse_floor_rule(const std::string& s) {
    if (s == "resample") return FloorRule::resample;
    if (s == "boost") return FloorRule::boost;
    throw InvalidArgument("unknown floor rule '" + s + "' (expected resample or boost)");
}

Method parse_method(const std::string& s) {
    if (s == "qch") return Method::qch;
    if (s == "pmax") return Method::pmax;
    if (s == "intersect") return Method::intersect;
    throw InvalidArgument("unknown method '" + s + "' (expected qch, pmax or intersect)");
}

void ScenarioSpec::validate() const {
    if (n < 10) throw InvalidArgument("scenario needs n >= 10");
    if (num_tests < 2 || num_tests > kMaxTests)
        throw InvalidArgument("scenario needs 2 <= Q <= " + std::to_string(kMaxTests) + ", got " +
                              std::to_string(num_tests));
    if (!(h1_floor > 0.0 && h1_floor < 1.0)) throw InvalidArgument("h1 floor must lie in (0,1)");
    if (n_runs < 1) throw InvalidArgument("scenario needs at least one run");
    if (!effect_override.empty() && effect_override.size() != static_cast<std::size_t>(num_tests))
        throw InvalidArgument("effect override needs one value per test");
    if (!std::isfinite(effect)) throw InvalidArgument("effect size must be finite");
}

std::vector<double> effect_sizes(const ScenarioSpec& spec) {
    if (!spec.effect_override.empty()) return spec.effect_override;
    std::vector<double> mu(static_cast<std::size_t>(spec.num_tests));
    for (int q = 1; q <= spec.num_tests; ++q)
        mu[static_cast<std::size_t>(q - 1)] = spec.delta == DeltaKind::equal ? spec.effect : q + 1.0;
    return mu;
}

ConfigSet target_set(Target target, int num_tests) {
    return target == Target::all_h1 ? at_least_k(num_tests, num_tests)
                                    : at_least_k(num_tests, num_tests - 1);
}

int pmax_k(Target target) { return target == Target::all_h1 ? 1 : 2; }

int intersect_k(Target target, int num_tests) {
    return target == Target::all_h1 ? num_tests : num_tests - 1;
}

std::vector<double> draw_weights(int num_tests, double h1_floor, FloorRule rule, CounterRng& rng) {
    if (num_tests < 1 || num_tests > kMaxTests) throw InvalidArgument("Q out of range");
    if (!(h1_floor >= 0.0 && h1_floor < 1.0)) throw InvalidArgument("h1 floor must lie in [0,1)");

    std::vector<double> pi0(static_cast<std::size_t>(num_tests));
    for (int attempt = 0; attempt < kMaxWeightDraws; ++attempt) {
        for (double& p : pi0) p = boost::math::ibeta_inv(8.0, 2.0, rng.uniform());
        auto w = product_weights(pi0);
        double& top = w.back();
        if (top >= h1_floor) return w;
        if (rule == FloorRule::boost) {
            const double scale = (1.0 - h1_floor) / (1.0 - top);
            for (double& v : w) v *= scale;
            top = h1_floor;
            return w;
        }
    }
    throw GenerationFailure("no weight draw reached the all-H1 floor of " + std::to_string(h1_floor) +
                            " in " + std::to_string(kMaxWeightDraws) + " attempts (Q=" +
                            std::to_string(num_tests) + ")");
}

std::vector<Configuration> draw_configurations(std::size_t n, int num_tests,
                                               std::span<const double> weights, CounterRng rng) {
    std::vector<double> cumulative(weights.size());
    std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
    const double total = cumulative.back();
    std::vector<Configuration> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform() * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const auto k = std::min(static_cast<std::size_t>(it - cumulative.begin()), weights.size() - 1);
        out.emplace_back(num_tests, static_cast<std::uint32_t>(k));
    }
    return out;
}

SimulatedData generate_with_weights(const ScenarioSpec& spec, std::vector<double> weights, CounterRng& rng) {
    spec.validate();
    const int q_count = spec.num_tests;
    if (weights.size() != num_configs(q_count)) throw InvalidArgument("weights do not match Q");
    const auto mu = effect_sizes(spec);
    auto truth = draw_configurations(spec.n, q_count, weights, rng.split(labels_stream));

    const auto q_size = static_cast<std::size_t>(q_count);
    std::vector<double> values(spec.n * q_size);
    for (std::size_t q = 0; q < q_size; ++q) {
        const auto stats = rng.split(statistics_stream + q);
        for (std::size_t i = 0; i < spec.n; ++i) {
            const std::uint64_t bits = stats.at(i);
            const double u = (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
            const double shift = truth[i].bit(static_cast<int>(q) + 1) ? mu[q] : 0.0;
            const double t = shift + normal::quantile(u);
            values[i * q_size + q] = spec.sidedness == Sidedness::one_sided
                                         ? normal::upper_tail(t)
                                         : std::min(1.0, 2.0 * normal::upper_tail(std::abs(t)));
        }
    }
    return SimulatedData{PValueMatrix(item_ids(spec.n), q_count, std::move(values)), std::move(truth),
                         std::move(weights)};
}

SimulatedData generate(const ScenarioSpec& spec, CounterRng& rng) {
    spec.validate();
    auto wrng = rng.split(weights_stream);
    auto weights = draw_weights(spec.num_tests, spec.h1_floor, spec.floor_rule, wrng);
    return generate_with_weights(spec, std::move(weights), rng);
}

Score score(const Flags& rejected, std::span<const Configuration> truth, const ConfigSet& c1) {
    if (rejected.size() != truth.size()) throw InvalidArgument("rejections and truth differ in length");
    Score s;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool positive = c1.contains(truth[i]);
        if (positive) ++s.positives;
        if (rejected[i]) {
            if (positive) ++s.true_positives;
            else ++s.false_positives;
        }
    }
    const auto rejections = s.true_positives + s.false_positives;
    s.fdr = static_cast<double>(s.false_positives) / static_cast<double>(std::max<std::size_t>(1, rejections));
    s.power = static_cast<double>(s.true_positives) / static_cast<double>(std::max<std::size_t>(1, s.positives));
    return s;
}

std::vector<RocPoint> roc_curve(std::span<const double> statistic, const Flags& positive) {
    if (statistic.size() != positive.size()) throw InvalidArgument("statistic and labels differ in length");
    std::vector<std::size_t> order(statistic.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return statistic[a] > statistic[b]; });
    const auto pos_total = static_cast<double>(std::count(positive.begin(), positive.end(), 1));
    const double neg_total = static_cast<double>(positive.size()) - pos_total;

    std::vector<RocPoint> out{{0.0, 0.0}};
    double tp = 0.0, fp = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (positive[order[k]]) tp += 1.0;
        else fp += 1.0;
        const bool boundary = k + 1 == order.size() || statistic[order[k]] > statistic[order[k + 1]];
        if (boundary)
            out.push_back({neg_total > 0 ? fp / neg_total : 0.0, pos_total > 0 ? tp / pos_total : 0.0});
    }
    return out;
}

const MethodSummary* ScoreReport::find(Method m) const {
    for (const auto& s : summaries)
        if (s.method == m) return &s;
    return nullptr;
}

ScoreReport run_benchmark(const ScenarioSpec& spec, const BenchOptions& options) {
    spec.validate();
    const auto c1 = target_set(spec.target, spec.num_tests);
    ScoreReport report;
    report.spec = spec;
    report.alpha = options.alpha;

    using clock = std::chrono::steady_clock;
    auto seconds_since = [](clock::time_point start) {
        return std::chrono::duration<double>(clock::now() - start).count();
    };

    for (int r = 0; r < spec.n_runs; ++r) {
        RunRecord record;
        record.run = r;
        record.seed = run_seed(spec.seed, static_cast<std::uint64_t>(r));
        try {
            CounterRng rng(record.seed);
            const auto data = generate(spec, rng);
            for (Method m : options.methods) {
                const auto start = clock::now();
                Flags rejected;
                switch (m) {
                case Method::qch: {
                    FitOptions fit_options;
                    fit_options.threads = options.threads;
                    const auto model = fit_joint(data.pmatrix, fit_options);
                    rejected = run_query(model.joint, c1, options.alpha).rejected;
                    const auto& trace = model.joint.loglik_trace;
                    for (std::size_t t = 1; t < trace.size(); ++t)
                        record.max_loglik_decrease =
                            std::max(record.max_loglik_decrease, trace[t - 1] - trace[t]);
                    const auto& post = model.joint.posteriors;
                    std::vector<double> row_sum(post.num_items(), 0.0);
                    for (std::size_t k = 0; k < post.num_configs(); ++k) {
                        const auto col = post.column(k);
                        for (std::size_t i = 0; i < row_sum.size(); ++i) row_sum[i] += col[i];
                    }
                    for (double s : row_sum)
                        record.max_row_sum_error = std::max(record.max_row_sum_error, std::abs(s - 1.0));
                    record.em_converged = model.joint.converged;
                    record.em_iterations = model.joint.n_iter;
                    break;
                }
                case Method::pmax:
                    rejected = pmax_procedure(data.pmatrix, options.alpha, pmax_k(spec.target)).rejected;
                    break;
                case Method::intersect:
                    rejected = intersect_fdr(data.pmatrix, options.alpha,
                                             intersect_k(spec.target, spec.num_tests)).rejected;
                    break;
                }
                const double secs = seconds_since(start);
                record.methods.push_back({m, score(rejected, data.truth, c1), secs});
            }
        } catch (const std::exception& e) {
            record.ok = false;
            record.error = e.what();
        }
        report.runs.push_back(std::move(record));
    }

    for (Method m : options.methods) {
        std::vector<double> fdr, power, secs;
        for (const auto& run : report.runs) {
            if (!run.ok) continue;
            for (const auto& mr : run.methods)
                if (mr.method == m) {
                    fdr.push_back(mr.score.fdr);
                    power.push_back(mr.score.power);
                    secs.push_back(mr.seconds);
                }
        }
        report.summaries.push_back({m, mean_of(fdr), sd_of(fdr), mean_of(power), sd_of(power), mean_of(secs)});
    }
    for (const auto& run : report.runs) {
        if (!run.ok) ++report.failed_runs;
        report.max_loglik_decrease = std::max(report.max_loglik_decrease, run.max_loglik_decrease);
        report.max_row_sum_error = std::max(report.max_row_sum_error, run.max_row_sum_error);
    }
    return report;
}

std::string format_table(std::span<const ScoreReport> reports) {
    std::vector<Method> methods;
    for (const auto& r : reports)
        for (const auto& s : r.summaries)
            if (std::find(methods.begin(), methods.end(), s.method) == methods.end())
                methods.push_back(s.method);

    auto cell = [](double mean, double sd) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(3) << mean << " (" << sd << ")";
        return os.str();
    };

    std::ostringstream os;
    os << std::left << std::setw(8) << "NbObs" << std::setw(4) << "Q";
    for (Method m : methods) os << std::setw(32) << method_label(m);
    os << '\n' << std::setw(8) << "" << std::setw(4) << "";
    for (std::size_t k = 0; k < methods.size(); ++k) os << std::setw(16) << "FDR" << std::setw(16) << "Power";
    os << '\n';
    for (const auto& r : reports) {
        std::ostringstream nb;
        nb << std::setprecision(0) << std::scientific << static_cast<double>(r.spec.n);
        os << std::setw(8) << nb.str() << std::setw(4) << r.spec.num_tests;
        for (Method m : methods) {
            const auto* s = r.find(m);
            if (s)
                os << std::setw(16) << cell(s->fdr_mean, s->fdr_sd) << std::setw(16)
                   << cell(s->power_mean, s->power_sd);
            else
                os << std::setw(32) << "-";
        }
        os << '\n';
    }
    return os.str();
}

std::string format_tsv(std::span<const ScoreReport> reports) {
    std::ostringstream os;
    os << std::setprecision(6);
    os << "scenario\ttarget\tn\tQ\truns\tfailed\tmethod\tfdr_mean\tfdr_sd\tpower_mean\tpower_sd\tseconds_mean\n";
    for (const auto& r : reports)
        for (const auto& s : r.summaries)
            os << to_string(r.spec.delta) << '\t' << to_string(r.spec.target) << '\t' << r.spec.n << '\t'
               << r.spec.num_tests << '\t' << r.spec.n_runs << '\t' << r.failed_runs << '\t'
               << to_string(s.method) << '\t' << s.fdr_mean << '\t' << s.fdr_sd << '\t' << s.power_mean
               << '\t' << s.power_sd << '\t' << s.seconds_mean << '\n';
    return os.str();
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw InvalidArgument("pearson needs two equal-length samples");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

DependenceDemo dependence_demo(std::size_t n, CounterRng& rng, std::span<const double> weights) {
    if (n < 10) throw InvalidArgument("demo needs n >= 10");
    if (weights.size() != 4) throw InvalidArgument("demo needs 4 configuration weights");
    std::vector<double> w(weights.begin(), weights.end());
    auto truth = draw_configurations(n, 2, w, rng.split(labels_stream));

    std::vector<double> values(2 * n);
    for (std::size_t q = 0; q < 2; ++q) {
        const auto draws = rng.split(statistics_stream + q);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = (static_cast<double>(draws.at(i) >> 11) + 0.5) * 0x1.0p-53;
            // Beta(1, 20) by inversion: 1 - u^{1/20}.
            values[2 * i + q] = truth[i].bit(static_cast<int>(q) + 1) ? -std::expm1(std::log(u) / 20.0) : u;
        }
    }

    DependenceDemo demo{SimulatedData{PValueMatrix(item_ids(n), 2, values), truth, w}};
    std::vector<double> p1(n), p2(n), x1(n), x2(n), z1(n), z2(n);
    for (std::size_t i = 0; i < n; ++i) {
        p1[i] = values[2 * i];
        p2[i] = values[2 * i + 1];
        x1[i] = -normal::quantile(std::clamp(p1[i], 1e-15, 1.0 - 1e-15));
        x2[i] = -normal::quantile(std::clamp(p2[i], 1e-15, 1.0 - 1e-15));
        z1[i] = truth[i].bit(1);
        z2[i] = truth[i].bit(2);
    }
    demo.corr_pvalues = pearson(p1, p2);
    demo.corr_probit = pearson(x1, x2);
    demo.corr_latent = pearson(z1, z2);
    return demo;
}

} // namespace qch
