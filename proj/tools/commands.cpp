#include "commands.hpp"

#include "qch/baselines.hpp"
#include "qch/error.hpp"
#include "qch/joint_em.hpp"
#include "qch/parallel.hpp"
#include "qch/query.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace qch::cli {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

template <class Write>
void write_output(const std::string& target, Write&& write) {
    if (target == "-") {
        write(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(target);
    if (!out) throw IoError("cannot open '" + target + "' for writing");
    write(out);
    if (!out) throw IoError("failed writing '" + target + "'");
}

std::ofstream open_file(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

// Ranking statistics of the first run of a scenario, written as ROC points.
void write_roc(const std::filesystem::path& path, const BenchCommand& cmd) {
    auto out = open_file(path);
    out << "n\tQ\tmethod\tfpr\ttpr\n";
    for (std::size_t n : cmd.sizes)
        for (int q : cmd.tests) {
            ScenarioSpec spec = cmd.scenario;
            spec.n = n;
            spec.num_tests = q;
            spec.validate();
            CounterRng rng(run_seed(spec.seed, 0));
            const auto data = generate(spec, rng);
            const auto c1 = target_set(spec.target, q);
            Flags positive(n);
            for (std::size_t i = 0; i < n; ++i) positive[i] = c1.contains(data.truth[i]);
            for (Method m : cmd.options.methods) {
                std::vector<double> stat(n);
                if (m == Method::qch) {
                    FitOptions fo;
                    fo.threads = cmd.options.threads;
                    stat = compute_tau(fit_joint(data.pmatrix, fo).joint, c1);
                } else {
                    const auto r = m == Method::pmax
                                       ? pmax_procedure(data.pmatrix, cmd.options.alpha, pmax_k(spec.target))
                                       : intersect_fdr(data.pmatrix, cmd.options.alpha,
                                                       intersect_k(spec.target, q));
                    for (std::size_t i = 0; i < n; ++i) stat[i] = -r.statistic[i];
                }
                for (const auto& pt : roc_curve(stat, positive))
                    out << n << '\t' << q << '\t' << to_string(m) << '\t' << format_double(pt.fpr) << '\t'
                        << format_double(pt.tpr) << '\n';
            }
        }
}

} // namespace

void run_fit(const FitCommand& cmd, std::ostream& log) {
    const auto start = clock_type::now();
    const auto pvalues = read_pvalue_matrix(cmd.input);
    FitOptions options;
    options.lambda = cmd.lambda;
    options.threads = cmd.threads;
    options.uniform_init = cmd.uniform_init;
    options.em.store_posteriors = cmd.save_posteriors;
    const auto model = fit_joint(pvalues, options);

    const auto input = std::filesystem::absolute(cmd.input).lexically_normal();
    const auto archive = make_archive(model, pvalues, cmd.lambda, input.string(), file_checksum(cmd.input));
    write_archive(cmd.out, archive, cmd.format, cmd.save_posteriors);

    log << "fit " << pvalues.num_items() << " items x " << pvalues.num_tests() << " tests: EM "
        << (model.joint.converged ? "converged" : "did not converge") << " after " << model.joint.n_iter
        << " iterations, loglik " << format_double(model.joint.loglik_trace.back()) << ", "
        << format_double(seconds_since(start)) << " s\n";
    for (std::size_t q = 0; q < model.marginals.size(); ++q) {
        const auto& m = model.marginals[q];
        if (!m.converged)
            log << "warning: marginal fit of test " << q + 1 << " stopped after " << m.iterations
                << " iterations without converging\n";
    }
}

void run_query(const QueryCommand& cmd, std::ostream& log) {
    auto archive = read_archive(cmd.fit);
    const auto c1 = parse_config_set(archive.num_tests, cmd.c1);
    validate_query(c1, archive.num_tests);

    if (archive.joint.posteriors.empty() || cmd.input) {
        const std::filesystem::path input = cmd.input ? *cmd.input : std::filesystem::path(archive.input_path);
        if (input.empty()) throw InvalidArgument("archive has no posteriors and no input path; pass --input");
        if (file_checksum(input) != archive.input_checksum)
            throw InvalidData("input '" + input.string() + "' does not match the checksum recorded in the fit");
        archive.joint.posteriors = recompute_posteriors(archive, read_pvalue_matrix(input), cmd.threads);
    }

    const auto result = qch::run_query(archive.joint, c1, cmd.alpha);
    write_output(cmd.out, [&](std::ostream& os) { write_query_tsv(os, archive.item_ids, result); });
    log << "rejected " << result.num_rejected << " of " << archive.num_items << " at alpha "
        << format_double(cmd.alpha) << ", threshold " << format_double(result.threshold) << '\n';
}

void run_simulate(const SimulateCommand& cmd, std::ostream& log) {
    const auto& spec = cmd.scenario;
    spec.validate();
    CounterRng rng(spec.seed);
    const auto data = generate(spec, rng);
    std::filesystem::create_directories(cmd.out);

    std::vector<std::string> names;
    for (int q = 1; q <= spec.num_tests; ++q) names.push_back("p" + std::to_string(q));
    write_pvalue_matrix(cmd.out / "pvalues.tsv", data.pmatrix, names);
    {
        auto out = open_file(cmd.out / "truth.tsv");
        write_truth_tsv(out, data.pmatrix.item_ids(), data.truth);
    }
    {
        auto out = open_file(cmd.out / "weights.tsv");
        out << "config\tweight\n";
        for (const auto& c : enumerate_configs(spec.num_tests))
            out << c.str() << '\t' << format_double(data.weights_true[c.index()]) << '\n';
    }
    const auto positives = target_set(spec.target, spec.num_tests);
    std::size_t n_pos = 0;
    for (const auto& c : data.truth) n_pos += positives.contains(c);
    log << "simulated " << spec.n << " items x " << spec.num_tests << " tests (" << to_string(spec.delta)
        << "), " << n_pos << " in the " << to_string(spec.target) << " target set\n";
}

void run_bench(const BenchCommand& cmd, std::ostream& log) {
    std::vector<ScoreReport> reports;
    for (std::size_t n : cmd.sizes)
        for (int q : cmd.tests) {
            ScenarioSpec spec = cmd.scenario;
            spec.n = n;
            spec.num_tests = q;
            reports.push_back(run_benchmark(spec, cmd.options));
            for (const auto& run : reports.back().runs)
                if (!run.ok) log << "warning: n=" << n << " Q=" << q << " run " << run.run << " failed: " << run.error << '\n';
        }
    log << format_table(reports);
    if (cmd.tsv) {
        auto out = open_file(*cmd.tsv);
        out << format_tsv(reports);
    }
    if (cmd.roc) write_roc(*cmd.roc, cmd);
}

void run_baseline(const BaselineCommand& cmd, std::ostream& log) {
    const auto pvalues = read_pvalue_matrix(cmd.input);
    int k = cmd.k;
    if (k == 0) k = cmd.method == Method::pmax ? 1 : pvalues.num_tests();
    const auto result = cmd.method == Method::pmax ? pmax_procedure(pvalues, cmd.alpha, k)
                                                   : intersect_fdr(pvalues, cmd.alpha, k);
    write_output(cmd.out, [&](std::ostream& os) { write_baseline_tsv(os, pvalues.item_ids(), result); });
    std::size_t rejected = 0;
    for (auto r : result.rejected) rejected += r;
    log << to_string(result.method) << " (k=" << result.k << ") rejected " << rejected << " of "
        << pvalues.num_items() << '\n';
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Composed-hypothesis testing across several p-value sets"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "qch 0.1.0");

    const std::map<std::string, ArchiveFormat> formats{{"json", ArchiveFormat::json}, {"cbor", ArchiveFormat::cbor}};
    const std::map<std::string, DeltaKind> scenarios{{"equal", DeltaKind::equal}, {"linear", DeltaKind::linear}};
    const std::map<std::string, Target> targets{{"all", Target::all_h1}, {"qm1", Target::at_least_qm1}};
    const std::map<std::string, FloorRule> floors{{"boost", FloorRule::boost}, {"resample", FloorRule::resample}};
    const std::map<std::string, Sidedness> sides{{"one", Sidedness::one_sided}, {"two", Sidedness::two_sided}};
    const std::map<std::string, Method> methods{{"pmax", Method::pmax}, {"intersect", Method::intersect}};

    FitCommand fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit the joint mixture model and store it in a directory");
    fit_cmd->add_option("--input", fit.input, "p-value matrix (TSV or CSV with header)")->required();
    fit_cmd->add_option("--out", fit.out, "output directory")->required();
    fit_cmd->add_option("--lambda", fit.lambda, "Storey tuning parameter")->check(CLI::Range(0.0, 1.0, "(0,1)"));
    fit_cmd->add_option("--format", fit.format, "archive format")->transform(CLI::CheckedTransformer(formats));
    fit_cmd->add_flag("--save-posteriors", fit.save_posteriors, "also dump the n x 2^Q posterior matrix");
    fit_cmd->add_flag("--uniform-init", fit.uniform_init, "start EM from uniform weights");
    fit_cmd->add_option("--threads", fit.threads, "worker threads (default: $QCH_THREADS or all cores)");

    QueryCommand query;
    auto* query_cmd = app.add_subcommand("query", "Test a composed hypothesis against a stored fit");
    query_cmd->add_option("--fit", query.fit, "directory written by fit")->required();
    query_cmd->add_option("--c1", query.c1, "alternative set: all, atleast:k, run:r or comma-separated 0/1/* patterns")->required();
    query_cmd->add_option("--alpha", query.alpha, "nominal FDR level")->check(CLI::Range(0.0, 1.0));
    query_cmd->add_option("--out", query.out, "output TSV, - for stdout");
    query_cmd->add_option("--input", query.input, "p-value matrix to recompute posteriors from");
    query_cmd->add_option("--threads", query.threads, "worker threads");

    SimulateCommand sim;
    std::string sim_effects;
    auto add_scenario = [&](CLI::App* cmd, ScenarioSpec& spec, std::string& effects) {
        cmd->add_option("--scenario", spec.delta, "effect pattern")->transform(CLI::CheckedTransformer(scenarios));
        cmd->add_option("--effect", spec.effect, "H1 shift for the equal scenario");
        cmd->add_option("--mu", effects, "comma-separated per-test H1 shifts (overrides --scenario)");
        cmd->add_option("--target", spec.target, "alternative set")->transform(CLI::CheckedTransformer(targets));
        cmd->add_option("--floor", spec.h1_floor, "minimum weight of the all-H1 configuration");
        cmd->add_option("--floor-rule", spec.floor_rule, "how the floor is enforced")
            ->transform(CLI::CheckedTransformer(floors));
        cmd->add_option("--sides", spec.sidedness, "p-value tails")->transform(CLI::CheckedTransformer(sides));
        cmd->add_option("--seed", spec.seed, "random seed");
    };
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a p-value matrix with known configurations");
    add_scenario(sim_cmd, sim.scenario, sim_effects);
    sim_cmd->add_option("--n", sim.scenario.n, "number of items");
    sim_cmd->add_option("--q", sim.scenario.num_tests, "number of tests");
    sim_cmd->add_option("--out", sim.out, "output directory")->required();

    BenchCommand bench;
    bench.sizes = {10000};
    bench.tests = {2, 4, 8};
    std::string bench_effects;
    std::vector<std::string> bench_methods{"pmax", "intersect", "qch"};
    auto* bench_cmd = app.add_subcommand("bench", "Score QCH and the baselines on simulated data");
    add_scenario(bench_cmd, bench.scenario, bench_effects);
    bench_cmd->add_option("--n", bench.sizes, "numbers of items")->delimiter(',');
    bench_cmd->add_option("--q", bench.tests, "numbers of tests")->delimiter(',');
    bench_cmd->add_option("--runs", bench.scenario.n_runs, "runs per setting")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--methods", bench_methods, "subset of qch,pmax,intersect")->delimiter(',');
    bench_cmd->add_option("--alpha", bench.options.alpha, "nominal FDR level")->check(CLI::Range(0.0, 1.0));
    bench_cmd->add_option("--threads", bench.options.threads, "worker threads for the QCH fit");
    bench_cmd->add_option("--tsv", bench.tsv, "also write the summary as TSV");
    bench_cmd->add_option("--roc", bench.roc, "write ROC points of the first run");

    BaselineCommand base;
    std::string base_method = "pmax";
    auto* base_cmd = app.add_subcommand("baseline", "Run Pmax+BH or IntersectFDR on a p-value matrix");
    base_cmd->add_option("--input", base.input, "p-value matrix")->required();
    base_cmd->add_option("--method", base_method, "pmax or intersect")->check(CLI::IsMember({"pmax", "intersect"}));
    base_cmd->add_option("--k", base.k, "order statistic (pmax, default 1) or column count (intersect, default Q)");
    base_cmd->add_option("--alpha", base.alpha, "nominal FDR level")->check(CLI::Range(0.0, 1.0));
    base_cmd->add_option("--out", base.out, "output TSV, - for stdout");

    auto parse_effects = [](const std::string& text, ScenarioSpec& spec) {
        if (text.empty()) return;
        std::stringstream ss(text);
        std::string token;
        spec.effect_override.clear();
        while (std::getline(ss, token, ',')) {
            try {
                std::size_t used = 0;
                spec.effect_override.push_back(std::stod(token, &used));
                if (used != token.size()) throw std::invalid_argument(token);
            } catch (const std::logic_error&) {
                throw InvalidArgument("bad --mu value '" + token + "'");
            }
        }
    };

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ExitCode::usage);
    }

    try {
        if (*fit_cmd) {
            run_fit(fit, err);
        } else if (*query_cmd) {
            run_query(query, err);
        } else if (*sim_cmd) {
            parse_effects(sim_effects, sim.scenario);
            run_simulate(sim, err);
        } else if (*bench_cmd) {
            parse_effects(bench_effects, bench.scenario);
            bench.options.methods.clear();
            for (const auto& m : bench_methods) bench.options.methods.push_back(parse_method(m));
            run_bench(bench, out);
        } else if (*base_cmd) {
            base.method = methods.at(base_method);
            run_baseline(base, err);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::bad_alloc&) {
        err << "error: out of memory\n";
        return static_cast<int>(ExitCode::numeric);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::data);
    }
    return 0;
}

} // namespace qch::cli
