#include "qch/joint_em.hpp"

#include "qch/error.hpp"
#include "qch/normal.hpp"
#include "qch/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace qch {

namespace {

// Per item and test, exp(log f_{q,b} - max_b log f_{q,b}), plus the sum of
// the removed maxima. Products of these factors are gamma^c up to the
// per-row shift, so the E-step is a log-sum-exp evaluated without calling
// exp in the inner loop.
struct ScaledFactors {
    int num_tests = 0;
    std::vector<double> factor;
    std::vector<double> shift;
};

ScaledFactors scale_factors(const ComponentLogDensities& logdens, int threads) {
    const std::size_t n = logdens.num_items();
    const int q_count = logdens.num_tests();
    ScaledFactors out;
    out.num_tests = q_count;
    out.factor.resize(n * static_cast<std::size_t>(q_count) * 2);
    out.shift.resize(n);
    parallel_chunks(n, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            double shift = 0.0;
            double* f = out.factor.data() + i * static_cast<std::size_t>(q_count) * 2;
            for (int q = 0; q < q_count; ++q) {
                const double a = logdens(i, q, 0);
                const double b = logdens(i, q, 1);
                const double m = std::max(a, b);
                f[2 * q] = std::exp(a - m);
                f[2 * q + 1] = std::exp(b - m);
                shift += m;
            }
            out.shift[i] = shift;
        }
    });
    return out;
}

// gamma[k] = prod_q f[q][c_q(k)] in canonical order (test 1 most significant).
void expand_products(const double* f, int num_tests, double* gamma) {
    gamma[0] = 1.0;
    std::size_t size = 1;
    for (int q = 0; q < num_tests; ++q) {
        const double f0 = f[2 * q];
        const double f1 = f[2 * q + 1];
        for (std::size_t j = size; j-- > 0;) {
            const double g = gamma[j];
            gamma[2 * j + 1] = g * f1;
            gamma[2 * j] = g * f0;
        }
        size *= 2;
    }
}

struct EStepSums {
    double loglik = 0.0;
    std::vector<double> posterior_sums;
};

// Rows whose scaled mixture underflows are recomputed directly in log space.
double log_space_row(const ComponentLogDensities& logdens, std::size_t i,
                     std::span<const double> weights, double* post) {
    const int q_count = logdens.num_tests();
    const std::size_t k_count = weights.size();
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < k_count; ++k) {
        double lt = weights[k] > 0.0 ? std::log(weights[k]) : -std::numeric_limits<double>::infinity();
        for (int q = 0; q < q_count; ++q) lt += logdens(i, q, static_cast<int>((k >> (q_count - 1 - q)) & 1u));
        post[k] = lt;
        top = std::max(top, lt);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
        post[k] = std::exp(post[k] - top);
        sum += post[k];
    }
    for (std::size_t k = 0; k < k_count; ++k) post[k] /= sum;
    return top + std::log(sum);
}

EStepSums e_step(const ComponentLogDensities& logdens, const ScaledFactors& scaled,
                 std::span<const double> weights, int threads, PosteriorMatrix* store) {
    const std::size_t n = logdens.num_items();
    const std::size_t k_count = weights.size();
    const int q_count = scaled.num_tests;
    const std::size_t chunks = num_chunks(n);

    std::vector<double> chunk_loglik(chunks, 0.0);
    std::vector<std::vector<double>> chunk_sums(chunks);

    parallel_chunks(n, threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
        // Rows are stored a block at a time so the column writes stay contiguous.
        constexpr std::size_t block_rows = 64;
        std::vector<double> gamma(k_count), sums(k_count, 0.0);
        std::vector<double> block(store ? block_rows * k_count : k_count);
        double loglik = 0.0;
        std::size_t block_first = begin;
        for (std::size_t i = begin; i < end; ++i) {
            double* term = store ? block.data() + (i - block_first) * k_count : block.data();
            expand_products(scaled.factor.data() + i * static_cast<std::size_t>(q_count) * 2, q_count,
                            gamma.data());
            double total = 0.0;
            for (std::size_t k = 0; k < k_count; ++k) {
                term[k] = weights[k] * gamma[k];
                total += term[k];
            }
            if (total > 0.0 && std::isfinite(total)) {
                const double inv = 1.0 / total;
                for (std::size_t k = 0; k < k_count; ++k) term[k] *= inv;
                loglik += scaled.shift[i] + std::log(total);
            } else {
                loglik += log_space_row(logdens, i, weights, term);
            }
            for (std::size_t k = 0; k < k_count; ++k) sums[k] += term[k];
            if (store && (i + 1 - block_first == block_rows || i + 1 == end)) {
                store->assign_rows(block_first, i + 1 - block_first, block.data());
                block_first = i + 1;
            }
        }
        chunk_loglik[c] = loglik;
        chunk_sums[c] = std::move(sums);
    });

    EStepSums out;
    out.posterior_sums.assign(k_count, 0.0);
    for (std::size_t c = 0; c < chunks; ++c) {
        out.loglik += chunk_loglik[c];
        for (std::size_t k = 0; k < k_count; ++k) out.posterior_sums[k] += chunk_sums[c][k];
    }
    return out;
}

} // namespace

ComponentLogDensities::ComponentLogDensities(std::size_t num_items, int num_tests)
    : num_items_(num_items), num_tests_(num_tests),
      data_(num_items * static_cast<std::size_t>(num_tests) * 2, 0.0) {
    if (num_tests < 1 || num_tests > kMaxTests)
        throw InvalidArgument("number of tests out of range: " + std::to_string(num_tests));
}

double ComponentLogDensities::log_gamma(std::size_t i, const Configuration& c) const noexcept {
    double total = 0.0;
    for (int q = 1; q <= num_tests_; ++q) total += (*this)(i, q - 1, c.bit(q));
    return total;
}

PosteriorMatrix::PosteriorMatrix(std::size_t num_items, std::size_t num_configs)
    : num_items_(num_items), num_configs_(num_configs), values_(num_items * num_configs, 0.0),
      modes_(num_items, 0) {}

PosteriorMatrix::PosteriorMatrix(std::size_t num_items, std::size_t num_configs, const std::vector<double>& values)
    : PosteriorMatrix(num_items, num_configs) {
    if (values.size() != num_items * num_configs)
        throw InvalidArgument("posterior matrix has the wrong number of values");
    assign_rows(0, num_items, values.data());
}

std::vector<double> PosteriorMatrix::row(std::size_t i) const {
    std::vector<double> out(num_configs_);
    copy_rows(i, 1, out.data());
    return out;
}

void PosteriorMatrix::assign_rows(std::size_t first, std::size_t count, const double* block) {
    for (std::size_t b = 0; b < count; ++b) {
        const double* r = block + b * num_configs_;
        modes_[first + b] = static_cast<std::uint32_t>(std::max_element(r, r + num_configs_) - r);
    }
    for (std::size_t k = 0; k < num_configs_; ++k) {
        double* col = values_.data() + k * num_items_ + first;
        for (std::size_t b = 0; b < count; ++b) col[b] = block[b * num_configs_ + k];
    }
}

void PosteriorMatrix::copy_rows(std::size_t first, std::size_t count, double* block) const {
    for (std::size_t k = 0; k < num_configs_; ++k) {
        const double* col = values_.data() + k * num_items_ + first;
        for (std::size_t b = 0; b < count; ++b) block[b * num_configs_ + k] = col[b];
    }
}

std::vector<double> product_weights(std::span<const double> pi0) {
    const int q_count = static_cast<int>(pi0.size());
    std::vector<double> w(num_configs(q_count));
    for (std::size_t k = 0; k < w.size(); ++k) {
        double v = 1.0;
        for (int q = 0; q < q_count; ++q) {
            const bool alt = (k >> (q_count - 1 - q)) & 1u;
            v *= alt ? 1.0 - pi0[static_cast<std::size_t>(q)] : pi0[static_cast<std::size_t>(q)];
        }
        w[k] = v;
    }
    return w;
}

std::vector<double> EmInit::resolve(int num_tests) const {
    const std::size_t k_count = num_configs(num_tests);
    std::vector<double> w;
    switch (kind_) {
    case Kind::uniform:
        w.assign(k_count, 1.0 / static_cast<double>(k_count));
        break;
    case Kind::product:
        if (values_.size() != static_cast<std::size_t>(num_tests))
            throw InvalidArgument("product initialisation needs one pi0 per test");
        for (double p : values_)
            if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("pi0 must lie in [0,1]");
        w = product_weights(values_);
        break;
    case Kind::explicit_weights:
        w = values_;
        if (w.size() != k_count)
            throw InvalidArgument("initial weights need " + std::to_string(k_count) + " entries");
        break;
    }
    double total = 0.0;
    for (double v : w) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("initial weights must be non-negative");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-8) throw InvalidArgument("initial weights must sum to 1");
    for (double& v : w) v /= total;
    return w;
}

ComponentLogDensities build_component_densities(std::span<const MarginalFit> marginals,
                                                std::span<const ProbitScores> scores) {
    if (marginals.empty() || marginals.size() != scores.size())
        throw InvalidArgument("need one marginal fit per score column");
    const std::size_t n = scores[0].size();
    for (const auto& s : scores)
        if (s.size() != n) throw InvalidArgument("score columns differ in length");

    const int q_count = static_cast<int>(marginals.size());
    ComponentLogDensities out(n, q_count);
    const double log_floor = std::log(kDensityFloor);
    for (int q = 0; q < q_count; ++q) {
        const auto& g1 = marginals[static_cast<std::size_t>(q)].g1;
        const auto& x = scores[static_cast<std::size_t>(q)].x;
        for (std::size_t i = 0; i < n; ++i) {
            out(i, q, 0) = std::max(normal::log_pdf(x[i]), log_floor);
            const double g = g1(x[i]);
            out(i, q, 1) = g > kDensityFloor ? std::log(g) : log_floor;
        }
    }
    return out;
}

EStepResult compute_posteriors(const ComponentLogDensities& logdens, std::span<const double> weights,
                               int threads) {
    if (weights.size() != num_configs(logdens.num_tests()))
        throw InvalidArgument("weight vector does not match the number of configurations");
    const auto scaled = scale_factors(logdens, threads);
    EStepResult out;
    out.posteriors = PosteriorMatrix(logdens.num_items(), weights.size());
    out.loglik = e_step(logdens, scaled, weights, threads, &out.posteriors).loglik;
    return out;
}

JointFit em_fit(const ComponentLogDensities& logdens, const EmInit& init, const EmOptions& options) {
    if (options.max_iter < 0) throw InvalidArgument("max_iter must be non-negative");
    if (!(options.tol >= 0.0)) throw InvalidArgument("tol must be non-negative");
    const std::size_t n = logdens.num_items();
    if (n == 0) throw InvalidArgument("em_fit needs at least one item");

    JointFit fit;
    fit.num_tests = logdens.num_tests();
    std::vector<double> w = init.resolve(fit.num_tests);
    const auto scaled = scale_factors(logdens, options.threads);

    bool current_evaluated = false;
    for (int iter = 0; iter <= options.max_iter; ++iter) {
        const auto sums = e_step(logdens, scaled, w, options.threads, nullptr);
        fit.loglik_trace.push_back(sums.loglik);
        current_evaluated = true;
        const auto t = fit.loglik_trace.size();
        if (t > 1) {
            const double prev = fit.loglik_trace[t - 2];
            if (std::abs(sums.loglik - prev) <= options.tol * std::abs(prev)) {
                fit.converged = true;
                break;
            }
        }
        if (iter == options.max_iter) break;

        double total = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            w[k] = sums.posterior_sums[k] / static_cast<double>(n);
            total += w[k];
        }
        for (double& v : w) v /= total;
        ++fit.n_iter;
        current_evaluated = false;
    }

    PosteriorMatrix* store = nullptr;
    if (options.store_posteriors) {
        fit.posteriors = PosteriorMatrix(n, w.size());
        store = &fit.posteriors;
    }
    if (store || !current_evaluated) {
        const auto final_pass = e_step(logdens, scaled, w, options.threads, store);
        if (!current_evaluated) fit.loglik_trace.push_back(final_pass.loglik);
    }
    fit.weights = std::move(w);
    return fit;
}

std::vector<ProbitScores> probit_columns(const PValueMatrix& pvalues, int threads) {
    std::vector<ProbitScores> out(static_cast<std::size_t>(pvalues.num_tests()));
    parallel_tasks(out.size(), threads, [&](std::size_t q) {
        out[q] = probit_transform(pvalues.column(static_cast<int>(q)));
    });
    return out;
}

JointModel fit_joint(const PValueMatrix& pvalues, const FitOptions& options) {
    const auto q_count = static_cast<std::size_t>(pvalues.num_tests());
    const auto scores = probit_columns(pvalues, options.threads);

    JointModel model;
    model.marginals.resize(q_count);
    parallel_tasks(q_count, options.threads, [&](std::size_t q) {
        const auto p = pvalues.column(static_cast<int>(q));
        model.marginals[q] = fit_marginal(p, scores[q], options.lambda, options.fixed_point);
    });

    const auto logdens = build_component_densities(model.marginals, scores);
    std::vector<double> pi0;
    for (const auto& m : model.marginals) pi0.push_back(m.pi0);
    auto em = options.em;
    if (em.threads == 0) em.threads = options.threads;
    model.joint = em_fit(logdens, options.uniform_init ? EmInit::uniform() : EmInit::product(pi0), em);
    return model;
}

} // namespace qch
