#pragma once

#include "qch/config.hpp"
#include "qch/marginal.hpp"
#include "qch/pvalue_matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace qch {

// Component densities are floored here before taking logs.
inline constexpr double kDensityFloor = 1e-300;

// log f_{q,b}(X_i^q) for b = 0 (standard normal null) and b = 1 (fitted
// alternative), laid out item-major as [i][q][b].
class ComponentLogDensities {
public:
    ComponentLogDensities(std::size_t num_items, int num_tests);

    std::size_t num_items() const noexcept { return num_items_; }
    int num_tests() const noexcept { return num_tests_; }

    double& operator()(std::size_t i, int q, int b) noexcept { return data_[offset(i, q, b)]; }
    double operator()(std::size_t i, int q, int b) const noexcept { return data_[offset(i, q, b)]; }

    // log gamma^c(X_i) = sum_q log f_{q, c_q}(X_i^q).
    double log_gamma(std::size_t i, const Configuration& c) const noexcept;

private:
    std::size_t offset(std::size_t i, int q, int b) const noexcept {
        return (i * static_cast<std::size_t>(num_tests_) + static_cast<std::size_t>(q)) * 2 +
               static_cast<std::size_t>(b);
    }

    std::size_t num_items_;
    int num_tests_;
    std::vector<double> data_;
};

// Dense n x 2^Q matrix of posterior configuration probabilities, stored one
// configuration per column so that a query reads only its member columns.
// The most probable configuration of each item is kept alongside.
class PosteriorMatrix {
public:
    PosteriorMatrix() = default;
    PosteriorMatrix(std::size_t num_items, std::size_t num_configs);
    // values are row-major, one item per row.
    PosteriorMatrix(std::size_t num_items, std::size_t num_configs, const std::vector<double>& values);

    std::size_t num_items() const noexcept { return num_items_; }
    std::size_t num_configs() const noexcept { return num_configs_; }
    bool empty() const noexcept { return values_.empty(); }

    double operator()(std::size_t i, std::size_t k) const noexcept { return values_[k * num_items_ + i]; }
    std::span<const double> column(std::size_t k) const noexcept {
        return {values_.data() + k * num_items_, num_items_};
    }
    std::vector<double> row(std::size_t i) const;
    // Index of the largest entry of row i, the lowest one on ties.
    std::uint32_t mode(std::size_t i) const noexcept { return modes_[i]; }

    // Overwrites rows [first, first + count) from a row-major block.
    void assign_rows(std::size_t first, std::size_t count, const double* block);
    // Copies rows [first, first + count) into a row-major block.
    void copy_rows(std::size_t first, std::size_t count, double* block) const;

    friend bool operator==(const PosteriorMatrix&, const PosteriorMatrix&) = default;

private:
    std::size_t num_items_ = 0;
    std::size_t num_configs_ = 0;
    std::vector<double> values_;
    std::vector<std::uint32_t> modes_;
};

struct JointFit {
    int num_tests = 0;
    std::vector<double> weights;
    PosteriorMatrix posteriors;
    // Log-likelihood of every weight vector visited, starting with the init.
    std::vector<double> loglik_trace;
    bool converged = false;
    int n_iter = 0;

    std::size_t num_items() const noexcept { return posteriors.num_items(); }
};

class EmInit {
public:
    enum class Kind { uniform, product, explicit_weights };

    static EmInit uniform() { return EmInit(Kind::uniform, {}); }
    // w_c = prod_q pi0_q^{1-c_q} (1-pi0_q)^{c_q}.
    static EmInit product(std::vector<double> pi0) { return EmInit(Kind::product, std::move(pi0)); }
    static EmInit weights(std::vector<double> w) { return EmInit(Kind::explicit_weights, std::move(w)); }

    Kind kind() const noexcept { return kind_; }
    // Initial weight vector for Q tests; throws InvalidArgument when invalid.
    std::vector<double> resolve(int num_tests) const;

private:
    EmInit(Kind kind, std::vector<double> values) : kind_(kind), values_(std::move(values)) {}

    Kind kind_;
    std::vector<double> values_;
};

struct EmOptions {
    // Stop when |L_t - L_{t-1}| <= tol * |L_{t-1}|.
    double tol = 1e-6;
    int max_iter = 10000;
    int threads = 0;
    bool store_posteriors = true;
};

// Product-form weights from per-test null proportions.
std::vector<double> product_weights(std::span<const double> pi0);

ComponentLogDensities build_component_densities(std::span<const MarginalFit> marginals,
                                                std::span<const ProbitScores> scores);

struct EStepResult {
    PosteriorMatrix posteriors;
    double loglik = 0.0;
};

// One E-step at fixed weights: posteriors and the log-likelihood.
EStepResult compute_posteriors(const ComponentLogDensities& logdens, std::span<const double> weights,
                               int threads = 0);

JointFit em_fit(const ComponentLogDensities& logdens, const EmInit& init, const EmOptions& options = {});

struct FitOptions {
    double lambda = 0.5;
    FixedPointOptions fixed_point;
    EmOptions em;
    // Use the uniform initialisation instead of the product of marginal pi0's.
    bool uniform_init = false;
    int threads = 0;
};

struct JointModel {
    std::vector<MarginalFit> marginals;
    JointFit joint;
};

// Per-column marginal fits followed by EM over the 2^Q configuration weights.
JointModel fit_joint(const PValueMatrix& pvalues, const FitOptions& options = {});

// Probit scores of every column, in column order.
std::vector<ProbitScores> probit_columns(const PValueMatrix& pvalues, int threads = 0);

} // namespace qch
