#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace qch {

// p-values are clamped to [kPValueClamp, 1 - kPValueClamp] before the probit.
inline constexpr double kPValueClamp = 1e-15;
inline constexpr std::size_t kGridSize = 1024;
// The grid extends this many bandwidths beyond the data range.
inline constexpr double kGridPadding = 4.0;
inline constexpr int kBandwidthCandidates = 32;

// Negative probit scores X = -Phi^{-1}(P).
struct ProbitScores {
    std::vector<double> x;

    std::size_t size() const noexcept { return x.size(); }
};

// A density tabulated on a regular grid; linear interpolation between grid
// points and zero outside the grid.
class GridDensity {
public:
    GridDensity() = default;
    GridDensity(double lo, double step, std::vector<double> values);

    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return lo_ + step_ * static_cast<double>(values_.size() - 1); }
    double step() const noexcept { return step_; }
    std::size_t size() const noexcept { return values_.size(); }
    const std::vector<double>& values() const noexcept { return values_; }
    std::vector<double> abscissae() const;

    double operator()(double x) const noexcept;
    // Trapezoid rule over the grid.
    double integral() const noexcept;

    friend bool operator==(const GridDensity&, const GridDensity&) = default;

private:
    double lo_ = 0.0;
    double step_ = 1.0;
    std::vector<double> values_;
};

struct MarginalFit {
    double pi0 = 1.0;
    double lambda = 0.5;
    double bandwidth = 0.0;
    GridDensity g1;
    std::vector<double> tau;
    int iterations = 0;
    bool converged = false;
};

struct FixedPointOptions {
    double tol = 1e-6;
    int max_iter = 200;
    // Starting posteriors; defaults to 1 - pi0 for every item.
    std::optional<std::vector<double>> initial_tau;
};

ProbitScores probit_transform(std::span<const double> p);

// Storey's estimator min(1, #{p > lambda} / (n (1 - lambda))).
double estimate_pi0(std::span<const double> p, double lambda = 0.5);

// 0.9 min(sd, IQR/1.34) n^{-1/5}; throws DegenerateData on zero variance.
double silverman_bandwidth(std::span<const double> x);

// Candidate bandwidths scanned by select_bandwidth, log-spaced over
// [0.05, 3] times the Silverman reference.
std::vector<double> bandwidth_candidates(double silverman);

// Least-squares cross-validation criterion for a Gaussian kernel,
// evaluated for each candidate on a linearly binned copy of x.
std::vector<double> binned_lscv(std::span<const double> x, std::span<const double> candidates);

// LSCV-minimising bandwidth, or the Silverman reference when the minimum
// sits at either end of the candidate range.
double select_bandwidth(const ProbitScores& scores);

// Fixed point between the tau-weighted Gaussian KDE of the alternative and
// the marginal posteriors tau_i, on a binned grid of kGridSize points.
MarginalFit kde_fixed_point(const ProbitScores& scores, double pi0, double bandwidth,
                            const FixedPointOptions& options = {});

// probit_transform -> estimate_pi0 -> select_bandwidth -> kde_fixed_point.
MarginalFit fit_marginal(std::span<const double> p, double lambda = 0.5,
                         const FixedPointOptions& options = {});
MarginalFit fit_marginal(std::span<const double> p, const ProbitScores& scores, double lambda,
                         const FixedPointOptions& options = {});

} // namespace qch
