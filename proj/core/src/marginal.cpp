#include "qch/marginal.hpp"

#include "qch/error.hpp"
#include "qch/normal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace qch {

namespace {

// Gaussian kernel weights are dropped beyond this many bandwidths.
constexpr double kKernelCutoff = 8.0;

double kernel(double u, double h) noexcept { return normal::pdf(u / h) / h; }

// Position of each sample on a regular grid: x = lo + (index + frac) * step.
struct GridPositions {
    std::vector<std::uint32_t> index;
    std::vector<double> frac;
};

GridPositions locate(std::span<const double> x, double lo, double step, std::size_t grid_size) {
    GridPositions pos;
    pos.index.resize(x.size());
    pos.frac.resize(x.size());
    const auto last = static_cast<double>(grid_size - 1);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double t = std::clamp((x[i] - lo) / step, 0.0, last);
        auto j = static_cast<std::uint32_t>(t);
        if (j >= grid_size - 1) j = static_cast<std::uint32_t>(grid_size - 2);
        pos.index[i] = j;
        pos.frac[i] = t - static_cast<double>(j);
    }
    return pos;
}

// Linear binning of weighted samples.
std::vector<double> bin(const GridPositions& pos, std::span<const double> weights,
                        std::size_t grid_size) {
    std::vector<double> counts(grid_size, 0.0);
    for (std::size_t i = 0; i < pos.index.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        counts[pos.index[i]] += w * (1.0 - pos.frac[i]);
        counts[pos.index[i] + 1] += w * pos.frac[i];
    }
    return counts;
}

// Discrete convolution of binned mass with a Gaussian kernel of width h.
std::vector<double> convolve(const std::vector<double>& counts, double step, double h) {
    const std::size_t g = counts.size();
    const auto reach = static_cast<std::size_t>(
        std::min<double>(static_cast<double>(g - 1), std::ceil(kKernelCutoff * h / step)));
    std::vector<double> k(reach + 1);
    for (std::size_t m = 0; m <= reach; ++m) k[m] = kernel(static_cast<double>(m) * step, h);

    std::vector<double> out(g, 0.0);
    for (std::size_t j = 0; j < g; ++j) {
        const double c = counts[j];
        if (c == 0.0) continue;
        const std::size_t lo = j >= reach ? j - reach : 0;
        const std::size_t hi = std::min(g - 1, j + reach);
        for (std::size_t t = lo; t <= hi; ++t) out[t] += c * k[t > j ? t - j : j - t];
    }
    return out;
}

double interpolate(const std::vector<double>& values, std::uint32_t j, double frac) noexcept {
    return values[j] * (1.0 - frac) + values[j + 1] * frac;
}

double quantile_sorted(const std::vector<double>& sorted, double prob) {
    const double pos = prob * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

} // namespace

GridDensity::GridDensity(double lo, double step, std::vector<double> values)
    : lo_(lo), step_(step), values_(std::move(values)) {
    if (!(step_ > 0.0) || values_.size() < 2)
        throw InvalidArgument("grid density needs a positive step and at least two points");
}

std::vector<double> GridDensity::abscissae() const {
    std::vector<double> out(values_.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = lo_ + step_ * static_cast<double>(k);
    return out;
}

double GridDensity::operator()(double x) const noexcept {
    if (values_.empty()) return 0.0;
    const double t = (x - lo_) / step_;
    const auto last = static_cast<double>(values_.size() - 1);
    if (!(t >= 0.0 && t <= last)) return 0.0;
    auto j = static_cast<std::size_t>(t);
    if (j >= values_.size() - 1) j = values_.size() - 2;
    const double frac = t - static_cast<double>(j);
    return values_[j] * (1.0 - frac) + values_[j + 1] * frac;
}

double GridDensity::integral() const noexcept {
    if (values_.size() < 2) return 0.0;
    double sum = 0.5 * (values_.front() + values_.back());
    for (std::size_t k = 1; k + 1 < values_.size(); ++k) sum += values_[k];
    return sum * step_;
}

ProbitScores probit_transform(std::span<const double> p) {
    ProbitScores out;
    out.x.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double v = p[i];
        if (std::isnan(v)) throw InvalidData("p-value at row " + std::to_string(i + 1) + " is NaN");
        if (v < 0.0 || v > 1.0)
            throw InvalidData("p-value at row " + std::to_string(i + 1) + " is outside [0,1]");
        out.x[i] = -normal::quantile(std::clamp(v, kPValueClamp, 1.0 - kPValueClamp));
    }
    return out;
}

double estimate_pi0(std::span<const double> p, double lambda) {
    if (p.empty()) throw InvalidArgument("cannot estimate pi0 from an empty vector");
    if (!(lambda > 0.0 && lambda < 1.0)) throw InvalidArgument("lambda must be in (0,1)");
    const auto above = std::count_if(p.begin(), p.end(), [lambda](double v) { return v > lambda; });
    const double est = static_cast<double>(above) / (static_cast<double>(p.size()) * (1.0 - lambda));
    return std::min(1.0, est);
}

double silverman_bandwidth(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) throw InvalidArgument("bandwidth selection needs at least two values");
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0)) throw DegenerateData("probit scores have zero variance");

    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

std::vector<double> bandwidth_candidates(double silverman) {
    std::vector<double> out(kBandwidthCandidates);
    const double lo = std::log(0.05 * silverman);
    const double hi = std::log(3.0 * silverman);
    for (int k = 0; k < kBandwidthCandidates; ++k)
        out[static_cast<std::size_t>(k)] =
            std::exp(lo + (hi - lo) * static_cast<double>(k) / (kBandwidthCandidates - 1));
    return out;
}

std::vector<double> binned_lscv(std::span<const double> x, std::span<const double> candidates) {
    const std::size_t n = x.size();
    const auto [min_it, max_it] = std::minmax_element(x.begin(), x.end());
    const double lo = *min_it;
    const double span = *max_it - lo;
    if (!(span > 0.0)) throw DegenerateData("probit scores have zero variance");

    const std::size_t g = kGridSize;
    const double step = span / static_cast<double>(g - 1);
    const auto pos = locate(x, lo, step, g);
    const auto counts = bin(pos, {}, g);

    // Binned self-pair mass at lags 0 and 1, removed from the pair sums below.
    double self0 = 0.0, self1 = 0.0;
    for (double f : pos.frac) {
        self0 += (1.0 - f) * (1.0 - f) + f * f;
        self1 += 2.0 * f * (1.0 - f);
    }

    std::vector<double> lag(g, 0.0);
    for (std::size_t m = 0; m < g; ++m) {
        double acc = 0.0;
        for (std::size_t k = 0; k + m < g; ++k) acc += counts[k] * counts[k + m];
        lag[m] = acc;
    }

    auto cross_pairs = [&](double s) {
        double total = lag[0] * kernel(0.0, s);
        for (std::size_t m = 1; m < g; ++m) {
            const double u = static_cast<double>(m) * step;
            if (u > 10.0 * s) break;
            total += 2.0 * lag[m] * kernel(u, s);
        }
        return total - self0 * kernel(0.0, s) - self1 * kernel(step, s);
    };

    const double nn = static_cast<double>(n);
    std::vector<double> out;
    out.reserve(candidates.size());
    for (double h : candidates) {
        const double s2 = std::numbers::sqrt2 * h;
        const double integral_sq = (cross_pairs(s2) + nn * kernel(0.0, s2)) / (nn * nn);
        const double loo = cross_pairs(h) / (nn * (nn - 1.0));
        out.push_back(integral_sq - 2.0 * loo);
    }
    return out;
}

double select_bandwidth(const ProbitScores& scores) {
    if (scores.size() < 10) throw InvalidArgument("bandwidth selection needs at least 10 values");
    const double reference = silverman_bandwidth(scores.x);
    const auto candidates = bandwidth_candidates(reference);
    const auto criterion = binned_lscv(scores.x, candidates);
    const auto best = static_cast<std::size_t>(
        std::min_element(criterion.begin(), criterion.end()) - criterion.begin());
    if (best == 0 || best + 1 == candidates.size()) return reference;
    return candidates[best];
}

MarginalFit kde_fixed_point(const ProbitScores& scores, double pi0, double bandwidth,
                            const FixedPointOptions& options) {
    const std::size_t n = scores.size();
    if (n == 0) throw InvalidArgument("kde_fixed_point needs at least one score");
    if (!(pi0 >= 0.0 && pi0 <= 1.0)) throw InvalidArgument("pi0 must be in [0,1]");
    if (!(bandwidth > 0.0)) throw InvalidArgument("bandwidth must be positive");
    if (options.max_iter < 1) throw InvalidArgument("max_iter must be positive");

    const auto [min_it, max_it] = std::minmax_element(scores.x.begin(), scores.x.end());
    const double lo = *min_it - kGridPadding * bandwidth;
    const double hi = *max_it + kGridPadding * bandwidth;
    const double step = (hi - lo) / static_cast<double>(kGridSize - 1);
    const auto pos = locate(scores.x, lo, step, kGridSize);

    MarginalFit fit;
    fit.pi0 = pi0;
    fit.bandwidth = bandwidth;

    // Weighted KDE on the grid, renormalised to unit trapezoid mass.
    auto weighted_kde = [&](std::span<const double> weights) {
        auto density = convolve(bin(pos, weights, kGridSize), step, bandwidth);
        GridDensity g(lo, step, std::move(density));
        const double mass = g.integral();
        if (!(mass > 0.0)) throw DegenerateData("alternative density has zero mass");
        auto values = g.values();
        for (double& v : values) v /= mass;
        return GridDensity(lo, step, std::move(values));
    };

    if (pi0 >= 1.0) {
        fit.tau.assign(n, 0.0);
        fit.g1 = GridDensity(lo, step, std::vector<double>(kGridSize, 1.0 / (hi - lo)));
        fit.converged = true;
        return fit;
    }
    if (pi0 <= 0.0) {
        fit.tau.assign(n, 1.0);
        fit.g1 = weighted_kde({});
        fit.iterations = 1;
        fit.converged = true;
        return fit;
    }

    std::vector<double> null_density(n);
    for (std::size_t i = 0; i < n; ++i) null_density[i] = pi0 * normal::pdf(scores.x[i]);

    std::vector<double> tau;
    if (options.initial_tau) {
        tau = *options.initial_tau;
        if (tau.size() != n) throw InvalidArgument("initial tau has the wrong length");
        for (double t : tau)
            if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("initial tau must lie in [0,1]");
    } else {
        tau.assign(n, 1.0 - pi0);
    }

    std::vector<double> next(n);
    for (int iter = 1; iter <= options.max_iter; ++iter) {
        const double total = std::accumulate(tau.begin(), tau.end(), 0.0);
        fit.g1 = total > 0.0 ? weighted_kde(tau) : weighted_kde({});
        const auto& grid = fit.g1.values();

        double delta = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double alt = (1.0 - pi0) * interpolate(grid, pos.index[i], pos.frac[i]);
            const double denom = null_density[i] + alt;
            next[i] = denom > 0.0 ? alt / denom : 0.0;
            delta = std::max(delta, std::abs(next[i] - tau[i]));
        }
        tau.swap(next);
        fit.iterations = iter;
        if (delta < options.tol) {
            fit.converged = true;
            break;
        }
    }
    fit.tau = std::move(tau);
    return fit;
}

MarginalFit fit_marginal(std::span<const double> p, const ProbitScores& scores, double lambda,
                         const FixedPointOptions& options) {
    if (scores.size() != p.size()) throw InvalidArgument("scores and p-values differ in length");
    const double pi0 = estimate_pi0(p, lambda);
    const double h = select_bandwidth(scores);
    auto fit = kde_fixed_point(scores, pi0, h, options);
    fit.lambda = lambda;
    return fit;
}

MarginalFit fit_marginal(std::span<const double> p, double lambda, const FixedPointOptions& options) {
    return fit_marginal(p, probit_transform(p), lambda, options);
}

} // namespace qch
