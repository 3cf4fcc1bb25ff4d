#include "qch/query.hpp"

#include "qch/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <string>

namespace qch {

namespace {

// Stable LSD radix sort on the bit pattern of tau. Non-negative doubles
// order like their bits, so complementing the bits gives descending tau,
// and stability leaves ties in index order.
std::vector<std::size_t> rank_descending(std::span<const double> tau) {
    const std::size_t n = tau.size();
    std::vector<std::uint64_t> key(n), key_tmp(n);
    std::vector<std::size_t> order(n), order_tmp(n);
    for (std::size_t i = 0; i < n; ++i) {
        key[i] = ~std::bit_cast<std::uint64_t>(tau[i]);
        order[i] = i;
    }
    for (int shift = 0; shift < 64; shift += 8) {
        std::array<std::size_t, 257> count{};
        for (auto k : key) ++count[((k >> shift) & 0xff) + 1];
        if (std::any_of(count.begin() + 1, count.end(), [n](std::size_t c) { return c == n; })) continue;
        for (std::size_t b = 1; b < count.size(); ++b) count[b] += count[b - 1];
        for (std::size_t i = 0; i < n; ++i) {
            const auto dst = count[(key[i] >> shift) & 0xff]++;
            key_tmp[dst] = key[i];
            order_tmp[dst] = order[i];
        }
        key.swap(key_tmp);
        order.swap(order_tmp);
    }
    return order;
}

} // namespace

void validate_query(const ConfigSet& c1, int num_tests) {
    if (c1.num_tests() != num_tests)
        throw InvalidQuery("composed hypothesis has Q=" + std::to_string(c1.num_tests()) +
                           " but the fit has Q=" + std::to_string(num_tests));
    if (c1.empty()) throw InvalidQuery("alternative configuration set is empty");
    if (c1.is_full()) throw InvalidQuery("alternative configuration set contains every configuration");
}

std::vector<double> compute_tau(const JointFit& fit, const ConfigSet& c1) {
    validate_query(c1, fit.num_tests);
    if (fit.posteriors.empty()) throw InvalidQuery("fit carries no posterior matrix");
    // Member columns are added in ascending order, one item per lane.
    std::vector<double> tau(fit.num_items(), 0.0);
    for (auto k : c1.indices()) {
        const auto col = fit.posteriors.column(k);
        for (std::size_t i = 0; i < tau.size(); ++i) tau[i] += col[i];
    }
    // + 0.0 turns a clamped -0.0 into +0.0, which the ranking relies on.
    for (double& t : tau) t = std::clamp(t, 0.0, 1.0) + 0.0;
    return tau;
}

FdrCurve fdr_curve(std::span<const double> tau) {
    FdrCurve curve;
    curve.order = rank_descending(tau);
    curve.fdr_at_rank.resize(tau.size());
    double null_mass = 0.0;
    for (std::size_t k = 0; k < tau.size(); ++k) {
        null_mass += 1.0 - tau[curve.order[k]];
        curve.fdr_at_rank[k] = null_mass / static_cast<double>(k + 1);
    }
    return curve;
}

Threshold calibrate_threshold(const FdrCurve& curve, std::span<const double> tau, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0,1]");
    const std::size_t n = curve.order.size();
    if (tau.size() != n || curve.fdr_at_rank.size() != n)
        throw InvalidArgument("ranking and tau vectors differ in length");

    std::size_t keep = 0;
    for (std::size_t k = n; k > 0; --k) {
        const bool boundary = k == n || tau[curve.order[k - 1]] > tau[curve.order[k]];
        if (boundary && curve.fdr_at_rank[k - 1] <= alpha) {
            keep = k;
            break;
        }
    }

    Threshold out;
    out.rejected.assign(n, 0);
    out.num_rejected = keep;
    for (std::size_t k = 0; k < keep; ++k) out.rejected[curve.order[k]] = 1;
    if (keep > 0) out.value = tau[curve.order[keep - 1]];
    return out;
}

std::vector<std::optional<Configuration>> classify_items(const JointFit& fit, const Flags& rejected) {
    if (rejected.size() != fit.num_items()) throw InvalidArgument("rejection flags have the wrong length");
    std::vector<std::optional<Configuration>> labels(rejected.size());
    for (std::size_t i = 0; i < rejected.size(); ++i) {
        if (!rejected[i]) continue;
        labels[i] = Configuration(fit.num_tests, fit.posteriors.mode(i));
    }
    return labels;
}

QueryResult run_query(const JointFit& fit, const ConfigSet& c1, double alpha) {
    QueryResult out;
    out.c1 = c1;
    out.alpha = alpha;
    out.tau = compute_tau(fit, c1);
    auto curve = fdr_curve(out.tau);
    auto threshold = calibrate_threshold(curve, out.tau, alpha);
    out.order = std::move(curve.order);
    out.fdr_at_rank = std::move(curve.fdr_at_rank);
    out.threshold = threshold.value;
    out.num_rejected = threshold.num_rejected;
    out.rejected = std::move(threshold.rejected);
    out.labels = classify_items(fit, out.rejected);
    return out;
}

} // namespace qch
