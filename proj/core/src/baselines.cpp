#include "qch/baselines.hpp"

#include "qch/error.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace qch {

namespace {

void check_alpha(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0,1]");
}

Flags at_most(std::span<const double> values, double alpha) {
    Flags out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] <= alpha ? 1 : 0;
    return out;
}

} // namespace

std::string to_string(BaselineMethod m) {
    return m == BaselineMethod::pmax ? "pmax" : "intersect";
}

std::vector<double> bh_adjust(std::span<const double> p) {
    const std::size_t n = p.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

    std::vector<double> adjusted(n);
    double running = 1.0;
    for (std::size_t r = n; r > 0; --r) {
        const std::size_t i = order[r - 1];
        const double v = static_cast<double>(n) * p[i] / static_cast<double>(r);
        running = std::min(running, std::min(1.0, v));
        adjusted[i] = running;
    }
    return adjusted;
}

BaselineResult pmax_procedure(const PValueMatrix& pm, double alpha, int k) {
    check_alpha(alpha);
    const int q_count = pm.num_tests();
    if (k < 1 || k > q_count)
        throw InvalidArgument("k must be in [1, Q] for the Pmax procedure, got " + std::to_string(k));

    BaselineResult out;
    out.method = BaselineMethod::pmax;
    out.k = k;
    out.statistic.resize(pm.num_items());
    std::vector<double> row(static_cast<std::size_t>(q_count));
    for (std::size_t i = 0; i < pm.num_items(); ++i) {
        const auto r = pm.row(i);
        std::copy(r.begin(), r.end(), row.begin());
        std::nth_element(row.begin(), row.begin() + (k - 1), row.end(), std::greater<>());
        out.statistic[i] = row[static_cast<std::size_t>(k - 1)];
    }
    out.adjusted = bh_adjust(out.statistic);
    out.rejected = at_most(out.adjusted, alpha);
    return out;
}

BaselineResult intersect_fdr(const PValueMatrix& pm, double alpha, int k) {
    check_alpha(alpha);
    const int q_count = pm.num_tests();
    if (k != q_count && !(k == q_count - 1 && k >= 1))
        throw InvalidArgument("IntersectFDR supports k = Q or k = Q-1, got " + std::to_string(k));

    const std::size_t n = pm.num_items();
    std::vector<std::vector<double>> per_column;
    per_column.reserve(static_cast<std::size_t>(q_count));
    for (int q = 0; q < q_count; ++q) per_column.push_back(bh_adjust(pm.column(q)));

    BaselineResult out;
    out.method = BaselineMethod::intersect;
    out.k = k;
    out.statistic.resize(n);
    std::vector<double> row(static_cast<std::size_t>(q_count));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t q = 0; q < row.size(); ++q) row[q] = per_column[q][i];
        std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
        out.statistic[i] = row[static_cast<std::size_t>(k - 1)];
    }
    out.adjusted = out.statistic;
    out.rejected = at_most(out.statistic, alpha);
    return out;
}

} // namespace qch
