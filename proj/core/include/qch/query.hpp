#pragma once

#include "qch/config.hpp"
#include "qch/joint_em.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace qch {

using Flags = std::vector<std::uint8_t>;

struct FdrCurve {
    // Item indices sorted by tau descending, ties by index ascending.
    std::vector<std::size_t> order;
    // fdr_at_rank[k]: estimated FDR when rejecting the top k+1 items.
    std::vector<double> fdr_at_rank;
};

struct Threshold {
    // tau of the last rejected item; +infinity when nothing is rejected.
    double value = std::numeric_limits<double>::infinity();
    std::size_t num_rejected = 0;
    Flags rejected;
};

struct QueryResult {
    ConfigSet c1{1};
    double alpha = 0.05;
    std::vector<double> tau;
    std::vector<std::size_t> order;
    std::vector<double> fdr_at_rank;
    double threshold = std::numeric_limits<double>::infinity();
    std::size_t num_rejected = 0;
    Flags rejected;
    // Maximum-posterior configuration of each rejected item.
    std::vector<std::optional<Configuration>> labels;
};

// Checks that c1 is a non-empty proper subset over Q tests.
void validate_query(const ConfigSet& c1, int num_tests);

// tau_i = sum over c in c1 of Pr{Z_i = c | X_i}.
std::vector<double> compute_tau(const JointFit& fit, const ConfigSet& c1);

FdrCurve fdr_curve(std::span<const double> tau);

// Rejects the largest prefix of the ranking, ending at a tie boundary,
// whose estimated FDR is at most alpha.
Threshold calibrate_threshold(const FdrCurve& curve, std::span<const double> tau, double alpha);

std::vector<std::optional<Configuration>> classify_items(const JointFit& fit, const Flags& rejected);

QueryResult run_query(const JointFit& fit, const ConfigSet& c1, double alpha);

} // namespace qch
