#pragma once

#include "qch/pvalue_matrix.hpp"
#include "qch/query.hpp"

#include <span>
#include <string>
#include <vector>

namespace qch {

enum class BaselineMethod { pmax, intersect };

std::string to_string(BaselineMethod m);

struct BaselineResult {
    BaselineMethod method = BaselineMethod::pmax;
    int k = 1;
    // pmax: k-th largest p-value of each row. intersect: k-th smallest of the
    // per-column BH-adjusted p-values, so rejection in >= k columns is
    // equivalent to statistic <= alpha.
    std::vector<double> statistic;
    std::vector<double> adjusted;
    Flags rejected;
};

// Benjamini-Hochberg adjusted p-values.
std::vector<double> bh_adjust(std::span<const double> p);

// BH on the k-th largest p-value of each row (k = 1 is Pmax).
BaselineResult pmax_procedure(const PValueMatrix& pm, double alpha, int k = 1);

// BH at level alpha within each column; an item is rejected when it is
// rejected in at least k columns. k must be Q or Q-1.
BaselineResult intersect_fdr(const PValueMatrix& pm, double alpha, int k);

} // namespace qch
