#include "qch/pvalue_matrix.hpp"

#include "qch/config.hpp"
#include "qch/error.hpp"

#include <cmath>
#include <unordered_set>

namespace qch {

PValueMatrix::PValueMatrix(std::vector<std::string> item_ids, int num_tests,
                           std::vector<double> values)
    : item_ids_(std::move(item_ids)), num_tests_(num_tests), values_(std::move(values)) {
    if (num_tests_ < 1 || num_tests_ > kMaxTests)
        throw InvalidArgument("p-value matrix needs between 1 and " + std::to_string(kMaxTests) +
                              " columns, got " + std::to_string(num_tests_));
    const std::size_t n = item_ids_.size();
    if (n < 2) throw InvalidData("p-value matrix needs at least 2 items");
    if (values_.size() != n * static_cast<std::size_t>(num_tests_))
        throw InvalidArgument("p-value matrix has " + std::to_string(values_.size()) +
                              " values, expected " + std::to_string(n) + " x " +
                              std::to_string(num_tests_));
    for (std::size_t k = 0; k < values_.size(); ++k) {
        const double p = values_[k];
        if (!(p >= 0.0 && p <= 1.0)) {
            const std::size_t i = k / static_cast<std::size_t>(num_tests_);
            throw InvalidData("item '" + item_ids_[i] + "' (row " + std::to_string(i + 1) +
                              ") has p-value outside [0,1]");
        }
    }
    std::unordered_set<std::string_view> seen;
    seen.reserve(n);
    for (const auto& id : item_ids_)
        if (!seen.insert(id).second) throw DuplicateId("duplicate item id '" + id + "'");
}

std::vector<double> PValueMatrix::column(int q) const {
    std::vector<double> out(num_items());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*this)(i, q);
    return out;
}

PValueMatrix PValueMatrix::permute_columns(const std::vector<int>& perm) const {
    if (static_cast<int>(perm.size()) != num_tests_)
        throw InvalidArgument("column permutation has wrong length");
    std::vector<double> out(values_.size());
    const std::size_t q_count = static_cast<std::size_t>(num_tests_);
    for (std::size_t i = 0; i < num_items(); ++i)
        for (std::size_t j = 0; j < q_count; ++j)
            out[i * q_count + j] = (*this)(i, perm[j]);
    return PValueMatrix(item_ids_, num_tests_, std::move(out));
}

} // namespace qch
