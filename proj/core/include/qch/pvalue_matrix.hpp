#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace qch {

// n x Q matrix of p-values, one row per item. Values are stored row-major.
class PValueMatrix {
public:
    // Validates: n >= 2, values.size() == n*Q, every value in [0,1], ids unique.
    PValueMatrix(std::vector<std::string> item_ids, int num_tests, std::vector<double> values);

    std::size_t num_items() const noexcept { return item_ids_.size(); }
    int num_tests() const noexcept { return num_tests_; }
    const std::vector<std::string>& item_ids() const noexcept { return item_ids_; }

    double operator()(std::size_t i, int q) const noexcept {
        return values_[i * static_cast<std::size_t>(num_tests_) + static_cast<std::size_t>(q)];
    }
    std::span<const double> row(std::size_t i) const noexcept {
        return {values_.data() + i * static_cast<std::size_t>(num_tests_),
                static_cast<std::size_t>(num_tests_)};
    }
    // Copy of column q (0-based).
    std::vector<double> column(int q) const;
    std::span<const double> values() const noexcept { return values_; }

    // Same items with columns reordered: new column j is old column perm[j].
    PValueMatrix permute_columns(const std::vector<int>& perm) const;

private:
    std::vector<std::string> item_ids_;
    int num_tests_;
    std::vector<double> values_;
};

} // namespace qch
