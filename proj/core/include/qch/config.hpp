#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace qch {

inline constexpr int kMaxTests = 16;

// One element of {0,1}^Q. Stored as its canonical index: bit (Q-q) of the
// index holds c_q, so test 1 is the most significant bit and "0...0" is
// index 0.
class Configuration {
public:
    Configuration(int num_tests, std::uint32_t index);

    static Configuration from_bits(const std::vector<int>& bits);
    // Parses "0110"; throws InvalidArgument on bad characters.
    static Configuration parse(std::string_view text);

    int num_tests() const noexcept { return num_tests_; }
    std::uint32_t index() const noexcept { return index_; }

    // c_q for q in [1, Q].
    int bit(int q) const noexcept { return static_cast<int>((index_ >> (num_tests_ - q)) & 1u); }
    int count_ones() const noexcept;
    std::vector<int> bits() const;
    std::string str() const;

    friend bool operator==(const Configuration&, const Configuration&) = default;
    friend auto operator<=>(const Configuration&, const Configuration&) = default;

private:
    int num_tests_;
    std::uint32_t index_;
};

std::size_t num_configs(int num_tests);

// All 2^Q configurations in canonical index order.
std::vector<Configuration> enumerate_configs(int num_tests);

// A subset of {0,1}^Q, kept as a membership mask over canonical indices so
// that members are unique and iterate in index order.
class ConfigSet {
public:
    explicit ConfigSet(int num_tests);
    ConfigSet(int num_tests, const std::vector<Configuration>& members);

    static ConfigSet full(int num_tests);

    int num_tests() const noexcept { return num_tests_; }
    std::size_t size() const noexcept { return count_; }
    bool empty() const noexcept { return count_ == 0; }
    bool is_full() const noexcept { return count_ == mask_.size(); }
    bool contains(const Configuration& c) const;
    bool contains(std::uint32_t index) const { return mask_.at(index) != 0; }

    void insert(const Configuration& c);
    std::vector<Configuration> members() const;
    std::vector<std::uint32_t> indices() const;
    // Comma-separated configuration strings in canonical order.
    std::string str() const;

    friend bool operator==(const ConfigSet& a, const ConfigSet& b) {
        return a.num_tests_ == b.num_tests_ && a.mask_ == b.mask_;
    }

private:
    int num_tests_;
    std::vector<std::uint8_t> mask_;
    std::size_t count_ = 0;
};

// Configurations with at least k ones.
ConfigSet at_least_k(int num_tests, int k);
// Configurations containing a run of at least r consecutive ones.
ConfigSet consecutive_run(int num_tests, int r);
// Configurations matching a {0,1,*} pattern of length Q.
ConfigSet pattern_set(int num_tests, std::string_view pattern);
ConfigSet complement(const ConfigSet& cs);
ConfigSet set_union(const ConfigSet& a, const ConfigSet& b);

// Parses the textual composed-hypothesis form used on the command line:
// "all", "atleast:k", "run:r", or comma-separated {0,1,*} patterns.
// Syntax errors throw InvalidArgument; well-formed specs that do not fit Q
// throw InvalidQuery. "all" denotes c_max (every test under H1), i.e. the intersection-union
// alternative.
ConfigSet parse_config_set(int num_tests, std::string_view spec);

} // namespace qch
