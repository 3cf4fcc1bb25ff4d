#include "qch/config.hpp"

#include "qch/error.hpp"

#include <bit>
#include <charconv>

namespace qch {

namespace {

void check_num_tests(int num_tests) {
    if (num_tests < 1 || num_tests > kMaxTests)
        throw InvalidArgument("number of tests must be in [1, " + std::to_string(kMaxTests) +
                              "], got " + std::to_string(num_tests));
}

int parse_int(std::string_view text, std::string_view what) {
    int value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || text.empty())
        throw InvalidArgument("malformed integer in " + std::string(what) + ": '" +
                              std::string(text) + "'");
    return value;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

} // namespace

Configuration::Configuration(int num_tests, std::uint32_t index)
    : num_tests_(num_tests), index_(index) {
    check_num_tests(num_tests);
    if (index >= num_configs(num_tests))
        throw InvalidArgument("configuration index " + std::to_string(index) +
                              " out of range for Q=" + std::to_string(num_tests));
}

Configuration Configuration::from_bits(const std::vector<int>& bits) {
    const int q = static_cast<int>(bits.size());
    check_num_tests(q);
    std::uint32_t index = 0;
    for (int b : bits) {
        if (b != 0 && b != 1) throw InvalidArgument("configuration entries must be 0 or 1");
        index = (index << 1) | static_cast<std::uint32_t>(b);
    }
    return Configuration(q, index);
}

Configuration Configuration::parse(std::string_view text) {
    std::vector<int> bits;
    bits.reserve(text.size());
    for (char ch : text) {
        if (ch != '0' && ch != '1')
            throw InvalidArgument("bad character '" + std::string(1, ch) + "' in configuration '" +
                                  std::string(text) + "'");
        bits.push_back(ch - '0');
    }
    return from_bits(bits);
}

int Configuration::count_ones() const noexcept { return std::popcount(index_); }

std::vector<int> Configuration::bits() const {
    std::vector<int> out(static_cast<std::size_t>(num_tests_));
    for (int q = 1; q <= num_tests_; ++q) out[static_cast<std::size_t>(q - 1)] = bit(q);
    return out;
}

std::string Configuration::str() const {
    std::string s;
    s.reserve(static_cast<std::size_t>(num_tests_));
    for (int q = 1; q <= num_tests_; ++q) s.push_back(bit(q) ? '1' : '0');
    return s;
}

std::size_t num_configs(int num_tests) {
    check_num_tests(num_tests);
    return std::size_t{1} << num_tests;
}

std::vector<Configuration> enumerate_configs(int num_tests) {
    const std::size_t total = num_configs(num_tests);
    std::vector<Configuration> out;
    out.reserve(total);
    for (std::size_t k = 0; k < total; ++k)
        out.emplace_back(num_tests, static_cast<std::uint32_t>(k));
    return out;
}

ConfigSet::ConfigSet(int num_tests) : num_tests_(num_tests), mask_(num_configs(num_tests), 0) {}

ConfigSet::ConfigSet(int num_tests, const std::vector<Configuration>& members)
    : ConfigSet(num_tests) {
    for (const auto& c : members) insert(c);
}

ConfigSet ConfigSet::full(int num_tests) {
    ConfigSet cs(num_tests);
    std::fill(cs.mask_.begin(), cs.mask_.end(), std::uint8_t{1});
    cs.count_ = cs.mask_.size();
    return cs;
}

bool ConfigSet::contains(const Configuration& c) const {
    return c.num_tests() == num_tests_ && mask_[c.index()] != 0;
}

void ConfigSet::insert(const Configuration& c) {
    if (c.num_tests() != num_tests_)
        throw InvalidArgument("configuration " + c.str() + " does not have Q=" +
                              std::to_string(num_tests_));
    if (!mask_[c.index()]) {
        mask_[c.index()] = 1;
        ++count_;
    }
}

std::vector<std::uint32_t> ConfigSet::indices() const {
    std::vector<std::uint32_t> out;
    out.reserve(count_);
    for (std::size_t k = 0; k < mask_.size(); ++k)
        if (mask_[k]) out.push_back(static_cast<std::uint32_t>(k));
    return out;
}

std::vector<Configuration> ConfigSet::members() const {
    std::vector<Configuration> out;
    out.reserve(count_);
    for (auto k : indices()) out.emplace_back(num_tests_, k);
    return out;
}

std::string ConfigSet::str() const {
    std::string s;
    for (const auto& c : members()) {
        if (!s.empty()) s.push_back(',');
        s += c.str();
    }
    return s;
}

ConfigSet at_least_k(int num_tests, int k) {
    check_num_tests(num_tests);
    if (k < 0 || k > num_tests)
        throw InvalidArgument("k must be in [0, Q], got " + std::to_string(k));
    ConfigSet cs(num_tests);
    for (const auto& c : enumerate_configs(num_tests))
        if (c.count_ones() >= k) cs.insert(c);
    return cs;
}

ConfigSet consecutive_run(int num_tests, int r) {
    check_num_tests(num_tests);
    if (r < 1 || r > num_tests)
        throw InvalidArgument("run length must be in [1, Q], got " + std::to_string(r));
    ConfigSet cs(num_tests);
    for (const auto& c : enumerate_configs(num_tests)) {
        int run = 0;
        for (int q = 1; q <= num_tests; ++q) {
            run = c.bit(q) ? run + 1 : 0;
            if (run >= r) {
                cs.insert(c);
                break;
            }
        }
    }
    return cs;
}

ConfigSet pattern_set(int num_tests, std::string_view pattern) {
    check_num_tests(num_tests);
    if (static_cast<int>(pattern.size()) != num_tests)
        throw InvalidArgument("pattern '" + std::string(pattern) + "' has length " +
                              std::to_string(pattern.size()) + ", expected Q=" +
                              std::to_string(num_tests));
    std::uint32_t fixed_mask = 0, fixed_value = 0;
    for (int q = 1; q <= num_tests; ++q) {
        const char ch = pattern[static_cast<std::size_t>(q - 1)];
        const std::uint32_t bit = 1u << (num_tests - q);
        if (ch == '0' || ch == '1') {
            fixed_mask |= bit;
            if (ch == '1') fixed_value |= bit;
        } else if (ch != '*') {
            throw InvalidArgument("bad character '" + std::string(1, ch) + "' in pattern '" +
                                  std::string(pattern) + "'");
        }
    }
    ConfigSet cs(num_tests);
    for (const auto& c : enumerate_configs(num_tests))
        if ((c.index() & fixed_mask) == fixed_value) cs.insert(c);
    return cs;
}

ConfigSet complement(const ConfigSet& cs) {
    ConfigSet out(cs.num_tests());
    for (const auto& c : enumerate_configs(cs.num_tests()))
        if (!cs.contains(c)) out.insert(c);
    return out;
}

ConfigSet set_union(const ConfigSet& a, const ConfigSet& b) {
    if (a.num_tests() != b.num_tests()) throw InvalidArgument("cannot union sets with different Q");
    ConfigSet out = a;
    for (const auto& c : b.members()) out.insert(c);
    return out;
}

ConfigSet parse_config_set(int num_tests, std::string_view spec) {
    check_num_tests(num_tests);
    spec = trim(spec);
    if (spec.empty()) throw InvalidArgument("empty configuration set");
    if (spec == "all") return pattern_set(num_tests, std::string(static_cast<std::size_t>(num_tests), '1'));
    if (spec.starts_with("atleast:")) {
        const int k = parse_int(spec.substr(8), "atleast:k");
        if (k < 0 || k > num_tests)
            throw InvalidQuery("atleast:" + std::to_string(k) + " is incompatible with Q=" +
                               std::to_string(num_tests));
        return at_least_k(num_tests, k);
    }
    if (spec.starts_with("run:")) {
        const int r = parse_int(spec.substr(4), "run:r");
        if (r < 1 || r > num_tests)
            throw InvalidQuery("run:" + std::to_string(r) + " is incompatible with Q=" +
                               std::to_string(num_tests));
        return consecutive_run(num_tests, r);
    }

    // Syntax is checked for every token before any is matched against Q.
    std::vector<std::string_view> tokens;
    for (std::size_t start = 0;;) {
        const auto comma = spec.find(',', start);
        const auto token = trim(spec.substr(start, comma == std::string_view::npos ? comma : comma - start));
        if (token.empty()) throw InvalidArgument("empty pattern in configuration set");
        if (token.find_first_not_of("01*") != std::string_view::npos)
            throw InvalidArgument("bad pattern '" + std::string(token) + "'");
        tokens.push_back(token);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    ConfigSet out(num_tests);
    for (auto token : tokens) {
        if (static_cast<int>(token.size()) != num_tests)
            throw InvalidQuery("pattern '" + std::string(token) + "' has length " +
                               std::to_string(token.size()) + " but Q=" + std::to_string(num_tests));
        out = set_union(out, pattern_set(num_tests, token));
    }
    return out;
}

} // namespace qch
