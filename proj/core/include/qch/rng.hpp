#pragma once

#include <cstdint>
#include <limits>

namespace qch {

// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based generator: the k-th output of stream s under seed is a pure
// function of (seed, s, k). Substreams are derived with split(), so every
// consumer gets an independent, reproducible sequence regardless of the
// order in which other consumers draw.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL))) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return at(counter_++); }
    result_type at(std::uint64_t counter) const noexcept {
        return mix64(key_ + counter * 0xd1b54a32d192ed03ULL);
    }

    // Uniform on the open interval (0,1).
    double uniform() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    CounterRng split(std::uint64_t stream) const noexcept { return CounterRng(key_, stream); }

    std::uint64_t position() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Seed for run r of a benchmark with the given base seed.
std::uint64_t run_seed(std::uint64_t base_seed, std::uint64_t run) noexcept;

} // namespace qch
