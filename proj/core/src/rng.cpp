#include "qch/rng.hpp"

namespace qch {

std::uint64_t run_seed(std::uint64_t base_seed, std::uint64_t run) noexcept {
    return mix64(mix64(base_seed) + run);
}

} // namespace qch
