#pragma once

#include <cstdint>
#include <random>

namespace qtel::util {

using Rng = std::mt19937_64;

/// Seed for the i-th member of a batch (independent realizations, traces,
/// restarts). Batches always iterate ascending index so results are
/// reproducible regardless of scheduling.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return base + index;
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

} // namespace qtel::util
