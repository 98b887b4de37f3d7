#pragma once

#include <cstdint>

namespace ilcset {

/// Tags that separate the random streams of the different perturbed quantities.
enum class Quantity : std::uint64_t { A = 1, B, C, D, W, V, R, X0, Sigma };

namespace detail {
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Counter-based draw: the value depends only on its key, never on how many
/// draws came before it, so realizations are order independent.
struct DrawKey {
    std::uint64_t seed;
    std::uint64_t iteration;
    std::uint64_t step;
    Quantity quantity;
    std::uint64_t row;
    std::uint64_t col;
};

inline constexpr std::uint64_t counter_hash(const DrawKey& key) {
    std::uint64_t h = detail::mix64(key.seed);
    h = detail::mix64(h ^ key.iteration);
    h = detail::mix64(h ^ key.step);
    h = detail::mix64(h ^ static_cast<std::uint64_t>(key.quantity));
    h = detail::mix64(h ^ key.row);
    h = detail::mix64(h ^ key.col);
    return h;
}

/// Uniform on [0, 1) with 53 random mantissa bits.
inline constexpr double uniform01(const DrawKey& key) {
    return static_cast<double>(counter_hash(key) >> 11) * 0x1.0p-53;
}

/// Uniform on [-amp, amp).
inline constexpr double uniform_symmetric(double amp, const DrawKey& key) {
    return amp * (2.0 * uniform01(key) - 1.0);
}

}  // namespace ilcset
