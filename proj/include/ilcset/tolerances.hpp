#pragma once

// Shared numeric thresholds. Every downstream equality check goes through these.
namespace ilcset::tol {

inline constexpr double identity_residual = 1e-9;
inline constexpr double pivot_relative = 1e-12;
inline constexpr double rank_relative = 1e-10;
inline constexpr double det_relative = 1e-10;
inline constexpr int eigen_sweeps = 500;

}  // namespace ilcset::tol
