#pragma once

// Input-space equivalence transforms that split an m-channel input into p
// learned channels and m-p frozen channels, turning a nonsquare ILC loop into
// an equivalent square one.
//
// Both the D-coupled case (coupling D(k), gain Ξ(k)) and the one-step case
// (coupling C(k+1)B(k), gain Γ(k)) share the same block algebra: with the
// coupling M = [M1 M2] (M1 nonsingular after a column permutation) and the
// gain G = [G1; G2] partitioned conformally,
//
//   T = [ M1                  M2                 ]
//       [ -G2 (MG)^-1 M1      I - G2 (MG)^-1 M2  ]
//
//   T^-1 = [ G1 (MG)^-1     -M1^-1 M2 ]
//          [ G2 (MG)^-1      I        ]

#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ilcset/errors.hpp"
#include "ilcset/matrix.hpp"
#include "ilcset/plant.hpp"
#include "ilcset/schedule.hpp"
#include "ilcset/tolerances.hpp"

namespace ilcset {

using Permutation = std::vector<std::size_t>;

struct BlockSelection {
    Permutation perm;  // perm[j] = original column placed at position j
    Mat M1;            // p x p, nonsingular
    Mat M2;            // p x (m-p)
};

/// Greedy column-pivoted elimination, row by row, taking the largest
/// remaining pivot. Selected columns come first in pivot order, the rest
/// follow in their original order.
inline BlockSelection select_nonsingular_block(const Mat& M) {
    const std::size_t p = M.rows(), m = M.cols();
    if (p > m) throw RankDeficient("select_nonsingular_block: more rows than columns");
    const double floor = tol::rank_relative * std::max(max_abs(M), 1e-300);
    Mat W = M;
    std::vector<bool> used(m, false);
    Permutation perm;
    perm.reserve(m);
    for (std::size_t i = 0; i < p; ++i) {
        std::size_t best = m;
        double best_val = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (used[j]) continue;
            if (std::abs(W(i, j)) > best_val) {
                best_val = std::abs(W(i, j));
                best = j;
            }
        }
        if (best == m || best_val <= floor) {
            throw RankDeficient("select_nonsingular_block: row rank below " + std::to_string(p) +
                                " (pivot " + std::to_string(best_val) + " at row " + std::to_string(i) + ")");
        }
        used[best] = true;
        perm.push_back(best);
        for (std::size_t r = i + 1; r < p; ++r) {
            const double f = W(r, best) / W(i, best);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) W(r, j) -= f * W(i, j);
        }
    }
    for (std::size_t j = 0; j < m; ++j)
        if (!used[j]) perm.push_back(j);
    Mat Mp = permute_cols(M, perm);
    return {perm, block(Mp, 0, 0, p, p), block(Mp, 0, p, p, m - p)};
}

enum class TransformKind { Q, P };

/// All blocks of the transform and its closed-form inverse at one time step,
/// in permuted input coordinates.
struct TransformStep {
    Permutation perm;
    Mat T11, T12, T21, T22;  // transform blocks
    Mat H11, H12, H21, H22;  // inverse blocks
    Mat coupling;            // D(k) or C(k+1)B(k), original column order
    Mat gain;                // Ξ(k) or Γ(k), original row order
    Mat gain_star;           // coupling * gain, the p x p learning gain of the square loop
};

/// Precomputed transform over its whole k-range; immutable after build.
struct SetTransform {
    TransformKind kind = TransformKind::Q;
    std::size_t p = 0, m = 0;
    int last_k = 0;               // steps cover k = 0..last_k
    bool fixed_permutation = true;
    std::vector<TransformStep> steps;

    const TransformStep& at(int k) const { return steps.at(static_cast<std::size_t>(k)); }

    Mat assembled(int k) const {
        const auto& s = at(k);
        return block2x2(s.T11, s.T12, s.T21, s.T22);
    }
    Mat assembled_inverse(int k) const {
        const auto& s = at(k);
        return block2x2(s.H11, s.H12, s.H21, s.H22);
    }
    /// The transform acting on inputs in their original channel order: T Πᵀ.
    Mat full(int k) const { return permute_cols(assembled(k), inverse_perm(at(k).perm)); }
    /// Π T⁻¹, the inverse of full(k).
    Mat full_inverse(int k) const { return unpermute_rows(assembled_inverse(k), at(k).perm); }

    static Permutation inverse_perm(const Permutation& perm) {
        Permutation inv(perm.size());
        for (std::size_t j = 0; j < perm.size(); ++j) inv[perm[j]] = j;
        return inv;
    }
};

using QTransform = SetTransform;
using PTransform = SetTransform;

namespace detail {

inline bool selection_valid(const Mat& M, const Permutation& perm) {
    const std::size_t p = M.rows();
    const Mat M1 = block(permute_cols(M, perm), 0, 0, p, p);
    const double scale = std::pow(std::max(inf_norm(M), 1e-300), static_cast<double>(p));
    return std::abs(determinant(M1)) >= tol::det_relative * scale;
}

inline TransformStep build_step(const Mat& M, const Mat& G, const Permutation& perm, int k) {
    const std::size_t p = M.rows(), m = M.cols();
    const Mat MG = M * G;
    const double rho = spectral_radius(Mat::identity(p) - MG);
    if (!(rho < 1.0)) {
        throw ConditionViolated("transform precondition rho(I - M G) < 1 fails at k=" + std::to_string(k) +
                                    " (rho = " + std::to_string(rho) + ")",
                                k, rho);
    }
    const Mat Mp = permute_cols(M, perm);
    const Mat Gp = permute_rows(G, perm);
    const Mat M1 = block(Mp, 0, 0, p, p), M2 = block(Mp, 0, p, p, m - p);
    const Mat G1 = block(Gp, 0, 0, p, p), G2 = block(Gp, p, 0, m - p, p);
    const Mat MGi = invert(MG);
    const Mat G2MGi = G2 * MGi;

    TransformStep s;
    s.perm = perm;
    s.T11 = M1;
    s.T12 = M2;
    s.T21 = -(G2MGi * M1);
    s.T22 = Mat::identity(m - p) - G2MGi * M2;
    s.H11 = G1 * MGi;
    s.H12 = -(invert(M1) * M2);
    s.H21 = G2MGi;
    s.H22 = Mat::identity(m - p);
    s.coupling = M;
    s.gain = G;
    s.gain_star = MG;
    return s;
}

inline SetTransform build_transform(TransformKind kind, const std::vector<Mat>& couplings,
                                    const std::vector<Mat>& gains) {
    SetTransform t;
    t.kind = kind;
    t.p = couplings.front().rows();
    t.m = couplings.front().cols();
    t.last_k = static_cast<int>(couplings.size()) - 1;
    for (std::size_t k = 0; k < couplings.size(); ++k) {
        if (couplings[k].rows() != t.p || couplings[k].cols() != t.m || gains[k].rows() != t.m ||
            gains[k].cols() != t.p) {
            throw DimensionMismatch("build_transform: coupling/gain shapes do not conform at k=" +
                                    std::to_string(k));
        }
    }
    // one permutation for the whole horizon when it stays valid everywhere
    const Permutation base = select_nonsingular_block(couplings.front()).perm;
    for (const auto& M : couplings) {
        if (!selection_valid(M, base)) {
            t.fixed_permutation = false;
            break;
        }
    }
    t.steps.reserve(couplings.size());
    for (std::size_t k = 0; k < couplings.size(); ++k) {
        const Permutation perm = t.fixed_permutation ? base : select_nonsingular_block(couplings[k]).perm;
        t.steps.push_back(build_step(couplings[k], gains[k], perm, static_cast<int>(k)));
    }
    return t;
}

}  // namespace detail

/// Transform for the D-coupled loop, defined for k = 0..N.
inline QTransform build_q_transform(const MatrixSchedule& D, const MatrixSchedule& Xi) {
    if (D.horizon() != Xi.horizon()) throw DimensionMismatch("build_q_transform: horizons differ");
    std::vector<Mat> couplings, gains;
    for (int k = 0; k <= D.horizon(); ++k) {
        couplings.push_back(D[k]);
        gains.push_back(Xi[k]);
    }
    return detail::build_transform(TransformKind::Q, couplings, gains);
}

/// Transform for the one-step-coupled loop, defined for k = 0..N-1.
inline PTransform build_p_transform(const MatrixSchedule& B, const MatrixSchedule& C, const MatrixSchedule& Gamma) {
    if (B.horizon() != C.horizon() || B.horizon() != Gamma.horizon()) {
        throw DimensionMismatch("build_p_transform: horizons differ");
    }
    std::vector<Mat> couplings, gains;
    for (int k = 0; k < B.horizon(); ++k) {
        couplings.push_back(C[k + 1] * B[k]);
        gains.push_back(Gamma[k]);
    }
    return detail::build_transform(TransformKind::P, couplings, gains);
}

/// (u1*, u2*) = partition of T Πᵀ u.
inline std::pair<Mat, Mat> split_input(const SetTransform& t, const Mat& u, int k) {
    if (u.rows() != t.m || u.cols() != 1) throw DimensionMismatch("split_input: u must be m x 1");
    const auto& s = t.at(k);
    const Mat up = permute_rows(u, s.perm);
    const Mat ua = block(up, 0, 0, t.p, 1), ub = block(up, t.p, 0, t.m - t.p, 1);
    return {s.T11 * ua + s.T12 * ub, s.T21 * ua + s.T22 * ub};
}

/// Π T⁻¹ [u1*; u2*], using the closed-form inverse blocks.
inline Mat merge_input(const SetTransform& t, const Mat& u1, const Mat& u2, int k) {
    if (u1.rows() != t.p || u2.rows() != t.m - t.p) throw DimensionMismatch("merge_input: partition sizes");
    const auto& s = t.at(k);
    return unpermute_rows(vcat(s.H11 * u1 + s.H12 * u2, s.H21 * u1 + s.H22 * u2), s.perm);
}

/// Plant matrices of the equivalent square system driven only by u1*.
struct TransformedSystem {
    TransformKind kind = TransformKind::Q;
    std::vector<Mat> Bstar;      // n x p
    std::vector<Mat> Dstar;      // p x p, empty for the one-step case
    std::vector<Mat> wstar;      // n x 1
    std::vector<Mat> vstar;      // p x 1
    std::vector<Mat> gain_star;  // p x p
    double coupling_residual = 0.0;  // max_k ‖C(k+1)B*(k) − I‖∞, one-step case only
};

namespace detail {

/// [[H12 T21, H12 T22], [H22 T21, H22 T22]], the m x m map from u0 to the
/// frozen-channel contribution, in permuted coordinates.
inline Mat frozen_channel_map(const TransformStep& s) {
    return block2x2(s.H12 * s.T21, s.H12 * s.T22, s.H22 * s.T21, s.H22 * s.T22);
}

inline Mat learned_columns(const TransformStep& s) { return vcat(s.H11, s.H21); }

}  // namespace detail

/// Square system for the D-coupled loop, one realized iteration.
inline TransformedSystem transform_feedthrough(const RealizedIteration& it, const QTransform& q,
                                            std::span<const Mat> u0) {
    if (q.kind != TransformKind::Q) throw ModelMismatch("transform_feedthrough requires a Q transform");
    const int N = it.horizon();
    if (q.last_k != N || u0.size() != static_cast<std::size_t>(N) + 1) {
        throw DimensionMismatch("transform_feedthrough: horizon mismatch");
    }
    TransformedSystem ts;
    ts.kind = TransformKind::Q;
    for (int k = 0; k <= N; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        const auto& s = q.at(k);
        const Mat Bp = permute_cols(it.B[kk], s.perm);
        const Mat Dp = permute_cols(it.D[kk], s.perm);
        const Mat lc = detail::learned_columns(s);
        const Mat frozen = detail::frozen_channel_map(s) * permute_rows(u0[kk], s.perm);
        ts.Bstar.push_back(Bp * lc);
        ts.Dstar.push_back(Dp * lc);
        ts.wstar.push_back(it.w[kk] + Bp * frozen);
        ts.vstar.push_back(it.v[kk] + Dp * frozen);
        ts.gain_star.push_back(s.gain_star);
    }
    return ts;
}

/// Square system for the one-step-coupled loop. Requires D ≡ 0 and B, C
/// free of perturbation.
inline TransformedSystem transform_coupled(const NominalSystem& sys, const RealizedIteration& it,
                                            const PTransform& pt, std::span<const Mat> u0) {
    if (pt.kind != TransformKind::P) throw ModelMismatch("transform_coupled requires a P transform");
    const int N = it.horizon();
    if (pt.last_k != N - 1 || u0.size() != static_cast<std::size_t>(N) + 1) {
        throw DimensionMismatch("transform_coupled: horizon mismatch");
    }
    for (int k = 0; k <= N; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        if (max_abs(it.D[kk]) != 0.0) throw ModelMismatch("transform_coupled: plant has a nonzero D");
        if (!(it.B[kk] == sys.B[k]) || !(it.C[kk] == sys.C[k])) {
            throw ModelMismatch("transform_coupled: B and C must be repetitive");
        }
    }
    TransformedSystem ts;
    ts.kind = TransformKind::P;
    for (int k = 0; k < N; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        const auto& s = pt.at(k);
        const Mat Bp = permute_cols(sys.B[k], s.perm);
        const Mat B1 = block(Bp, 0, 0, sys.n, pt.p);
        const Mat B2 = block(Bp, 0, pt.p, sys.n, pt.m - pt.p);
        Mat Bstar = B1 * s.H11 + B2 * s.H21;
        ts.coupling_residual = std::max(ts.coupling_residual, identity_residual(sys.C[k + 1] * Bstar));
        ts.wstar.push_back(it.w[kk] + Bp * (detail::frozen_channel_map(s) * permute_rows(u0[kk], s.perm)));
        ts.Bstar.push_back(std::move(Bstar));
        ts.vstar.push_back(it.v[kk]);
        ts.gain_star.push_back(s.gain_star);
    }
    ts.vstar.push_back(it.v[static_cast<std::size_t>(N)]);
    return ts;
}

/// Runs the square system for one trial given the learned-channel input u1*.
/// The one-step case leaves u1*(N) unused.
inline Trajectory simulate_transformed(const RealizedIteration& it, const TransformedSystem& ts,
                                       std::span<const Mat> u1) {
    const int N = it.horizon();
    Trajectory tr;
    Mat x = it.x0;
    for (int k = 0; k <= N; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        Mat y = ts.kind == TransformKind::Q ? it.C[kk] * x + ts.Dstar[kk] * u1[kk] + ts.vstar[kk]
                                            : it.C[kk] * x + ts.vstar[kk];
        if (!x.all_finite() || !y.all_finite()) {
            throw NonFinite("simulate_transformed: divergence at k=" + std::to_string(k), it.l);
        }
        tr.e.push_back(it.r[kk] - y);
        tr.y.push_back(std::move(y));
        Mat next = k < N ? it.A[kk] * x + ts.Bstar[kk] * u1[kk] + ts.wstar[kk] : Mat();
        tr.x.push_back(std::move(x));
        x = std::move(next);
    }
    return tr;
}

}  // namespace ilcset
