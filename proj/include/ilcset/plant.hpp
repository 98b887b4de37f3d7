#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ilcset/errors.hpp"
#include "ilcset/matrix.hpp"
#include "ilcset/rng.hpp"
#include "ilcset/schedule.hpp"

namespace ilcset {

/// Iteration-independent part of the plant, reference and initial state.
struct NominalSystem {
    std::size_t n = 0;  // states
    std::size_t m = 0;  // inputs
    std::size_t p = 0;  // outputs
    int N = 0;          // horizon, k = 0..N
    MatrixSchedule A, B, C, D;
    MatrixSchedule w, v, r;
    Mat x0;

    void validate() const {
        auto check = [&](const MatrixSchedule& s, std::size_t rows, std::size_t cols, const char* name) {
            if (s.rows() != rows || s.cols() != cols) {
                throw DimensionMismatch(std::string("NominalSystem: ") + name + " is " +
                                        std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                                        ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
            }
            if (s.horizon() != N) {
                throw DimensionMismatch(std::string("NominalSystem: ") + name + " horizon " +
                                        std::to_string(s.horizon()) + " differs from N=" + std::to_string(N));
            }
        };
        if (n == 0 || m == 0 || p == 0 || N < 1) throw DimensionMismatch("NominalSystem: empty dimensions");
        check(A, n, n, "A");
        check(B, n, m, "B");
        check(C, p, n, "C");
        check(D, p, m, "D");
        check(w, n, 1, "w");
        check(v, p, 1, "v");
        check(r, p, 1, "r");
        if (x0.rows() != n || x0.cols() != 1) throw DimensionMismatch("NominalSystem: x0 must be n x 1");
    }
};

/// Per-entry bounds of the nonrepetitive perturbations.
struct Amplitudes {
    double A = 0, B = 0, C = 0, D = 0, w = 0, v = 0, r = 0, x0 = 0;

    static Amplitudes uniform(double a) { return {a, a, a, a, a, a, a, a}; }
    Amplitudes scaled(double s) const { return {s * A, s * B, s * C, s * D, s * w, s * v, s * r, s * x0}; }
    bool all_zero() const { return A == 0 && B == 0 && C == 0 && D == 0 && w == 0 && v == 0 && r == 0 && x0 == 0; }
};

/// δ_D = E(k) Σ_l(k) F(k) with ΣᵀΣ ≤ I.
struct StructuredD {
    MatrixSchedule E;  // p x s
    MatrixSchedule F;  // s x m
};

struct UncertaintySpec {
    Amplitudes amp;
    std::optional<StructuredD> structured_D;
    std::uint64_t seed = 42;
};

/// One trial's plant: nominal plus sampled perturbation, for every k.
struct RealizedIteration {
    std::size_t l = 0;
    std::vector<Mat> A, B, C, D, w, v, r;
    std::vector<Mat> sigma;  // only filled for a structured δ_D
    Mat x0;

    int horizon() const { return static_cast<int>(A.size()) - 1; }
};

struct Trajectory {
    std::vector<Mat> x;  // N+1 states
    std::vector<Mat> y;  // N+1 outputs
    std::vector<Mat> e;  // N+1 errors
};

namespace detail {

inline Mat perturb(const Mat& nominal, double amp, std::uint64_t seed, std::size_t l, int k, Quantity q) {
    if (amp == 0.0) return nominal;
    Mat out = nominal;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j)
            out(i, j) += uniform_symmetric(amp, {seed, l, static_cast<std::uint64_t>(k), q, i, j});
    return out;
}

}  // namespace detail

/// Samples every perturbation entry i.i.d. uniform on [-amp, amp] from a
/// stream keyed by (seed, l, k, quantity, row, col).
inline RealizedIteration sample_iteration(const NominalSystem& sys, const UncertaintySpec& unc, std::size_t l) {
    const auto& a = unc.amp;
    const auto seed = unc.seed;
    const std::size_t steps = static_cast<std::size_t>(sys.N) + 1;
    RealizedIteration it;
    it.l = l;
    for (auto* v : {&it.A, &it.B, &it.C, &it.D, &it.w, &it.v, &it.r}) v->reserve(steps);

    if (unc.structured_D) {
        const auto& sd = *unc.structured_D;
        if (sd.E.rows() != sys.p || sd.F.cols() != sys.m || sd.E.horizon() != sys.N ||
            sd.F.horizon() != sys.N) {
            throw DimensionMismatch("sample_iteration: structured E/F do not conform to p x m");
        }
        it.sigma.reserve(steps);
    }

    for (int k = 0; k <= sys.N; ++k) {
        it.A.push_back(detail::perturb(sys.A[k], a.A, seed, l, k, Quantity::A));
        it.B.push_back(detail::perturb(sys.B[k], a.B, seed, l, k, Quantity::B));
        it.C.push_back(detail::perturb(sys.C[k], a.C, seed, l, k, Quantity::C));
        if (unc.structured_D) {
            const auto& sd = *unc.structured_D;
            Mat sigma(sd.E.cols(), sd.F.rows());
            for (std::size_t i = 0; i < sigma.rows(); ++i)
                for (std::size_t j = 0; j < sigma.cols(); ++j)
                    sigma(i, j) = uniform_symmetric(1.0, {seed, l, static_cast<std::uint64_t>(k), Quantity::Sigma, i, j});
            const double s = std::max(1.0, spectral_norm(sigma));
            sigma = (1.0 / s) * sigma;
            it.D.push_back(sys.D[k] + sd.E[k] * sigma * sd.F[k]);
            it.sigma.push_back(std::move(sigma));
        } else {
            it.D.push_back(detail::perturb(sys.D[k], a.D, seed, l, k, Quantity::D));
        }
        it.w.push_back(detail::perturb(sys.w[k], a.w, seed, l, k, Quantity::W));
        it.v.push_back(detail::perturb(sys.v[k], a.v, seed, l, k, Quantity::V));
        it.r.push_back(detail::perturb(sys.r[k], a.r, seed, l, k, Quantity::R));
    }
    // the initial-state shift depends on l only
    it.x0 = detail::perturb(sys.x0, a.x0, seed, l, 0, Quantity::X0);
    return it;
}

/// Runs the state/output recursion for one trial. u must hold N+1 inputs;
/// u[N] only enters the output at k = N.
inline Trajectory simulate(const RealizedIteration& it, std::span<const Mat> u) {
    const int N = it.horizon();
    if (u.size() != static_cast<std::size_t>(N) + 1) {
        throw DimensionMismatch("simulate: input has " + std::to_string(u.size()) + " steps, expected " +
                                std::to_string(N + 1));
    }
    Trajectory tr;
    tr.x.reserve(u.size());
    tr.y.reserve(u.size());
    tr.e.reserve(u.size());
    Mat x = it.x0;
    for (int k = 0; k <= N; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        Mat y = it.C[kk] * x + it.D[kk] * u[kk] + it.v[kk];
        if (!x.all_finite() || !y.all_finite()) {
            throw NonFinite("simulate: state or output left the finite range at k=" + std::to_string(k), it.l);
        }
        tr.e.push_back(it.r[kk] - y);
        tr.y.push_back(std::move(y));
        Mat next = k < N ? it.A[kk] * x + it.B[kk] * u[kk] + it.w[kk] : Mat();
        tr.x.push_back(std::move(x));
        x = std::move(next);
    }
    return tr;
}

}  // namespace ilcset
