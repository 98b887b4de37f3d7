#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "ilcset/errors.hpp"
#include "ilcset/matrix.hpp"
#include "ilcset/plant.hpp"
#include "ilcset/schedule.hpp"

namespace ilcset {

struct ConditionSample {
    int l = -1;  // iteration, -1 for nominal checks
    int k = 0;
    double value = 0.0;
    double lambda = 0.0;  // best multiplier, LMI only
};

struct ConditionReport {
    std::string name;
    std::string description;
    std::vector<ConditionSample> per_k;
    int worst_k = 0;
    int worst_l = -1;
    double worst = 0.0;
    double threshold = 1.0;  // satisfied iff worst < threshold
    bool satisfied = false;
    double margin = 0.0;     // threshold - worst

    void finish() {
        worst = -std::numeric_limits<double>::infinity();
        for (const auto& s : per_k) {
            if (s.value > worst) {
                worst = s.value;
                worst_k = s.k;
                worst_l = s.l;
            }
        }
        satisfied = worst < threshold;
        margin = threshold - worst;
    }
};

namespace detail {

inline ConditionReport spectral_report(std::string name, std::string description, int first, int last,
                                       const std::function<Mat(int)>& matrix_at) {
    ConditionReport rep;
    rep.name = std::move(name);
    rep.description = std::move(description);
    for (int k = first; k <= last; ++k) rep.per_k.push_back({-1, k, spectral_radius(matrix_at(k)), 0.0});
    rep.finish();
    return rep;
}

inline void require_gain_shapes(const MatrixSchedule& coupling_like, const MatrixSchedule& gain) {
    if (gain.rows() != coupling_like.cols() || gain.cols() != coupling_like.rows() ||
        gain.horizon() != coupling_like.horizon()) {
        throw DimensionMismatch("condition check: gain does not conform to the coupling matrix");
    }
}

}  // namespace detail

/// ρ(I − D(k)Ξ(k)) for k = 0..N.
inline ConditionReport check_rho_DXi(const MatrixSchedule& D, const MatrixSchedule& Xi) {
    detail::require_gain_shapes(D, Xi);
    const std::size_t p = D.rows();
    return detail::spectral_report("eq5", "rho(I - D(k) Xi(k)) < 1", 0, D.horizon(),
                                   [&](int k) { return Mat::identity(p) - D[k] * Xi[k]; });
}

/// ρ(I − Ξ(k)D(k)) for k = 0..N, the m x m companion of check_rho_DXi.
inline ConditionReport check_rho_XiD(const MatrixSchedule& D, const MatrixSchedule& Xi) {
    detail::require_gain_shapes(D, Xi);
    const std::size_t m = D.cols();
    return detail::spectral_report("eq19", "rho(I - Xi(k) D(k)) < 1", 0, D.horizon(),
                                   [&](int k) { return Mat::identity(m) - Xi[k] * D[k]; });
}

/// ρ(I − C(k+1)B(k)Γ(k)) for k = 0..N-1.
inline ConditionReport check_rho_CBGamma(const MatrixSchedule& B, const MatrixSchedule& C,
                                         const MatrixSchedule& Gamma) {
    if (Gamma.rows() != B.cols() || Gamma.cols() != C.rows()) {
        throw DimensionMismatch("check_rho_CBGamma: Gamma must be m x p");
    }
    const std::size_t p = C.rows();
    return detail::spectral_report("eq29", "rho(I - C(k+1) B(k) Gamma(k)) < 1", 0, B.horizon() - 1,
                                   [&](int k) { return Mat::identity(p) - C[k + 1] * B[k] * Gamma[k]; });
}

/// ρ(I − Γ(k)C(k+1)B(k)) for k = 0..N-1.
inline ConditionReport check_rho_GammaCB(const MatrixSchedule& B, const MatrixSchedule& C,
                                         const MatrixSchedule& Gamma) {
    if (Gamma.rows() != B.cols() || Gamma.cols() != C.rows()) {
        throw DimensionMismatch("check_rho_GammaCB: Gamma must be m x p");
    }
    const std::size_t m = B.cols();
    return detail::spectral_report("eq34", "rho(I - Gamma(k) C(k+1) B(k)) < 1", 0, B.horizon() - 1,
                                   [&](int k) { return Mat::identity(m) - Gamma[k] * C[k + 1] * B[k]; });
}

/// Symmetric block matrix whose negativity certifies ‖I − (D + EΣF)Ξ‖₂ < 1
/// for every ΣᵀΣ ≤ I:
///
///   [ -I      (I-DΞ)ᵀ  0     (FΞ)ᵀ ]
///   [ I-DΞ    -I       E     0     ]
///   [ 0       Eᵀ       -λI   0     ]
///   [ FΞ      0        0     -λI   ]
inline Mat lmi_matrix(const Mat& D, const Mat& Xi, const Mat& E, const Mat& F, double lambda) {
    const std::size_t p = D.rows();
    if (E.rows() != p || F.cols() != D.cols() || Xi.rows() != D.cols() || Xi.cols() != p) {
        throw DimensionMismatch("lmi_matrix: D, Xi, E, F do not conform");
    }
    const std::size_t s1 = E.cols(), s2 = F.rows();
    const Mat R = Mat::identity(p) - D * Xi;
    const Mat FX = F * Xi;
    const std::size_t dim = 2 * p + s1 + s2;
    Mat M(dim, dim);
    auto put = [&M](std::size_t r0, std::size_t c0, const Mat& b) {
        for (std::size_t i = 0; i < b.rows(); ++i)
            for (std::size_t j = 0; j < b.cols(); ++j) {
                M(r0 + i, c0 + j) = b(i, j);
                M(c0 + j, r0 + i) = b(i, j);
            }
    };
    for (std::size_t i = 0; i < p; ++i) {
        M(i, i) = -1.0;
        M(p + i, p + i) = -1.0;
    }
    for (std::size_t i = 0; i < s1 + s2; ++i) M(2 * p + i, 2 * p + i) = -lambda;
    put(p, 0, R);
    put(2 * p, p, transpose(E));
    put(2 * p + s1, 0, FX);
    return M;
}

struct LambdaSearch {
    int grid_points = 40;
    double lo = 1e-4;
    double hi = 1e4;
    int refine_iterations = 60;
};

struct LmiStep {
    double value;   // min over λ of the largest eigenvalue
    double lambda;  // the minimizing λ
};

/// Minimizes the largest eigenvalue of lmi_matrix over λ: log-spaced grid,
/// then golden-section refinement between the neighbours of the best point.
inline LmiStep lmi_min_max_eigenvalue(const Mat& D, const Mat& Xi, const Mat& E, const Mat& F,
                                      const LambdaSearch& search = {}) {
    auto f = [&](double log_lambda) {
        return max_symmetric_eigenvalue(lmi_matrix(D, Xi, E, F, std::exp(log_lambda)));
    };
    const double a = std::log(search.lo), b = std::log(search.hi);
    const int n = std::max(search.grid_points, 2);
    const double step = (b - a) / (n - 1);
    int best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const double v = f(a + i * step);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    double lo = a + std::max(best - 1, 0) * step;
    double hi = a + std::min(best + 1, n - 1) * step;
    double best_x = a + best * step;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < search.refine_iterations; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    if (f1 < best_val) {
        best_val = f1;
        best_x = x1;
    }
    if (f2 < best_val) {
        best_val = f2;
        best_x = x2;
    }
    return {best_val, std::exp(best_x)};
}

/// Structured-uncertainty LMI at every k; satisfied iff the worst
/// (over k) of the per-step minimal largest eigenvalue is negative.
inline ConditionReport check_lmi(const MatrixSchedule& D, const MatrixSchedule& Xi, const MatrixSchedule& E,
                                 const MatrixSchedule& F, const LambdaSearch& search = {}) {
    detail::require_gain_shapes(D, Xi);
    if (E.rows() != D.rows() || F.cols() != D.cols() || E.horizon() != D.horizon() ||
        F.horizon() != D.horizon()) {
        throw DimensionMismatch("check_lmi: E must be p x s and F s x m over the same horizon");
    }
    ConditionReport rep;
    rep.name = "eq8";
    rep.description = "structured-uncertainty LMI < 0 for some lambda > 0";
    rep.threshold = 0.0;
    for (int k = 0; k <= D.horizon(); ++k) {
        const auto st = lmi_min_max_eigenvalue(D[k], Xi[k], E[k], F[k], search);
        rep.per_k.push_back({-1, k, st.value, st.lambda});
    }
    rep.finish();
    return rep;
}

/// Sampled spectral norms ‖I − D_l(k)Ξ(k)‖₂ over realized iterations.
inline ConditionReport verify_norm_condition(const std::vector<RealizedIteration>& realized,
                                             const MatrixSchedule& Xi) {
    ConditionReport rep;
    rep.name = "norm";
    rep.description = "||I - D_l(k) Xi(k)||_2 < 1 on sampled realizations";
    for (const auto& it : realized) {
        for (int k = 0; k <= it.horizon(); ++k) {
            const Mat& Dl = it.D[static_cast<std::size_t>(k)];
            rep.per_k.push_back(
                {static_cast<int>(it.l), k, spectral_norm(Mat::identity(Dl.rows()) - Dl * Xi[k]), 0.0});
        }
    }
    rep.finish();
    return rep;
}

/// Bounds of the realized quantities: perturbation bound plus the largest
/// nominal ∞-norm over the horizon.
struct UncertaintyBudget {
    double beta_A = 0, beta_B = 0, beta_C = 0, beta_D = 0;
    double beta_w = 0, beta_v = 0, beta_r = 0, beta_x0 = 0;
};

inline UncertaintyBudget budget(const NominalSystem& sys, const UncertaintySpec& unc) {
    // entrywise bound a on an r x c block gives ∞-norm bound a*c
    auto entrywise = [](double amp, std::size_t cols) { return amp * static_cast<double>(cols); };
    double bar_D = entrywise(unc.amp.D, sys.m);
    if (unc.structured_D) {
        const auto& sd = *unc.structured_D;
        // ‖Σ‖∞ ≤ sqrt(cols)·‖Σ‖₂ ≤ sqrt(cols)
        const double sig = std::sqrt(static_cast<double>(sd.F.rows()));
        bar_D = 0.0;
        for (int k = 0; k <= sys.N; ++k) bar_D = std::max(bar_D, inf_norm(sd.E[k]) * sig * inf_norm(sd.F[k]));
    }
    UncertaintyBudget b;
    b.beta_A = entrywise(unc.amp.A, sys.n) + sys.A.max_inf_norm();
    b.beta_B = entrywise(unc.amp.B, sys.m) + sys.B.max_inf_norm();
    b.beta_C = entrywise(unc.amp.C, sys.n) + sys.C.max_inf_norm();
    b.beta_D = bar_D + sys.D.max_inf_norm();
    b.beta_w = unc.amp.w + sys.w.max_inf_norm();
    b.beta_v = unc.amp.v + sys.v.max_inf_norm();
    b.beta_r = unc.amp.r + sys.r.max_inf_norm();
    b.beta_x0 = unc.amp.x0 + inf_norm(sys.x0);
    return b;
}

/// A structured model that covers any entrywise-bounded δ_D: with
/// c = amp·sqrt(p·m), E = c[I_p 0] and F = I_m, since ‖δ_D‖₂ ≤ c.
inline StructuredD covering_structured_D(std::size_t p, std::size_t m, int horizon, double amp) {
    const double c = amp * std::sqrt(static_cast<double>(p * m));
    Mat E(p, m);
    for (std::size_t i = 0; i < p; ++i) E(i, i) = c;
    return {MatrixSchedule(E, horizon), MatrixSchedule(Mat::identity(m), horizon)};
}

}  // namespace ilcset
