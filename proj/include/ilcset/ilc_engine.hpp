#pragma once

// Iteration-domain loop for the first-order update
//
//   u_{l+1}(k) = u_l(k) + Ξ(k) e_l(k) + Γ(k) e_l(k+1),
//
// either applied directly to the m-channel input or through the equivalence
// transform, where only the p learned channels are updated and the remaining
// m-p channels stay at their l = 0 values.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ilcset/conditions.hpp"
#include "ilcset/errors.hpp"
#include "ilcset/log.hpp"
#include "ilcset/matrix.hpp"
#include "ilcset/plant.hpp"
#include "ilcset/schedule.hpp"
#include "ilcset/set_transform.hpp"

namespace ilcset {

enum class Mode { DirectXi, DirectGamma, TransformedXi, TransformedGamma, Repetitive };

inline std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::DirectXi: return "direct-xi";
        case Mode::DirectGamma: return "direct-gamma";
        case Mode::TransformedXi: return "transformed-xi";
        case Mode::TransformedGamma: return "transformed-gamma";
        case Mode::Repetitive: return "repetitive";
    }
    return "?";
}

inline std::optional<Mode> parse_mode(std::string_view s) {
    for (Mode m : {Mode::DirectXi, Mode::DirectGamma, Mode::TransformedXi, Mode::TransformedGamma, Mode::Repetitive})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

/// Modes that learn through Γ(k) e_l(k+1) with Ξ ≡ 0.
inline bool uses_gamma(Mode m) {
    return m == Mode::DirectGamma || m == Mode::TransformedGamma || m == Mode::Repetitive;
}

inline bool is_transformed(Mode m) { return m == Mode::TransformedXi || m == Mode::TransformedGamma; }

struct Gains {
    MatrixSchedule Xi;     // m x p
    MatrixSchedule Gamma;  // m x p
};

enum class TrajectoryRecording { None, Final, All };

struct IlcConfig {
    Mode mode = Mode::DirectXi;
    std::size_t iterations = 300;
    std::vector<Mat> u0;  // N+1 inputs; empty means u0 ≡ 0
    std::size_t record_every = 1;
    TrajectoryRecording record = TrajectoryRecording::Final;
    bool residuals = true;
};

struct IterationMetrics {
    std::size_t l = 0;
    double E = 0.0;  // max_k ‖e_l(k)‖∞
    double U = 0.0;  // max_k ‖u_l(k)‖∞
    // identities linking iteration l to l+1; absent on the last iteration
    std::optional<double> res_state, res_eq27, res_eq17;
};

/// Everything logged for one trial.
struct TrialRecord {
    std::size_t l = 0;
    std::vector<Mat> u, x, y, e, r;
    std::vector<Mat> u1star, u2star;  // transformed modes only
};

struct RunResult {
    Mode mode = Mode::DirectXi;
    UncertaintySpec uncertainty;  // as actually applied
    std::vector<IterationMetrics> metrics;
    std::vector<TrialRecord> trajectories;
    TrialRecord final_trial;
    double converged_value = 0.0;
    double max_u2_drift = 0.0;  // transformed modes: max ‖u2*_l − u2*_0‖∞ over stored values
    std::vector<std::string> warnings;

    double max_residual_eq27() const { return max_of(&IterationMetrics::res_eq27); }
    double max_residual_eq17() const { return max_of(&IterationMetrics::res_eq17); }
    double max_residual_state() const { return max_of(&IterationMetrics::res_state); }

private:
    double max_of(std::optional<double> IterationMetrics::*field) const {
        double best = 0.0;
        for (const auto& m : metrics)
            if ((m.*field).has_value()) best = std::max(best, *(m.*field));
        return best;
    }
};

/// One step of the update law. The Γ term is dropped at k = N.
inline std::vector<Mat> update_input(std::span<const Mat> u, std::span<const Mat> e, const MatrixSchedule& Xi,
                                     const MatrixSchedule& Gamma) {
    if (u.size() != e.size() || u.empty()) throw DimensionMismatch("update_input: u and e lengths differ");
    const int N = static_cast<int>(u.size()) - 1;
    if (Xi.horizon() < N || Gamma.horizon() < N) throw DimensionMismatch("update_input: gain horizon too short");
    std::vector<Mat> next(u.begin(), u.end());
    for (int k = 0; k <= N; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        next[kk] += Xi[k] * e[kk];
        if (k < N) next[kk] += Gamma[k] * e[kk + 1];
    }
    return next;
}

struct RecursionResiduals {
    double state = 0.0;  // propagated state difference vs logged difference
    double eq27 = 0.0;  // error recursion
    double eq17 = 0.0;  // input recursion
};

/// Residuals of the algebraic identities linking trial l to trial l+1.
///
/// State difference, with Δ(·) = (·)_{l+1} − (·)_l:
///   Δx(k+1) = A_l Δx(k) + ΔA x_{l+1}(k) + B_l Δu(k) + ΔB u_{l+1}(k) + Δw(k)
/// Error:
///   e_{l+1}(k) = (I − D_l Ξ) e_l(k) − D_l Γ e_l(k+1) + τ_l(k)
///   τ_l(k) = −C_l Δx(k) − ΔC x_{l+1}(k) − ΔD u_{l+1}(k) + Δr(k) − Δv(k)
/// Input:
///   u_{l+1}(k) = (I − Ξ D_l) u_l(k) − Γ D_l(k+1) u_l(k+1) + ζ_l(k)
///   ζ_l(k) = Ξ [r_l − C_l x_l − v_l](k) + Γ [r_l − C_l x_l − v_l](k+1)
/// Γ terms vanish at k = N. Δx is propagated, not read from the log.
inline RecursionResiduals recursion_residuals(const RealizedIteration& cur, const RealizedIteration& nxt,
                                              const TrialRecord& a, const TrialRecord& b, const Gains& g) {
    const int N = cur.horizon();
    RecursionResiduals res;
    Mat dx = b.x[0] - a.x[0];
    for (int k = 0; k <= N; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        const Mat& Xi = g.Xi[k];
        const Mat& Ga = g.Gamma[k];
        const std::size_t m = Xi.rows();

        res.state = std::max(res.state, inf_norm(dx - (b.x[kk] - a.x[kk])));

        Mat du = Xi * a.e[kk];
        if (k < N) du += Ga * a.e[kk + 1];

        const Mat tau = -(cur.C[kk] * dx) - (nxt.C[kk] - cur.C[kk]) * b.x[kk] - (nxt.D[kk] - cur.D[kk]) * b.u[kk] +
                        (nxt.r[kk] - cur.r[kk]) - (nxt.v[kk] - cur.v[kk]);
        Mat e_pred = a.e[kk] - cur.D[kk] * (Xi * a.e[kk]) + tau;
        if (k < N) e_pred -= cur.D[kk] * (Ga * a.e[kk + 1]);
        res.eq27 = std::max(res.eq27, inf_norm(b.e[kk] - e_pred));

        const Mat drive = cur.r[kk] - cur.C[kk] * a.x[kk] - cur.v[kk];
        Mat u_pred = (Mat::identity(m) - Xi * cur.D[kk]) * a.u[kk] + Xi * drive;
        if (k < N) {
            const Mat drive_next = cur.r[kk + 1] - cur.C[kk + 1] * a.x[kk + 1] - cur.v[kk + 1];
            u_pred += Ga * drive_next - Ga * (cur.D[kk + 1] * a.u[kk + 1]);
        }
        res.eq17 = std::max(res.eq17, inf_norm(b.u[kk] - u_pred));

        if (k < N) {
            dx = cur.A[kk] * dx + (nxt.A[kk] - cur.A[kk]) * b.x[kk] + cur.B[kk] * du + (nxt.B[kk] - cur.B[kk]) * b.u[kk] +
                 (nxt.w[kk] - cur.w[kk]);
        }
    }
    return res;
}

namespace detail {

inline std::vector<Mat> initial_input(const NominalSystem& sys, const IlcConfig& cfg) {
    if (cfg.u0.empty()) return std::vector<Mat>(static_cast<std::size_t>(sys.N) + 1, Mat(sys.m, 1));
    if (cfg.u0.size() != static_cast<std::size_t>(sys.N) + 1) {
        throw DimensionMismatch("IlcConfig: u0 must have N+1 entries");
    }
    for (const auto& u : cfg.u0)
        if (u.rows() != sys.m || u.cols() != 1) throw DimensionMismatch("IlcConfig: u0 entries must be m x 1");
    return cfg.u0;
}

/// Gains with the unused one zeroed for the chosen mode.
inline Gains effective_gains(const NominalSystem& sys, const Gains& g, Mode mode) {
    const auto zero = MatrixSchedule::zeros(sys.m, sys.p, sys.N);
    auto check = [&](const MatrixSchedule& s, const char* name) {
        if (s.rows() != sys.m || s.cols() != sys.p || s.horizon() != sys.N) {
            throw DimensionMismatch(std::string("gain ") + name + " must be m x p over the horizon");
        }
    };
    if (uses_gamma(mode)) {
        check(g.Gamma, "Gamma");
        return {zero, g.Gamma};
    }
    check(g.Xi, "Xi");
    return {g.Xi, zero};
}

inline UncertaintySpec effective_uncertainty(const NominalSystem& sys, const UncertaintySpec& unc, Mode mode) {
    if (!uses_gamma(mode)) return unc;
    if (!sys.D.is_zero()) throw ModelMismatch(std::string(to_string(mode)) + " requires D(k) = 0");
    if (mode == Mode::Repetitive) {
        UncertaintySpec clean = unc;
        clean.amp = Amplitudes{};
        clean.structured_D.reset();
        return clean;
    }
    if (unc.amp.B != 0 || unc.amp.C != 0 || unc.amp.D != 0 || unc.structured_D) {
        throw ModelMismatch(std::string(to_string(mode)) + " requires repetitive B, C and D = 0");
    }
    return unc;
}

inline void precheck(const NominalSystem& sys, const Gains& g, Mode mode, RunResult& result) {
    const ConditionReport rep =
        uses_gamma(mode) ? check_rho_CBGamma(sys.B, sys.C, g.Gamma) : check_rho_DXi(sys.D, g.Xi);
    if (!rep.satisfied) {
        std::string msg = "convergence condition " + rep.name + " fails at k=" + std::to_string(rep.worst_k) +
                          " (value " + std::to_string(rep.worst) + "); running anyway";
        log::warn(msg);
        result.warnings.push_back(std::move(msg));
    }
}

/// Collects metrics, residuals and recorded trials as the loop advances.
class Recorder {
public:
    Recorder(const NominalSystem& sys, const Gains& gains, const IlcConfig& cfg, RunResult& out)
        : sys_(sys), gains_(gains), cfg_(cfg), out_(out) {}

    void add(RealizedIteration it, TrialRecord rec) {
        IterationMetrics m;
        m.l = rec.l;
        const bool gamma = uses_gamma(cfg_.mode);
        const int N = sys_.N;
        for (int k = gamma ? 1 : 0; k <= N; ++k) m.E = std::max(m.E, inf_norm(rec.e[static_cast<std::size_t>(k)]));
        for (int k = 0; k <= (gamma ? N - 1 : N); ++k)
            m.U = std::max(m.U, inf_norm(rec.u[static_cast<std::size_t>(k)]));
        if (!std::isfinite(m.E) || !std::isfinite(m.U)) throw NonFinite("run: metrics left the finite range", rec.l);

        if (cfg_.residuals && prev_) {
            const auto r = recursion_residuals(prev_it_, it, *prev_, rec, gains_);
            auto& last = out_.metrics.back();
            last.res_state = r.state;
            last.res_eq27 = r.eq27;
            last.res_eq17 = r.eq17;
        }
        out_.metrics.push_back(m);

        if (cfg_.record == TrajectoryRecording::All && rec.l % std::max<std::size_t>(cfg_.record_every, 1) == 0) {
            out_.trajectories.push_back(rec);
        }
        prev_it_ = std::move(it);
        prev_ = std::move(rec);
    }

    void finish() {
        if (prev_ && cfg_.record != TrajectoryRecording::None) out_.final_trial = *prev_;
        const std::size_t L = out_.metrics.size();
        const std::size_t tail = std::max<std::size_t>(1, (L + 9) / 10);
        out_.converged_value = 0.0;
        for (std::size_t i = L - std::min(tail, L); i < L; ++i)
            out_.converged_value = std::max(out_.converged_value, out_.metrics[i].E);
    }

private:
    const NominalSystem& sys_;
    const Gains& gains_;
    const IlcConfig& cfg_;
    RunResult& out_;
    RealizedIteration prev_it_;
    std::optional<TrialRecord> prev_;
};

}  // namespace detail

/// Transformed loop: only u1* is learned; u2* keeps its l = 0 value and the
/// trial runs on the equivalent square system.
inline RunResult run_transformed(const NominalSystem& sys, const UncertaintySpec& unc, const Gains& gains,
                                 const SetTransform& t, const IlcConfig& cfg) {
    sys.validate();
    const bool gamma = t.kind == TransformKind::P;
    if (!is_transformed(cfg.mode) || uses_gamma(cfg.mode) != gamma) {
        throw ModelMismatch("run_transformed: mode " + std::string(to_string(cfg.mode)) +
                            " does not match the transform kind");
    }
    RunResult result;
    result.mode = cfg.mode;
    result.uncertainty = detail::effective_uncertainty(sys, unc, cfg.mode);
    const Gains g = detail::effective_gains(sys, gains, cfg.mode);
    const auto u0 = detail::initial_input(sys, cfg);
    const int N = sys.N;
    const int last = gamma ? N - 1 : N;

    std::vector<Mat> u1(static_cast<std::size_t>(N) + 1), u2(static_cast<std::size_t>(N) + 1);
    for (int k = 0; k <= last; ++k) {
        auto [a, b] = split_input(t, u0[static_cast<std::size_t>(k)], k);
        u1[static_cast<std::size_t>(k)] = std::move(a);
        u2[static_cast<std::size_t>(k)] = std::move(b);
    }
    if (gamma) {
        // k = N carries no transform; its input never changes
        u1.back() = Mat(sys.p, 1);
        u2.back() = Mat(sys.m - sys.p, 1);
    }
    const std::vector<Mat> u2_initial = u2;

    detail::Recorder rec(sys, g, cfg, result);
    for (std::size_t l = 0; l < cfg.iterations; ++l) {
        RealizedIteration it = sample_iteration(sys, result.uncertainty, l);
        const TransformedSystem ts = gamma ? transform_coupled(sys, it, t, u0) : transform_feedthrough(it, t, u0);
        Trajectory tr = simulate_transformed(it, ts, u1);

        TrialRecord trial;
        trial.l = l;
        trial.u.reserve(u1.size());
        for (int k = 0; k <= N; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            trial.u.push_back(k <= last ? merge_input(t, u1[kk], u2[kk], k) : u0[kk]);
            result.max_u2_drift = std::max(result.max_u2_drift, max_abs(u2[kk] - u2_initial[kk]));
        }
        trial.x = std::move(tr.x);
        trial.y = std::move(tr.y);
        trial.e = std::move(tr.e);
        trial.r = it.r;
        trial.u1star = u1;
        trial.u2star = u2;

        for (int k = 0; k <= last; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            u1[kk] += ts.gain_star[kk] * trial.e[gamma ? kk + 1 : kk];
            if (!u1[kk].all_finite()) throw NonFinite("run_transformed: input diverged", l);
        }
        rec.add(std::move(it), std::move(trial));
    }
    rec.finish();
    return result;
}

/// Runs the loop in the configured mode; transformed modes build their
/// transform from the nominal plant and delegate to run_transformed.
inline RunResult run(const NominalSystem& sys, const UncertaintySpec& unc, const Gains& gains, const IlcConfig& cfg) {
    sys.validate();
    if (cfg.mode == Mode::TransformedXi) {
        return run_transformed(sys, unc, gains, build_q_transform(sys.D, gains.Xi), cfg);
    }
    if (cfg.mode == Mode::TransformedGamma) {
        return run_transformed(sys, unc, gains, build_p_transform(sys.B, sys.C, gains.Gamma), cfg);
    }
    RunResult result;
    result.mode = cfg.mode;
    result.uncertainty = detail::effective_uncertainty(sys, unc, cfg.mode);
    const Gains g = detail::effective_gains(sys, gains, cfg.mode);
    detail::precheck(sys, g, cfg.mode, result);

    std::vector<Mat> u = detail::initial_input(sys, cfg);
    detail::Recorder rec(sys, g, cfg, result);
    for (std::size_t l = 0; l < cfg.iterations; ++l) {
        RealizedIteration it = sample_iteration(sys, result.uncertainty, l);
        Trajectory tr = simulate(it, u);
        std::vector<Mat> next = update_input(u, tr.e, g.Xi, g.Gamma);
        for (const auto& uk : next)
            if (!uk.all_finite()) throw NonFinite("run: input diverged", l);

        TrialRecord trial;
        trial.l = l;
        trial.u = std::move(u);
        trial.x = std::move(tr.x);
        trial.y = std::move(tr.y);
        trial.e = std::move(tr.e);
        trial.r = it.r;
        rec.add(std::move(it), std::move(trial));
        u = std::move(next);
    }
    rec.finish();
    return result;
}

namespace detail {

inline RecursionResiduals replay_residuals(const NominalSystem& sys, const RunResult& run, const Gains& gains) {
    if (run.trajectories.size() < 2) {
        throw MissingData("recursion check needs consecutive trials recorded with TrajectoryRecording::All");
    }
    const Gains g = effective_gains(sys, gains, run.mode);
    RecursionResiduals worst;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i + 1 < run.trajectories.size(); ++i) {
        const auto& a = run.trajectories[i];
        const auto& b = run.trajectories[i + 1];
        if (b.l != a.l + 1) continue;
        const auto r = recursion_residuals(sample_iteration(sys, run.uncertainty, a.l),
                                           sample_iteration(sys, run.uncertainty, b.l), a, b, g);
        worst.state = std::max(worst.state, r.state);
        worst.eq27 = std::max(worst.eq27, r.eq27);
        worst.eq17 = std::max(worst.eq17, r.eq17);
        ++pairs;
    }
    if (pairs == 0) throw MissingData("recursion check found no consecutive recorded trials");
    return worst;
}

}  // namespace detail

/// Replays the error recursion (and the state-difference recursion feeding
/// it) over a recorded run; realizations are regenerated from the seed.
inline RecursionResiduals verify_error_recursion(const NominalSystem& sys, const RunResult& run,
                                                 const Gains& gains) {
    auto r = detail::replay_residuals(sys, run, gains);
    r.eq17 = 0.0;
    return r;
}

/// Replays the input recursion over a recorded run.
inline double verify_input_recursion(const NominalSystem& sys, const RunResult& run, const Gains& gains) {
    return detail::replay_residuals(sys, run, gains).eq17;
}

/// Learned input in the limit: P⁻¹(k)[u1*∞(k); [P21 P22] u0(k)] for
/// k = 0..N-1; u(N) stays at u0(N).
inline std::vector<Mat> limit_input(const PTransform& pt, std::span<const Mat> u0, std::span<const Mat> u1star_inf) {
    const int N = pt.last_k + 1;
    if (u0.size() != static_cast<std::size_t>(N) + 1 || u1star_inf.size() < static_cast<std::size_t>(N)) {
        throw DimensionMismatch("limit_input: sequence lengths do not match the transform horizon");
    }
    std::vector<Mat> out;
    out.reserve(u0.size());
    for (int k = 0; k < N; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        const Mat frozen = split_input(pt, u0[kk], k).second;
        out.push_back(merge_input(pt, u1star_inf[kk], frozen, k));
    }
    out.push_back(u0.back());
    return out;
}

/// limit_input with u1*∞ read from the last trial of a converged run.
inline std::vector<Mat> limit_input_from_run(const PTransform& pt, const RunResult& run, std::span<const Mat> u0,
                                             double threshold = 1e-9) {
    if (run.metrics.empty() || !(run.metrics.back().E < threshold)) {
        throw NotConverged("limit_input: final error " +
                           std::to_string(run.metrics.empty() ? INFINITY : run.metrics.back().E) +
                           " is not below " + std::to_string(threshold));
    }
    if (run.final_trial.u.empty()) throw MissingData("limit_input: final trial was not recorded");
    std::vector<Mat> u1;
    for (int k = 0; k <= pt.last_k; ++k) u1.push_back(split_input(pt, run.final_trial.u[static_cast<std::size_t>(k)], k).first);
    return limit_input(pt, u0, u1);
}

}  // namespace ilcset
