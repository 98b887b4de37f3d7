#pragma once

// CSV emission for run metrics and trajectories. Numbers use the shortest
// round-trip form so identical runs give identical bytes.

#include <optional>
#include <ostream>
#include <string>

#include "ilcset/expr.hpp"
#include "ilcset/ilc_engine.hpp"

namespace ilcset::csv {

inline constexpr const char* metrics_header = "l,E_inf,U_inf,res_eq27,res_eq17";

inline std::string num(double x) { return detail::format_number(x); }

inline std::string opt(const std::optional<double>& x) { return x ? num(*x) : std::string(); }

/// One row per iteration. `prefix` is prepended verbatim (e.g. "7," for a
/// seed column in sweeps).
inline void write_metric_rows(std::ostream& os, const RunResult& r, const std::string& prefix = {}) {
    for (const auto& m : r.metrics) {
        os << prefix << m.l << ',' << num(m.E) << ',' << num(m.U) << ',' << opt(m.res_eq27) << ','
           << opt(m.res_eq17) << "\r\n";
    }
}

inline void write_metrics(std::ostream& os, const RunResult& r) {
    os << metrics_header << "\r\n";
    write_metric_rows(os, r);
}

inline std::string trajectory_header(std::size_t p, bool with_l) {
    std::string h = with_l ? "l,k" : "k";
    for (const char* name : {"y", "r", "e"})
        for (std::size_t i = 1; i <= p; ++i) h += "," + std::string(name) + std::to_string(i);
    return h;
}

inline void write_trial(std::ostream& os, const TrialRecord& t, bool with_l) {
    for (std::size_t k = 0; k < t.y.size(); ++k) {
        if (with_l) os << t.l << ',';
        os << k;
        for (const auto* seq : {&t.y, &t.r, &t.e}) {
            const Mat& v = (*seq)[k];
            for (std::size_t i = 0; i < v.rows(); ++i) os << ',' << num(v(i, 0));
        }
        os << "\r\n";
    }
}

/// Final-iteration trajectory, or every recorded trial with an l column.
inline void write_trajectories(std::ostream& os, const RunResult& r, std::size_t p, bool all) {
    os << trajectory_header(p, all) << "\r\n";
    if (all) {
        for (const auto& t : r.trajectories) write_trial(os, t, true);
    } else if (!r.final_trial.y.empty()) {
        write_trial(os, r.final_trial, false);
    }
}

}  // namespace ilcset::csv
