// ilcset: command-line front end for the learning-control library.
//
//   ilcset run       --preset example1 --iterations 300 --out m.csv
//   ilcset check     --preset example2 --require eq29
//   ilcset transform --preset example1 --out q.json
//
// Exit codes: 0 ok, 1 failed condition or divergence, 2 configuration error.

#include <cstdio>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ilcset/conditions.hpp"
#include "ilcset/config.hpp"
#include "ilcset/csv.hpp"
#include "ilcset/ilc_engine.hpp"
#include "ilcset/log.hpp"
#include "ilcset/set_transform.hpp"

using namespace ilcset;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failed = 1;
constexpr int exit_config = 2;

struct Common {
    std::string config;
    std::string preset;
    std::optional<std::size_t> iterations;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string mode;
};

struct RunOpts {
    std::string record = "final";
    std::string trajectories_out;
    std::size_t record_every = 1;
    bool verify_set = false;
    std::string sweep;
};

struct CheckOpts {
    std::vector<std::string> require;
    bool require_all = false;
    bool per_k = false;
};

void add_common(CLI::App* cmd, Common& c) {
    auto* cfg = cmd->add_option("--config", c.config, "JSON experiment configuration")->check(CLI::ExistingFile);
    auto* pre = cmd->add_option("--preset", c.preset, "built-in experiment")
                    ->check(CLI::IsMember(preset_names()));
    cfg->excludes(pre);
    cmd->add_option("--iterations", c.iterations, "number of trials L (default 300)")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", c.seed, "uncertainty seed (default 42)");
    cmd->add_option("--out", c.out, "output file (default stdout)");
    cmd->add_option("--mode", c.mode, "override the update mode")
        ->check(CLI::IsMember({"direct-xi", "direct-gamma", "transformed-xi", "transformed-gamma", "repetitive"}));
}

ExperimentConfig load(const Common& c) {
    if (c.config.empty() && c.preset.empty()) throw SchemaError("one of --config or --preset is required");
    ExperimentConfig cfg = c.config.empty() ? load_preset(c.preset) : load_config(c.config);
    if (c.iterations) cfg.run.iterations = *c.iterations;
    if (c.seed) cfg.uncertainty.seed = *c.seed;
    if (!c.mode.empty()) cfg.run.mode = *parse_mode(c.mode);
    if (!c.out.empty()) cfg.out = c.out;
    if (uses_gamma(cfg.run.mode) && !cfg.has_gamma) throw SchemaError("mode " + std::string(to_string(cfg.run.mode)) + " needs a Gamma gain");
    if (!uses_gamma(cfg.run.mode) && !cfg.has_xi) throw SchemaError("mode " + std::string(to_string(cfg.run.mode)) + " needs a Xi gain");
    return cfg;
}

/// Writes through a temp string so partial output never reaches the file.
void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write '" + path + "'");
    f << text;
    if (!f) throw IoError("write failed for '" + path + "'");
}

std::pair<std::uint64_t, std::uint64_t> parse_sweep(const std::string& s) {
    static const std::regex re(R"(seeds=(\d+)\.\.(\d+))");
    std::smatch m;
    if (!std::regex_match(s, m, re)) throw SchemaError("--sweep expects seeds=a..b, got '" + s + "'");
    const auto a = std::stoull(m[1].str());
    const auto b = std::stoull(m[2].str());
    if (b < a) throw SchemaError("--sweep range is empty");
    if (b - a >= 10000) throw SchemaError("--sweep range is too large");
    return {a, b};
}

double set_gap(const RunResult& a, const RunResult& b) {
    double gap = 0.0;
    for (std::size_t i = 0; i < std::min(a.trajectories.size(), b.trajectories.size()); ++i) {
        const auto& ya = a.trajectories[i].y;
        const auto& yb = b.trajectories[i].y;
        for (std::size_t k = 0; k < ya.size(); ++k) gap = std::max(gap, inf_norm(ya[k] - yb[k]));
    }
    return gap;
}

int cmd_run(const Common& c, const RunOpts& o) {
    ExperimentConfig cfg = load(c);
    if (o.record == "all") {
        cfg.run.record = TrajectoryRecording::All;
    } else if (o.record == "none") {
        cfg.run.record = TrajectoryRecording::None;
    } else {
        cfg.run.record = TrajectoryRecording::Final;
    }
    cfg.run.record_every = o.record_every;
    if (!o.trajectories_out.empty()) cfg.trajectories_out = o.trajectories_out;

    if (!o.sweep.empty()) {
        const auto [first, last] = parse_sweep(o.sweep);
        cfg.run.record = TrajectoryRecording::None;
        // fan out in batches; results are merged in seed order
        const std::size_t width = std::max(1u, std::thread::hardware_concurrency());
        std::ostringstream os;
        os << "seed," << csv::metrics_header << "\r\n";
        for (auto batch = first; batch <= last; batch += width) {
            const auto end = std::min<std::uint64_t>(last, batch + width - 1);
            std::vector<std::future<RunResult>> jobs;
            for (auto s = batch; s <= end; ++s) {
                UncertaintySpec unc = cfg.uncertainty;
                unc.seed = s;
                jobs.push_back(std::async(std::launch::async, [&cfg, unc] {
                    return run(cfg.system, unc, cfg.gains, cfg.run);
                }));
            }
            for (auto s = batch; s <= end; ++s) csv::write_metric_rows(os, jobs[s - batch].get(), std::to_string(s) + ",");
        }
        emit(cfg.out, os.str());
        return exit_ok;
    }

    IlcConfig direct_cfg = cfg.run;
    if (o.verify_set) direct_cfg.record = TrajectoryRecording::All;
    const RunResult result = run(cfg.system, cfg.uncertainty, cfg.gains, direct_cfg);

    std::ostringstream os;
    csv::write_metrics(os, result);
    emit(cfg.out, os.str());

    if (!cfg.trajectories_out.empty() && cfg.run.record != TrajectoryRecording::None) {
        std::ostringstream ts;
        csv::write_trajectories(ts, result, cfg.system.p, cfg.run.record == TrajectoryRecording::All);
        emit(cfg.trajectories_out, ts.str());
    }
    log::info("converged value " + csv::num(result.converged_value));

    if (o.verify_set) {
        if (is_transformed(cfg.run.mode) || cfg.run.mode == Mode::Repetitive) {
            throw SchemaError("--verify-set needs a direct mode");
        }
        IlcConfig tcfg = direct_cfg;
        tcfg.mode = uses_gamma(cfg.run.mode) ? Mode::TransformedGamma : Mode::TransformedXi;
        const RunResult tr = run(cfg.system, cfg.uncertainty, cfg.gains, tcfg);
        const double gap = set_gap(result, tr);
        std::cerr << "set equivalence: max output gap " << csv::num(gap) << ", frozen-channel drift "
                  << csv::num(tr.max_u2_drift) << "\n";
        if (!(gap <= 1e-9) || tr.max_u2_drift != 0.0) return exit_failed;
    }
    return exit_ok;
}

std::vector<ConditionReport> applicable_conditions(const ExperimentConfig& cfg) {
    const auto& s = cfg.system;
    std::vector<ConditionReport> out;
    if (cfg.has_xi) {
        out.push_back(check_rho_DXi(s.D, cfg.gains.Xi));
        out.push_back(check_rho_XiD(s.D, cfg.gains.Xi));
        const StructuredD sd = cfg.uncertainty.structured_D
                                   ? *cfg.uncertainty.structured_D
                                   : covering_structured_D(s.p, s.m, s.N, cfg.uncertainty.amp.D);
        out.push_back(check_lmi(s.D, cfg.gains.Xi, sd.E, sd.F));
    }
    if (cfg.has_gamma) {
        out.push_back(check_rho_CBGamma(s.B, s.C, cfg.gains.Gamma));
        out.push_back(check_rho_GammaCB(s.B, s.C, cfg.gains.Gamma));
    }
    return out;
}

int cmd_check(const Common& c, const CheckOpts& o) {
    const ExperimentConfig cfg = load(c);
    const auto reports = applicable_conditions(cfg);

    std::vector<std::string> required = o.require;
    if (o.require_all) {
        for (const auto& r : reports) required.push_back(r.name);
    } else if (required.empty()) {
        required.push_back(uses_gamma(cfg.run.mode) ? "eq29" : "eq8");
    }
    for (const auto& name : required) {
        const bool known = std::any_of(reports.begin(), reports.end(), [&](const auto& r) { return r.name == name; });
        if (!known) throw SchemaError("--require " + name + ": condition not applicable to this configuration");
    }

    std::ostringstream os;
    os << std::left << std::setw(6) << "name" << std::right << std::setw(9) << "worst_k" << std::setw(24) << "value"
       << std::setw(24) << "margin" << "  verdict\n";
    for (const auto& r : reports) {
        os << std::left << std::setw(6) << r.name << std::right << std::setw(9) << r.worst_k << std::setw(24)
           << csv::num(r.worst) << std::setw(24) << csv::num(r.margin) << "  "
           << (r.satisfied ? "satisfied" : "violated") << "\n";
    }
    if (o.per_k) {
        os << "\nname,k,value,verdict\n";
        for (const auto& r : reports)
            for (const auto& s : r.per_k)
                os << r.name << ',' << s.k << ',' << csv::num(s.value) << ','
                   << (s.value < r.threshold ? "satisfied" : "violated") << "\n";
    }
    emit(c.out, os.str());

    bool ok = true;
    for (const auto& r : reports)
        if (std::find(required.begin(), required.end(), r.name) != required.end() && !r.satisfied) ok = false;
    return ok ? exit_ok : exit_failed;
}

nlohmann::json to_json(const Mat& m) {
    auto rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

int cmd_transform(const Common& c) {
    const ExperimentConfig cfg = load(c);
    const auto& s = cfg.system;
    const bool gamma = uses_gamma(cfg.run.mode);
    const SetTransform t = gamma ? build_p_transform(s.B, s.C, cfg.gains.Gamma) : build_q_transform(s.D, cfg.gains.Xi);

    UncertaintySpec nominal;
    nominal.seed = cfg.uncertainty.seed;
    const RealizedIteration it = sample_iteration(s, nominal, 0);
    const std::vector<Mat> u0 = cfg.run.u0.empty() ? std::vector<Mat>(static_cast<std::size_t>(s.N) + 1, Mat(s.m, 1))
                                                   : cfg.run.u0;
    const TransformedSystem ts = gamma ? transform_coupled(s, it, t, u0) : transform_feedthrough(it, t, u0);

    nlohmann::json doc;
    doc["kind"] = gamma ? "P" : "Q";
    doc["fixed_permutation"] = t.fixed_permutation;
    doc["coupling_residual"] = ts.coupling_residual;
    auto& steps = doc["steps"];
    for (int k = 0; k <= t.last_k; ++k) {
        const auto& st = t.at(k);
        const auto kk = static_cast<std::size_t>(k);
        nlohmann::json j;
        j["permutation"] = st.perm;
        j["T11"] = to_json(st.T11);
        j["T12"] = to_json(st.T12);
        j["T21"] = to_json(st.T21);
        j["T22"] = to_json(st.T22);
        j["inverse"] = to_json(t.assembled_inverse(k));
        j["identity_residual"] = identity_residual(t.assembled(k) * t.assembled_inverse(k));
        j["gain_star"] = to_json(ts.gain_star[kk]);
        j["Bstar"] = to_json(ts.Bstar[kk]);
        j["wstar"] = to_json(ts.wstar[kk]);
        if (!ts.Dstar.empty()) j["Dstar"] = to_json(ts.Dstar[kk]);
        if (kk < ts.vstar.size()) j["vstar"] = to_json(ts.vstar[kk]);
        steps[std::to_string(k)] = std::move(j);
    }
    emit(cfg.out, doc.dump(2) + "\n");
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Iterative learning control with nonrepetitive uncertainty"};
    app.require_subcommand(1);

    Common common;
    RunOpts run_opts;
    CheckOpts check_opts;

    auto* run_cmd = app.add_subcommand("run", "run the learning loop and write per-iteration metrics CSV");
    add_common(run_cmd, common);
    run_cmd->add_option("--record-trajectories", run_opts.record, "which trials to keep")
        ->check(CLI::IsMember({"final", "all", "none"}));
    run_cmd->add_option("--record-every", run_opts.record_every, "keep every n-th trial with 'all'")
        ->check(CLI::PositiveNumber);
    run_cmd->add_option("--trajectories-out", run_opts.trajectories_out, "trajectory CSV path");
    run_cmd->add_flag("--verify-set", run_opts.verify_set,
                      "also run the transformed loop and compare outputs (fails above 1e-9)");
    run_cmd->add_option("--sweep", run_opts.sweep, "seeds=a..b, one run per seed, merged by seed");

    auto* check_cmd = app.add_subcommand("check", "report convergence conditions");
    add_common(check_cmd, common);
    check_cmd->add_option("--require", check_opts.require, "condition that must hold (eq5, eq8, eq19, eq29, eq34)");
    check_cmd->add_flag("--require-all", check_opts.require_all, "every reported condition must hold");
    check_cmd->add_flag("--per-k", check_opts.per_k, "also list every time step");

    auto* transform_cmd = app.add_subcommand("transform", "dump transform blocks and transformed matrices per k");
    add_common(transform_cmd, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_config;
    }

    try {
        if (*run_cmd) return cmd_run(common, run_opts);
        if (*check_cmd) return cmd_check(common, check_opts);
        return cmd_transform(common);
    } catch (const NonFinite& e) {
        log::error(std::string(e.what()) + " (iteration " + std::to_string(e.iteration()) + ")");
        return exit_failed;
    } catch (const ConditionViolated& e) {
        log::error(e.what());
        return exit_failed;
    } catch (const NoConvergence& e) {
        log::error(e.what());
        return exit_failed;
    } catch (const Error& e) {
        log::error(e.what());
        return exit_config;
    }
}
