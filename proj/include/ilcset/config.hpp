#pragma once

// JSON experiment configuration and the built-in presets.
//
// {
//   "schema_version": 1,
//   "system": { "n", "m", "p", "N", "A", "B", "C", "D"?, "w", "v", "r", "x0" },
//   "uncertainty": { "amp": { "A", "B", "C", "D", "w", "v", "r", "x0" },
//                    "structured_D": { "E", "F" }?, "seed" },
//   "gains": { "Xi"?, "Gamma"? },
//   "run": { "mode", "iterations", "u0"?, "record_every"?, "record_trajectories"?,
//            "out"?, "trajectories_out"? }
// }
//
// Matrix fields are arrays of rows; vector fields (w, v, r, x0, u0) may be
// flat arrays. Cells are expression strings or plain numbers.

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ilcset/errors.hpp"
#include "ilcset/ilc_engine.hpp"
#include "ilcset/plant.hpp"
#include "ilcset/schedule.hpp"

namespace ilcset {

inline constexpr int config_schema_version = 1;

struct ExperimentConfig {
    NominalSystem system;
    UncertaintySpec uncertainty;
    Gains gains;
    bool has_xi = false;
    bool has_gamma = false;
    IlcConfig run;
    std::string out;
    std::string trajectories_out;
};

namespace detail {

using nlohmann::json;

class ConfigReader {
public:
    explicit ConfigReader(const json& doc) : doc_(doc) {}

    ExperimentConfig read() {
        ExperimentConfig cfg;
        if (!doc_.is_object()) {
            fail("", "document must be a JSON object");
            finish();
        }
        const int version = integer(doc_, "/schema_version", "schema_version", 1, 1);
        if (version != config_schema_version) {
            fail("/schema_version", "unsupported version " + std::to_string(version));
        }
        const json* sys = object(doc_, "/system", "system", true);
        const json* unc = object(doc_, "/uncertainty", "uncertainty", false);
        const json* gains = object(doc_, "/gains", "gains", true);
        const json* run = object(doc_, "/run", "run", false);
        finish();

        auto& s = cfg.system;
        s.n = static_cast<std::size_t>(integer(*sys, "/system/n", "n", 1));
        s.m = static_cast<std::size_t>(integer(*sys, "/system/m", "m", 1));
        s.p = static_cast<std::size_t>(integer(*sys, "/system/p", "p", 1));
        s.N = integer(*sys, "/system/N", "N", 1);
        finish();
        if (s.p > s.m) fail("/system/p", "p must not exceed m");

        const int N = s.N;
        s.A = schedule(*sys, "/system", "A", s.n, s.n, N, true);
        s.B = schedule(*sys, "/system", "B", s.n, s.m, N, true);
        s.C = schedule(*sys, "/system", "C", s.p, s.n, N, true);
        s.D = schedule(*sys, "/system", "D", s.p, s.m, N, false);
        s.w = schedule(*sys, "/system", "w", s.n, 1, N, true);
        s.v = schedule(*sys, "/system", "v", s.p, 1, N, true);
        s.r = schedule(*sys, "/system", "r", s.p, 1, N, true);
        s.x0 = schedule(*sys, "/system", "x0", s.n, 1, 1, true)[0];

        if (unc) read_uncertainty(*unc, s, cfg.uncertainty);

        cfg.has_xi = gains->contains("Xi");
        cfg.has_gamma = gains->contains("Gamma");
        if (!cfg.has_xi && !cfg.has_gamma) fail("/gains", "at least one of Xi, Gamma is required");
        cfg.gains.Xi = schedule(*gains, "/gains", "Xi", s.m, s.p, N, false);
        cfg.gains.Gamma = schedule(*gains, "/gains", "Gamma", s.m, s.p, N, false);

        cfg.run.mode = cfg.has_xi ? Mode::DirectXi : Mode::DirectGamma;
        if (run) read_run(*run, s, cfg);
        finish();
        return cfg;
    }

private:
    const json& doc_;
    std::vector<std::string> errors_;
    std::size_t parse_errors_ = 0;  // expression parse failures among errors_
    std::size_t first_offset_ = 0;

    void fail(const std::string& path, const std::string& msg) {
        errors_.push_back((path.empty() ? std::string("/") : path) + ": " + msg);
    }

    void finish() const {
        if (errors_.empty()) return;
        std::string msg = "invalid configuration:";
        for (const auto& e : errors_) msg += "\n  " + e;
        // pure expression trouble keeps its own type
        if (parse_errors_ == errors_.size()) throw ParseError(msg, first_offset_);
        throw SchemaError(msg);
    }

    const json* object(const json& parent, const std::string& path, const char* key, bool required) {
        if (!parent.contains(key)) {
            if (required) fail(path, "missing required object");
            return nullptr;
        }
        const json& v = parent.at(key);
        if (!v.is_object()) {
            fail(path, "must be an object");
            return nullptr;
        }
        return &v;
    }

    int integer(const json& parent, const std::string& path, const char* key, int min, int fallback = -1) {
        if (!parent.contains(key)) {
            if (fallback >= 0) return fallback;
            fail(path, "missing required integer");
            return min;
        }
        const json& v = parent.at(key);
        if (!v.is_number_integer() || v.get<long long>() < min || v.get<long long>() > 1'000'000'000) {
            fail(path, "must be an integer >= " + std::to_string(min));
            return min;
        }
        return static_cast<int>(v.get<long long>());
    }

    double number(const json& parent, const std::string& path, const char* key, double fallback) {
        if (!parent.contains(key)) return fallback;
        const json& v = parent.at(key);
        if (!v.is_number() || v.get<double>() < 0.0) {
            fail(path, "must be a nonnegative number");
            return fallback;
        }
        return v.get<double>();
    }

    std::string text(const json& parent, const std::string& path, const char* key, std::string fallback) {
        if (!parent.contains(key)) return fallback;
        const json& v = parent.at(key);
        if (!v.is_string()) {
            fail(path, "must be a string");
            return fallback;
        }
        return v.get<std::string>();
    }

    // Reads a grid of cells. Flat arrays are accepted as column vectors when
    // cols == 1. Returns false (after recording errors) on shape problems.
    bool grid(const json& v, const std::string& path, std::size_t rows, std::size_t cols, TextGrid& out) {
        if (!v.is_array()) {
            fail(path, "must be an array");
            return false;
        }
        const bool flat = cols == 1 && !v.empty() && !v.front().is_array();
        if (v.size() != rows) {
            fail(path, "has " + std::to_string(v.size()) + " rows, expected " + std::to_string(rows) + " (shape " +
                           std::to_string(rows) + "x" + std::to_string(cols) + ")");
            return false;
        }
        out.assign(rows, {});
        bool ok = true;
        for (std::size_t i = 0; i < rows; ++i) {
            const std::string rp = path + "/" + std::to_string(i);
            const json* row_ptr = &v[i];
            json wrapped;
            if (flat) {
                wrapped = json::array({v[i]});
                row_ptr = &wrapped;
            }
            const json& row = *row_ptr;
            if (!row.is_array() || row.size() != cols) {
                fail(rp, "expected a row of " + std::to_string(cols) + " cells");
                ok = false;
                continue;
            }
            for (std::size_t j = 0; j < cols; ++j) {
                const json& cell = row[j];
                if (cell.is_string()) {
                    out[i].push_back(cell.get<std::string>());
                } else if (cell.is_number()) {
                    out[i].push_back(format_number(cell.get<double>()));
                } else {
                    fail(flat ? rp : rp + "/" + std::to_string(j), "cell must be a string or number");
                    ok = false;
                }
            }
        }
        return ok;
    }

    static std::string format_number(double x) {
        std::string s = detail::format_number(x);
        return x < 0 ? "(" + s + ")" : s;
    }

    MatrixSchedule schedule(const json& parent, const std::string& base, const char* key, std::size_t rows,
                            std::size_t cols, int horizon, bool required) {
        const std::string path = base + "/" + key;
        if (!parent.contains(key)) {
            if (required) fail(path, "missing required field");
            return MatrixSchedule::zeros(rows, cols, horizon);
        }
        TextGrid g;
        if (!grid(parent.at(key), path, rows, cols, g)) return MatrixSchedule::zeros(rows, cols, horizon);
        try {
            return build_schedule(g, horizon);
        } catch (const ParseError& e) {
            if (parse_errors_++ == 0) first_offset_ = e.offset();
            fail(path, e.what());
        } catch (const EvalError& e) {
            fail(path, e.what());
        }
        return MatrixSchedule::zeros(rows, cols, horizon);
    }

    void read_uncertainty(const json& unc, const NominalSystem& s, UncertaintySpec& out) {
        if (const json* amp = object(unc, "/uncertainty/amp", "amp", false)) {
            static const char* known[] = {"A", "B", "C", "D", "w", "v", "r", "x0"};
            for (auto it = amp->begin(); it != amp->end(); ++it) {
                if (std::find(std::begin(known), std::end(known), it.key()) == std::end(known))
                    fail("/uncertainty/amp/" + it.key(), "unknown amplitude");
            }
            auto& a = out.amp;
            a.A = number(*amp, "/uncertainty/amp/A", "A", 0.0);
            a.B = number(*amp, "/uncertainty/amp/B", "B", 0.0);
            a.C = number(*amp, "/uncertainty/amp/C", "C", 0.0);
            a.D = number(*amp, "/uncertainty/amp/D", "D", 0.0);
            a.w = number(*amp, "/uncertainty/amp/w", "w", 0.0);
            a.v = number(*amp, "/uncertainty/amp/v", "v", 0.0);
            a.r = number(*amp, "/uncertainty/amp/r", "r", 0.0);
            a.x0 = number(*amp, "/uncertainty/amp/x0", "x0", 0.0);
        }
        if (const json* sd = object(unc, "/uncertainty/structured_D", "structured_D", false)) {
            const json* E = sd->contains("E") ? &sd->at("E") : nullptr;
            std::size_t inner = 0;
            if (E && E->is_array() && !E->empty() && E->front().is_array()) inner = E->front().size();
            if (inner == 0) {
                fail("/uncertainty/structured_D/E", "must be a non-empty p x s grid");
            } else {
                StructuredD d;
                d.E = schedule(*sd, "/uncertainty/structured_D", "E", s.p, inner, s.N, true);
                d.F = schedule(*sd, "/uncertainty/structured_D", "F", inner, s.m, s.N, true);
                out.structured_D = std::move(d);
            }
        }
        if (unc.contains("seed")) {
            const json& v = unc.at("seed");
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
                fail("/uncertainty/seed", "must be a nonnegative integer");
            } else {
                out.seed = v.get<std::uint64_t>();
            }
        }
    }

    void read_run(const json& run, const NominalSystem& s, ExperimentConfig& cfg) {
        if (run.contains("mode")) {
            const std::string m = text(run, "/run/mode", "mode", "");
            if (auto mode = parse_mode(m)) {
                cfg.run.mode = *mode;
            } else {
                fail("/run/mode", "unknown mode '" + m + "'");
            }
        }
        if (uses_gamma(cfg.run.mode) && !cfg.has_gamma) fail("/gains/Gamma", "required by mode");
        if (!uses_gamma(cfg.run.mode) && !cfg.has_xi) fail("/gains/Xi", "required by mode");

        cfg.run.iterations = static_cast<std::size_t>(integer(run, "/run/iterations", "iterations", 1, 300));
        cfg.run.record_every = static_cast<std::size_t>(integer(run, "/run/record_every", "record_every", 1, 1));
        const std::string rec = text(run, "/run/record_trajectories", "record_trajectories", "final");
        if (rec == "final") {
            cfg.run.record = TrajectoryRecording::Final;
        } else if (rec == "all") {
            cfg.run.record = TrajectoryRecording::All;
        } else if (rec == "none") {
            cfg.run.record = TrajectoryRecording::None;
        } else {
            fail("/run/record_trajectories", "must be one of final, all, none");
        }
        if (run.contains("u0")) {
            const MatrixSchedule u0 = schedule(run, "/run", "u0", s.m, 1, s.N, false);
            cfg.run.u0.clear();
            for (int k = 0; k <= s.N; ++k) cfg.run.u0.push_back(u0[k]);
        }
        cfg.out = text(run, "/run/out", "out", "");
        cfg.trajectories_out = text(run, "/run/trajectories_out", "trajectories_out", "");
    }
};

// example1: n = 4, m = 3, p = 2, N = 100; example2 reuses A, B, C, w, v
// with D = 0 and learns through Γ.
inline constexpr const char* shared_plant_json = R"json({
    "n": 4, "m": 3, "p": 2, "N": 100,
    "A": [["0.16", "0", "0", "0"],
          ["0.01*exp(0.01*k)", "-0.1", "-0.08", "0.01/(k+2)"],
          ["0", "0.08", "0", "0.01*cos(2*k)"],
          ["-0.01*k", "0", "0", "-0.3"]],
    "B": [["0.5", "0", "0"],
          ["0", "0.8", "-0.1*k"],
          ["cos(0.1*k)", "0", "0.5"],
          ["0", "4+5*sin(3*k)", "3*k+4"]],
    "C": [["2", "0", "0.1*cos(0.1*(k-1))", "0"],
          ["0.2*(k-1)", "2", "0", "0.1"]],
    "w": ["0.8*cos(0.1*k)", "0.6*sin(0.3*k)", "0.4*cos(0.5*k)", "0.2*sin(0.7*k)"],
    "v": ["0.2*sin(0.4*k)", "0.5*cos(0.6*k)"],
    "r": ["20*(k/100)^2*(1-k/100)", "3*sin(0.02*pi*k)"],
    "x0": [-1, 3, -2, 4]
})json";

inline json preset_document(const std::string& name) {
    const bool ex1 = name == "example1" || name == "example1-clean";
    const bool ex2 = name == "example2" || name == "example2-clean";
    if (!ex1 && !ex2) throw SchemaError("unknown preset '" + name + "'");
    const bool clean = name.ends_with("-clean");

    json doc;
    doc["schema_version"] = config_schema_version;
    doc["system"] = json::parse(shared_plant_json);
    const double a = clean ? 0.0 : 0.0002;
    if (ex1) {
        doc["system"]["D"] = json::array({
            json::array({"1+0.1*cos(0.1*k)^2", "0.5", "0.05*cos(0.1*k)"}),
            json::array({"0", "2+0.5*sin(3*k)", "0.4+0.1*cos(k)"}),
        });
        doc["uncertainty"]["amp"] = {{"A", a}, {"B", a}, {"C", a}, {"D", a}, {"w", a}, {"v", a}, {"r", a}, {"x0", a}};
        doc["gains"]["Xi"] = json::array({
            json::array({"0.25+0.1*sin(0.1*k)", "-0.1"}),
            json::array({"0", "0.15+0.1*cos(3*k)^2"}),
            json::array({"0", "0"}),
        });
        doc["run"]["mode"] = "direct-xi";
    } else {
        // D is absent (zero) and B, C, D stay repetitive
        doc["uncertainty"]["amp"] = {{"A", a}, {"B", 0.0}, {"C", 0.0}, {"D", 0.0},
                                     {"w", a}, {"v", a}, {"r", a}, {"x0", a}};
        doc["gains"]["Gamma"] = json::array({
            json::array({"0.3+0.1*sin(0.1*k)", "0"}),
            json::array({"0", "0.2+0.1*cos(3*k)^2"}),
            json::array({"0", "0"}),
        });
        doc["run"]["mode"] = "direct-gamma";
    }
    doc["uncertainty"]["seed"] = 42;
    doc["run"]["iterations"] = 300;
    return doc;
}

}  // namespace detail

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"example1", "example2", "example1-clean", "example2-clean"};
    return names;
}

inline ExperimentConfig parse_config(const nlohmann::json& doc) { return detail::ConfigReader(doc).read(); }

inline ExperimentConfig parse_config_text(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

inline nlohmann::json preset_json(const std::string& name) { return detail::preset_document(name); }

inline ExperimentConfig load_preset(const std::string& name) { return parse_config(preset_json(name)); }

}  // namespace ilcset
