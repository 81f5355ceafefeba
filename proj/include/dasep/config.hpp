#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "dasep/lattice.hpp"

namespace dasep {

// Flat key-value experiment configuration: dotted keys, typed scalar/array
// values, full-document validation (all errors collected, never fail-fast).

enum class ExperimentKind {
    Simulate,
    Stationary,
    VerifyGenerator,
    VerifyMartingale,
    VerifyKernels,
    SolveSpde,
    Converge,
    PeriodicConverge,
};

inline const char* experiment_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Simulate: return "simulate";
        case ExperimentKind::Stationary: return "stationary";
        case ExperimentKind::VerifyGenerator: return "verify-generator";
        case ExperimentKind::VerifyMartingale: return "verify-martingale";
        case ExperimentKind::VerifyKernels: return "verify-kernels";
        case ExperimentKind::SolveSpde: return "spde";
        case ExperimentKind::Converge: return "converge";
        case ExperimentKind::PeriodicConverge: return "periodic-converge";
    }
    return "?";
}

struct ConfigValue {
    enum class Type { Number, String, Boolean, Array };
    Type type = Type::Number;
    double num = 0.0;
    std::string str;
    bool boolean = false;
    std::vector<double> arr;
};

struct ConfigIssue {
    enum class Kind { Schema, Range };
    Kind kind = Kind::Schema;
    std::string key;
    std::string message;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Simulate;
    std::map<std::string, ConfigValue> values;
    std::string source_text;

    double num(const std::string& key) const { return values.at(key).num; }
    int64_t integer(const std::string& key) const {
        return static_cast<int64_t>(std::llround(values.at(key).num));
    }
    const std::string& str(const std::string& key) const { return values.at(key).str; }
    bool flag(const std::string& key) const { return values.at(key).boolean; }
    const std::vector<double>& arr(const std::string& key) const { return values.at(key).arr; }
    bool has(const std::string& key) const { return values.count(key) > 0; }
};

struct ParseResult {
    std::optional<ExperimentConfig> config;
    std::vector<ConfigIssue> issues;
    bool ok() const { return issues.empty() && config.has_value(); }
};

namespace detail {

struct KeySpec {
    const char* key;
    ConfigValue::Type type;
    // numeric range (inclusive); NaN disables the side
    double min = -1e308;
    double max = 1e308;
    std::vector<std::string> allowed;  // for strings
    const char* def = nullptr;         // textual default; nullptr = required-if-used
};

// Every key the schema knows. Defaults give a runnable config for each
// experiment with just `schema_version` and `experiment` present.
inline const std::vector<KeySpec>& schema() {
    static const std::vector<KeySpec> s = {
        {"schema_version", ConfigValue::Type::Number, 1, 1, {}, "1"},
        {"experiment", ConfigValue::Type::String, 0, 0,
         {"simulate", "stationary", "verify-generator", "verify-martingale",
          "verify-kernels", "spde", "converge", "periodic-converge"},
         nullptr},
        {"seed", ConfigValue::Type::Number, 0, 9.2e18, {}, "42"},
        {"threads", ConfigValue::Type::Number, 0, 4096, {}, "0"},
        {"out", ConfigValue::Type::String, 0, 0, {}, "out"},

        {"model.eps", ConfigValue::Type::Number, 1e-12, 10, {}, "0.1"},
        {"model.alpha", ConfigValue::Type::Number, 1e-12, 1e12, {}, "1"},
        {"model.rate_function", ConfigValue::Type::String, 0, 0,
         {"classic", "generalized"}, "classic"},
        {"model.f.kind", ConfigValue::Type::String, 0, 0,
         {"zero", "linear", "linear_cosine"}, "linear"},
        {"model.f.a", ConfigValue::Type::Number, 0, 1e6, {}, "1"},
        {"model.f.cos_amp", ConfigValue::Type::Number, -1e6, 1e6, {}, "0.5"},
        {"model.f.gamma", ConfigValue::Type::Number, 0, 0.4999999, {}, "0"},
        {"model.f.c", ConfigValue::Type::Number, 0, 1e6, {}, "1"},

        {"domain.kind", ConfigValue::Type::String, 0, 0, {"ring", "line"}, "ring"},
        {"domain.n", ConfigValue::Type::Number, 2, 1e9, {}, "64"},
        {"domain.chi", ConfigValue::Type::Number, -1e9, 1e9, {}, "0"},
        {"domain.x_min", ConfigValue::Type::Number, -1e9, 1e9, {}, "-64"},
        {"domain.x_max", ConfigValue::Type::Number, -1e9, 1e9, {}, "64"},
        {"domain.boundary", ConfigValue::Type::String, 0, 0, {"frozen", "reflecting"},
         "frozen"},

        {"initial.kind", ConfigValue::Type::String, 0, 0,
         {"wedge", "flat", "max_slope", "stationary", "custom"}, "flat"},
        {"initial.custom", ConfigValue::Type::Array, 0, 0, {}, "[]"},

        {"sim.t_end", ConfigValue::Type::Number, 0, 1e12, {}, "10"},
        {"sim.sample_times", ConfigValue::Type::Array, 0, 0, {}, "[]"},
        {"sim.keep_events", ConfigValue::Type::Boolean, 0, 0, {}, "false"},
        {"ensemble.size", ConfigValue::Type::Number, 1, 1e9, {}, "1"},

        {"stationary.tol", ConfigValue::Type::Number, 1e-16, 1e-3, {}, "1e-12"},
        {"stationary.chi2_samples", ConfigValue::Type::Number, 100, 1e8, {}, "100000"},
        {"stationary.invariance_check", ConfigValue::Type::Boolean, 0, 0, {}, "true"},
        {"stationary.invariance_samples", ConfigValue::Type::Number, 100, 1e7, {}, "10000"},
        {"stationary.invariance_t", ConfigValue::Type::Number, 0, 1e6, {}, "10"},
        {"stationary.variance_eps", ConfigValue::Type::Number, 1e-9, 1, {}, "0.001"},

        {"generator.eps_grid", ConfigValue::Type::Array, 0, 0, {}, "[1,0.1,0.01]"},
        {"generator.s_min", ConfigValue::Type::Number, -1e6, 1e6, {}, "-20"},
        {"generator.s_max", ConfigValue::Type::Number, -1e6, 1e6, {}, "20"},
        {"generator.tolerance_scale", ConfigValue::Type::Number, 0, 1, {}, "1e-10"},

        {"martingale.window", ConfigValue::Type::Number, 16, 1e6, {}, "256"},
        {"martingale.t_end", ConfigValue::Type::Number, 0.1, 1e6, {}, "50"},
        {"martingale.ensemble", ConfigValue::Type::Number, 10, 1e7, {}, "2000"},
        {"martingale.checkpoints", ConfigValue::Type::Number, 1, 1000, {}, "10"},
        {"martingale.sites", ConfigValue::Type::Array, 0, 0, {}, "[-64,-32,0,32,64]"},
        {"martingale.duhamel_seeds", ConfigValue::Type::Number, 0, 10000, {}, "20"},
        {"martingale.duhamel_t", ConfigValue::Type::Number, 0.01, 100, {}, "2"},
        {"martingale.duhamel_window", ConfigValue::Type::Number, 16, 4096, {}, "128"},
        {"martingale.duhamel_tol", ConfigValue::Type::Number, 0, 1, {}, "1e-6"},

        {"kernels.eps", ConfigValue::Type::Number, 1e-6, 1, {}, "0.1"},
        {"kernels.times", ConfigValue::Type::Array, 0, 0, {}, "[0.5,5,50]"},
        {"kernels.max_offset", ConfigValue::Type::Number, 4, 100000, {}, "0"},
        {"kernels.T_grid", ConfigValue::Type::Array, 0, 0, {}, "[]"},
        {"kernels.a", ConfigValue::Type::Number, 0, 10, {}, "0.25"},
        {"kernels.u", ConfigValue::Type::Number, 0, 10, {}, "0.5"},
        {"kernels.v", ConfigValue::Type::Number, 0, 0.4999999, {}, "0.25"},
        {"kernels.moment_alpha", ConfigValue::Type::Number, 0, 10, {}, "1"},
        {"kernels.oracle_tol", ConfigValue::Type::Number, 0, 1, {}, "1e-8"},

        {"spde.A", ConfigValue::Type::Number, -1e6, 0, {}, "0"},
        {"spde.B", ConfigValue::Type::String, 0, 0, {"constant", "exp_quarter"},
         "constant"},
        {"spde.b", ConfigValue::Type::Number, 0, 1e6, {}, "1"},
        {"spde.domain", ConfigValue::Type::String, 0, 0, {"periodic", "line"},
         "periodic"},
        {"spde.n_modes", ConfigValue::Type::Number, 0, 4096, {}, "16"},
        {"spde.n_grid", ConfigValue::Type::Number, 2, 65536, {}, "64"},
        {"spde.x_min", ConfigValue::Type::Number, -1e6, 1e6, {}, "-8"},
        {"spde.x_max", ConfigValue::Type::Number, -1e6, 1e6, {}, "8"},
        {"spde.dx", ConfigValue::Type::Number, 1e-9, 10, {}, "0.03125"},
        {"spde.dt", ConfigValue::Type::Number, 1e-12, 10, {}, "0.001"},
        {"spde.t_end", ConfigValue::Type::Number, 0, 1e6, {}, "1"},
        {"spde.ensemble", ConfigValue::Type::Number, 1, 1e7, {}, "1"},
        {"spde.sample_times", ConfigValue::Type::Array, 0, 0, {}, "[]"},
        {"spde.validate", ConfigValue::Type::Boolean, 0, 0, {}, "false"},

        {"converge.eps_grid", ConfigValue::Type::Array, 0, 0, {}, "[0.2,0.1,0.05]"},
        {"converge.T", ConfigValue::Type::Number, 0.01, 100, {}, "0.5"},
        {"converge.ensemble", ConfigValue::Type::Number, 100, 1e7, {}, "5000"},
        {"converge.observe", ConfigValue::Type::Array, 0, 0, {}, "[-1,0,1]"},
        {"converge.ks_threshold", ConfigValue::Type::Number, 0, 1, {}, "0.05"},

        {"periodic.n_grid", ConfigValue::Type::Array, 0, 0, {}, "[64,128]"},
        {"periodic.T", ConfigValue::Type::Number, 0.01, 100, {}, "0.5"},
        {"periodic.ensemble", ConfigValue::Type::Number, 100, 1e7, {}, "3000"},
        {"periodic.ks_threshold", ConfigValue::Type::Number, 0, 1, {}, "0.07"},
        {"periodic.sweep_eps", ConfigValue::Type::Array, 0, 0, {}, "[0.1,0.05,0.01]"},
        {"periodic.sweep_shat_max", ConfigValue::Type::Number, 0.1, 100, {}, "5"},
    };
    return s;
}

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline bool parse_number(const std::string& s, double& out) {
    std::istringstream is(s);
    is >> out;
    return static_cast<bool>(is) && is.eof();
}

inline std::optional<ConfigValue> parse_value(const std::string& raw) {
    std::string v = trim(raw);
    ConfigValue cv;
    if (v.empty()) return std::nullopt;
    if (v.front() == '[') {
        if (v.back() != ']') return std::nullopt;
        cv.type = ConfigValue::Type::Array;
        std::string inner = v.substr(1, v.size() - 2);
        std::istringstream is(inner);
        std::string tok;
        while (std::getline(is, tok, ',')) {
            tok = trim(tok);
            if (tok.empty()) continue;
            double d;
            if (!parse_number(tok, d)) return std::nullopt;
            cv.arr.push_back(d);
        }
        return cv;
    }
    if (v == "true" || v == "false") {
        cv.type = ConfigValue::Type::Boolean;
        cv.boolean = (v == "true");
        return cv;
    }
    double d;
    if (parse_number(v, d)) {
        cv.type = ConfigValue::Type::Number;
        cv.num = d;
        return cv;
    }
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
    cv.type = ConfigValue::Type::String;
    cv.str = v;
    return cv;
}

} // namespace detail

inline ParseResult parse_config(const std::string& text) {
    ParseResult res;
    ExperimentConfig cfg;
    cfg.source_text = text;
    std::map<std::string, ConfigValue> raw;

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos) {
            res.issues.push_back({ConfigIssue::Kind::Schema, "line " + std::to_string(lineno),
                                  "expected `key = value`"});
            continue;
        }
        std::string key = detail::trim(t.substr(0, eq));
        auto val = detail::parse_value(t.substr(eq + 1));
        if (key.empty() || !val) {
            res.issues.push_back({ConfigIssue::Kind::Schema, key.empty() ? "line " + std::to_string(lineno) : key,
                                  "unparsable value"});
            continue;
        }
        if (raw.count(key))
            res.issues.push_back({ConfigIssue::Kind::Schema, key, "duplicate key"});
        raw[key] = *val;
    }

    // schema pass: every present key must be known, typed and in range;
    // absent keys take their defaults
    const auto& schema = detail::schema();
    for (const auto& [key, val] : raw) {
        const detail::KeySpec* spec = nullptr;
        for (const auto& s : schema)
            if (key == s.key) {
                spec = &s;
                break;
            }
        if (!spec) {
            res.issues.push_back({ConfigIssue::Kind::Schema, key, "unknown key"});
            continue;
        }
        if (val.type != spec->type) {
            res.issues.push_back({ConfigIssue::Kind::Schema, key, "wrong value type"});
            continue;
        }
        if (spec->type == ConfigValue::Type::Number &&
            (val.num < spec->min || val.num > spec->max)) {
            std::ostringstream msg;
            msg << "value " << val.num << " outside [" << spec->min << ", " << spec->max << "]";
            res.issues.push_back({ConfigIssue::Kind::Range, key, msg.str()});
            continue;
        }
        if (spec->type == ConfigValue::Type::String && !spec->allowed.empty() &&
            std::find(spec->allowed.begin(), spec->allowed.end(), val.str) ==
                spec->allowed.end()) {
            res.issues.push_back({ConfigIssue::Kind::Range, key, "value `" + val.str +
                                                                     "` not in the allowed set"});
            continue;
        }
        cfg.values[key] = val;
    }
    for (const auto& s : schema) {
        if (cfg.values.count(s.key)) continue;
        if (s.def == nullptr) {
            if (!raw.count(s.key))
                res.issues.push_back({ConfigIssue::Kind::Schema, s.key, "required key missing"});
            continue;
        }
        auto v = detail::parse_value(s.def);
        cfg.values[s.key] = *v;
        if (s.type == ConfigValue::Type::String) cfg.values[s.key].type = s.type;
    }

    // cross-field checks
    if (cfg.has("experiment")) {
        const std::string& e = cfg.str("experiment");
        for (auto k : {ExperimentKind::Simulate, ExperimentKind::Stationary,
                       ExperimentKind::VerifyGenerator, ExperimentKind::VerifyMartingale,
                       ExperimentKind::VerifyKernels, ExperimentKind::SolveSpde,
                       ExperimentKind::Converge, ExperimentKind::PeriodicConverge})
            if (e == experiment_name(k)) cfg.kind = k;
    }
    if (cfg.has("domain.kind") && cfg.str("domain.kind") == "ring") {
        int64_t n = cfg.integer("domain.n");
        int64_t chi = cfg.integer("domain.chi");
        if (((chi % 2) + 2) % 2 != ((n % 2) + 2) % 2)
            res.issues.push_back({ConfigIssue::Kind::Schema, "domain.chi",
                                  "ring winding must satisfy chi == N mod 2"});
        if (std::llabs(chi) > n)
            res.issues.push_back({ConfigIssue::Kind::Schema, "domain.chi", "|chi| must be <= N"});
    }
    if (cfg.has("domain.kind") && cfg.str("domain.kind") == "line" &&
        cfg.integer("domain.x_min") >= cfg.integer("domain.x_max"))
        res.issues.push_back({ConfigIssue::Kind::Range, "domain.x_max",
                              "line window requires x_min < x_max"});
    if (cfg.has("spde.dt") && cfg.has("spde.dx") && cfg.str("spde.domain") == "line" &&
        cfg.num("spde.dt") > cfg.num("spde.dx"))
        res.issues.push_back({ConfigIssue::Kind::Range, "spde.dt",
                              "accuracy constraint dt <= dx violated"});

    if (res.issues.empty()) res.config = std::move(cfg);
    return res;
}

// Builds ModelParams/Domain from a validated config.
inline Domain domain_from_config(const ExperimentConfig& cfg) {
    if (cfg.str("domain.kind") == "ring")
        return Ring{cfg.integer("domain.n"), cfg.integer("domain.chi")};
    LineBoundary b = cfg.str("domain.boundary") == "frozen" ? LineBoundary::Frozen
                                                            : LineBoundary::ReflectingBuffer;
    return LineWindow{cfg.integer("domain.x_min"), cfg.integer("domain.x_max"), b};
}

inline ModelParams params_from_config(const ExperimentConfig& cfg) {
    ModelParams p;
    p.eps = cfg.num("model.eps");
    p.alpha = cfg.num("model.alpha");
    p.domain = domain_from_config(cfg);
    if (cfg.str("model.rate_function") == "generalized") {
        FSpec f;
        const std::string& k = cfg.str("model.f.kind");
        f.kind = k == "zero" ? FSpec::Kind::Zero
                 : k == "linear" ? FSpec::Kind::Linear
                                 : FSpec::Kind::LinearCosine;
        f.a = cfg.num("model.f.a");
        f.cos_amp = cfg.num("model.f.cos_amp");
        f.gamma = cfg.num("model.f.gamma");
        f.c = cfg.num("model.f.c");
        p.rate_function = Generalized{f};
    }
    return p;
}

} // namespace dasep
