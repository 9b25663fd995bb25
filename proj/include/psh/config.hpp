#pragma once

// Run configuration for the command-line driver. JSON layout:
//
//   { "command": "sweep",
//     "chain": {"n": 4, "j_tilde": 0.5, "gamma_tilde": 0.21, "j": null, "delta": null, "gain_left": []},
//     "grid": {"axis": "j_tilde", "fixed": 0.21, "lo": -1, "hi": 1, "points": 801, "fixed_values": []},
//     "ep": {"order": 2, "gamma_lo": 0.35, "gamma_hi": 0.45},
//     "tolerances": {"ep_tol": 1e-8},
//     "output": {"path": "", "format": "csv"},
//     "records": "",
//     "workers": 1 }
//
// Every key is optional; unknown keys are rejected with their path.

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "psh/epscan.hpp"
#include "psh/model.hpp"

namespace psh {

struct ConfigError : std::invalid_argument {
    std::string field;
    ConfigError(std::string f, const std::string& msg) : std::invalid_argument(f + ": " + msg), field(std::move(f)) {}
};

inline const std::set<std::string>& tolerance_names() {
    static const std::set<std::string> names{"ep_tol",         "reality_rel", "indicator_floor",  "cluster_rel",
                                             "pairing_rel",    "min_overlap", "defective_condition",
                                             "oracle_energy",  "crossing_tol", "ep3_gamma_tol"};
    return names;
}

inline const std::set<std::string>& command_names() {
    static const std::set<std::string> names{"spectrum", "oracle", "sweep", "find-ep", "verify", "crossings"};
    return names;
}

struct RunConfig {
    std::string command;
    struct Chain {
        int n = 4;
        double j_tilde = 0.0;
        double gamma_tilde = 0.0;
        std::optional<double> j;     // physical units, oracle only
        std::optional<double> delta;
        std::vector<double> gain_left; // left half of a custom antisymmetric profile
    } chain;
    struct Grid {
        std::string axis = "j_tilde";
        double fixed = 0.0;
        double lo = -1.0;
        double hi = 1.0;
        std::size_t points = 801;
        std::vector<double> fixed_values; // verify: several fixed values
    } grid;
    struct Ep {
        int order = 2;
        double gamma_lo = 0.35;
        double gamma_hi = 0.45;
    } ep;
    std::map<std::string, double> tolerances;
    struct Output {
        std::string path;
        std::string format = "csv";
    } output;
    std::string records; // verify: EP file to re-check
    unsigned workers = 1;

    double tol(const std::string& name, double fallback) const {
        auto it = tolerances.find(name);
        return it == tolerances.end() ? fallback : it->second;
    }

    TrackingOptions tracking() const {
        TrackingOptions t;
        t.ep_tol = tol("ep_tol", t.ep_tol);
        t.min_overlap = tol("min_overlap", t.min_overlap);
        t.biortho.reality_rel = tol("reality_rel", t.biortho.reality_rel);
        t.biortho.indicator_floor = tol("indicator_floor", t.biortho.indicator_floor);
        t.biortho.cluster_rel = tol("cluster_rel", t.biortho.cluster_rel);
        t.biortho.pairing_rel = tol("pairing_rel", t.biortho.pairing_rel);
        t.biortho.defective_condition = tol("defective_condition", t.biortho.defective_condition);
        return t;
    }

    SweepOptions sweep_options() const {
        SweepOptions s;
        s.tracking = tracking();
        s.workers = workers;
        return s;
    }

    ParameterPath path(double fixed_value) const {
        ParameterPath p{chain.n, parse_axis(grid.axis), fixed_value, {}};
        if (!chain.gain_left.empty())
            p.gain_shape = build_custom_gain(chain.gain_left);
        return p;
    }

    ParameterPath path() const { return path(grid.fixed); }

    /// Throws ConfigError naming the offending field.
    void validate() const {
        if (!command_names().count(command))
            throw ConfigError("command", "unknown command '" + command + "'");
        if (chain.n <= 0 || chain.n % 2 != 0)
            throw ConfigError("chain.n", "must be a positive even integer");
        if (command != "oracle" && chain.n > kMaxDenseSites)
            throw ConfigError("chain.n", "exceeds the dense bound " + std::to_string(kMaxDenseSites));
        if (!chain.gain_left.empty() && 2 * chain.gain_left.size() != static_cast<std::size_t>(chain.n))
            throw ConfigError("chain.gain_left", "must hold N/2 values");
        if (!(chain.j_tilde >= -1.0 && chain.j_tilde <= 1.0))
            throw ConfigError("chain.j_tilde", "must lie in [-1, 1]");
        if (!(chain.gamma_tilde >= 0.0))
            throw ConfigError("chain.gamma_tilde", "must be >= 0");
        if (command == "oracle") {
            if (chain.n > kOracleMaxSites)
                throw ConfigError("chain.n", "oracle enumeration is limited to N <= " + std::to_string(kOracleMaxSites));
            if (chain.delta && !(*chain.delta > 0.0))
                throw ConfigError("chain.delta", "must be > 0");
            if (chain.j && *chain.j == 0.0)
                throw ConfigError("chain.j", "must be non-zero");
        }
        try {
            parse_axis(grid.axis);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("grid.axis", e.what());
        }
        if (grid.points < 2)
            throw ConfigError("grid.points", "need at least 2 points");
        if (!(grid.hi > grid.lo))
            throw ConfigError("grid.hi", "must exceed grid.lo");
        if (ep.order != 2 && ep.order != 3)
            throw ConfigError("ep.order", "must be 2 or 3");
        if (!(ep.gamma_hi > ep.gamma_lo) || !(ep.gamma_lo >= 0.0))
            throw ConfigError("ep.gamma_hi", "need 0 <= gamma_lo < gamma_hi");
        for (const auto& [name, value] : tolerances) {
            if (!tolerance_names().count(name))
                throw ConfigError("tolerances." + name, "unknown tolerance name");
            if (!(value > 0.0))
                throw ConfigError("tolerances." + name, "must be positive");
        }
        if (output.format != "csv" && output.format != "json")
            throw ConfigError("output.format", "must be csv or json");
        if (workers == 0)
            throw ConfigError("workers", "must be >= 1");
    }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object())
        throw ConfigError(where.empty() ? "<root>" : where, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : keys)
            ok = ok || it.key() == k;
        if (!ok)
            throw ConfigError(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
    }
}

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null())
        return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where.empty() ? key : where + "." + key, "wrong type");
    }
}

template <class T>
void read_field(const nlohmann::json& j, const char* key, std::optional<T>& out, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null())
        return;
    T v{};
    read_field(j, key, v, where);
    out = v;
}

} // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["command"] = c.command;
    j["chain"] = {{"n", c.chain.n},
                  {"j_tilde", c.chain.j_tilde},
                  {"gamma_tilde", c.chain.gamma_tilde},
                  {"j", c.chain.j ? nlohmann::json(*c.chain.j) : nlohmann::json(nullptr)},
                  {"delta", c.chain.delta ? nlohmann::json(*c.chain.delta) : nlohmann::json(nullptr)},
                  {"gain_left", c.chain.gain_left}};
    j["grid"] = {{"axis", c.grid.axis}, {"fixed", c.grid.fixed},   {"lo", c.grid.lo},
                 {"hi", c.grid.hi},     {"points", c.grid.points}, {"fixed_values", c.grid.fixed_values}};
    j["ep"] = {{"order", c.ep.order}, {"gamma_lo", c.ep.gamma_lo}, {"gamma_hi", c.ep.gamma_hi}};
    j["tolerances"] = c.tolerances;
    j["output"] = {{"path", c.output.path}, {"format", c.output.format}};
    j["records"] = c.records;
    j["workers"] = c.workers;
    return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    using detail::read_field;
    detail::reject_unknown(j, "", {"command", "chain", "grid", "ep", "tolerances", "output", "records", "workers"});
    RunConfig c;
    read_field(j, "command", c.command, "");
    if (j.contains("chain")) {
        const auto& s = j.at("chain");
        detail::reject_unknown(s, "chain", {"n", "j_tilde", "gamma_tilde", "j", "delta", "gain_left"});
        read_field(s, "n", c.chain.n, "chain");
        read_field(s, "j_tilde", c.chain.j_tilde, "chain");
        read_field(s, "gamma_tilde", c.chain.gamma_tilde, "chain");
        read_field(s, "j", c.chain.j, "chain");
        read_field(s, "delta", c.chain.delta, "chain");
        read_field(s, "gain_left", c.chain.gain_left, "chain");
    }
    if (j.contains("grid")) {
        const auto& s = j.at("grid");
        detail::reject_unknown(s, "grid", {"axis", "fixed", "lo", "hi", "points", "fixed_values"});
        read_field(s, "axis", c.grid.axis, "grid");
        read_field(s, "fixed", c.grid.fixed, "grid");
        read_field(s, "lo", c.grid.lo, "grid");
        read_field(s, "hi", c.grid.hi, "grid");
        read_field(s, "points", c.grid.points, "grid");
        read_field(s, "fixed_values", c.grid.fixed_values, "grid");
    }
    if (j.contains("ep")) {
        const auto& s = j.at("ep");
        detail::reject_unknown(s, "ep", {"order", "gamma_lo", "gamma_hi"});
        read_field(s, "order", c.ep.order, "ep");
        read_field(s, "gamma_lo", c.ep.gamma_lo, "ep");
        read_field(s, "gamma_hi", c.ep.gamma_hi, "ep");
    }
    if (j.contains("tolerances")) {
        const auto& s = j.at("tolerances");
        if (!s.is_object())
            throw ConfigError("tolerances", "expected an object");
        for (auto it = s.begin(); it != s.end(); ++it) {
            if (!it->is_number())
                throw ConfigError("tolerances." + it.key(), "wrong type");
            c.tolerances[it.key()] = it->get<double>();
        }
    }
    if (j.contains("output")) {
        const auto& s = j.at("output");
        detail::reject_unknown(s, "output", {"path", "format"});
        read_field(s, "path", c.output.path, "output");
        read_field(s, "format", c.output.format, "output");
    }
    read_field(j, "records", c.records, "");
    read_field(j, "workers", c.workers, "");
    return c;
}

} // namespace psh
