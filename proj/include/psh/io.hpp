#pragma once

// Text output: CSV tables at 17 significant digits and EP records as JSON.

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "psh/epscan.hpp"
#include "psh/oracle.hpp"
#include "psh/tracking.hpp"

namespace psh {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x == 0.0 ? 0.0 : x); // no "-0"
    return buf;
}

inline void write_spectrum_csv(std::ostream& os, const BiorthoSpectrum& s) {
    os << "level_id,re_eps,im_eps,z2_index,ep_indicator\n";
    for (const auto& l : s.levels)
        os << l.index << ',' << fmt17(l.eigenvalue.real()) << ',' << fmt17(l.real ? 0.0 : l.eigenvalue.imag()) << ','
           << to_int(l.z2) << ',' << fmt17(l.ep_indicator) << '\n';
}

/// One row per (grid point, track). Imaginary parts of real levels are written as 0.
inline void write_tracks_csv(std::ostream& os, const SweepResult& r) {
    os << "grid_value,level_id,re_eps,im_eps,z2_index,ep_indicator\n";
    const std::size_t np = r.grid.points.size();
    for (std::size_t i = 0; i < np; ++i)
        for (const auto& t : r.tracks) {
            const TrackSample& s = t.samples[i];
            os << fmt17(s.parameter) << ',' << t.level_id << ',' << fmt17(s.eigenvalue.real()) << ','
               << fmt17(s.real ? 0.0 : s.eigenvalue.imag()) << ',' << to_int(s.z2) << ',' << fmt17(s.ep_indicator)
               << '\n';
        }
}

inline void write_oracle_csv(std::ostream& os, const std::vector<OracleState>& states,
                             const BiorthoSpectrum* numeric = nullptr, const OracleMatch* match = nullptr) {
    os << "level,energy,parity,r,band,occupation";
    if (numeric)
        os << ",numeric_energy,numeric_index";
    os << '\n';
    for (std::size_t k = 0; k < states.size(); ++k) {
        const OracleState& s = states[k];
        os << k << ',' << fmt17(s.energy) << ',' << s.parity << ',' << s.r << ',' << s.band << ',' << s.occupation;
        if (numeric && match) {
            // numeric level paired with this oracle state
            std::size_t lv = k;
            for (std::size_t l = 0; l < match->state_of.size(); ++l)
                if (match->state_of[l] == static_cast<int>(k))
                    lv = l;
            os << ',' << fmt17(numeric->levels[lv].eigenvalue.real()) << ',' << to_int(numeric->levels[lv].z2);
        }
        os << '\n';
    }
}

inline void write_crossings_csv(std::ostream& os, const std::vector<Crossing>& cs) {
    os << "location,track_a,track_b,z2_a,z2_b,kind,gap,bracket_width\n";
    for (const auto& c : cs)
        os << fmt17(c.location) << ',' << c.track_a << ',' << c.track_b << ',' << to_int(c.index_a) << ','
           << to_int(c.index_b) << ',' << to_string(c.kind) << ',' << fmt17(c.gap) << ',' << fmt17(c.bracket_width)
           << '\n';
}

// ---------------------------------------------------------------------------
// EP records

inline nlohmann::json to_json(const EPRecord& r) {
    nlohmann::json j;
    j["order"] = r.order;
    j["location"] = {{"parameter", r.parameter}, {"j_tilde", r.j_tilde}, {"gamma_tilde", r.gamma_tilde}};
    j["levels"] = r.levels;
    std::vector<int> idx;
    for (Z2Index z : r.indices)
        idx.push_back(to_int(z));
    j["indices"] = idx;
    j["residual"] = r.residual;
    j["bracket_width"] = r.bracket_width;
    j["boundary"] = r.boundary;
    return j;
}

inline EPRecord ep_record_from_json(const nlohmann::json& j) {
    EPRecord r;
    try {
        r.order = j.at("order").get<int>();
        const auto& loc = j.at("location");
        r.parameter = loc.at("parameter").get<double>();
        r.j_tilde = loc.at("j_tilde").get<double>();
        r.gamma_tilde = loc.at("gamma_tilde").get<double>();
        r.levels = j.at("levels").get<std::vector<int>>();
        for (int v : j.at("indices").get<std::vector<int>>()) {
            if (v < -1 || v > 1)
                throw IoError("EP record: index must be -1, 0 or +1");
            r.indices.push_back(static_cast<Z2Index>(v));
        }
        r.residual = j.value("residual", 0.0);
        r.bracket_width = j.value("bracket_width", 0.0);
        r.boundary = j.value("boundary", false);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("EP record: ") + e.what());
    }
    if (r.order != 2 && r.order != 3)
        throw IoError("EP record: order must be 2 or 3");
    return r;
}

struct EPFile {
    int n = 0;
    std::string axis;
    double fixed_value = 0.0;
    std::vector<EPRecord> records;
};

inline nlohmann::json to_json(const EPFile& f) {
    nlohmann::json j;
    j["n"] = f.n;
    j["axis"] = f.axis;
    j["fixed_value"] = f.fixed_value;
    j["records"] = nlohmann::json::array();
    for (const auto& r : f.records)
        j["records"].push_back(to_json(r));
    return j;
}

inline EPFile ep_file_from_json(const nlohmann::json& j) {
    EPFile f;
    try {
        f.n = j.at("n").get<int>();
        f.axis = j.value("axis", "");
        f.fixed_value = j.value("fixed_value", 0.0);
        for (const auto& r : j.at("records"))
            f.records.push_back(ep_record_from_json(r));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("EP file: ") + e.what());
    }
    return f;
}

/// Reads an EP file and checks every record against the selection rule.
inline std::pair<EPFile, SelectionReport> load_ep_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
    EPFile f = ep_file_from_json(j);
    SelectionReport rep = verify_selection_rule(f.records);
    return {std::move(f), std::move(rep)};
}

/// foo.csv -> foo.eps.json
inline std::string sibling_ep_path(const std::string& csv_path) {
    const auto dot = csv_path.rfind('.');
    const auto slash = csv_path.find_last_of('/');
    const std::string stem = (dot == std::string::npos || (slash != std::string::npos && dot < slash))
                                 ? csv_path
                                 : csv_path.substr(0, dot);
    return stem + ".eps.json";
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path);
    out << text;
    if (!out)
        throw IoError("write failed for " + path);
}

} // namespace psh
