// Command-line driver: spectrum, oracle, sweep, find-ep, verify, crossings.
//
// Exit status: 0 ok, 1 usage or I/O, 2 numeric failure, 3 invariant violation.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "psh/config.hpp"
#include "psh/epscan.hpp"
#include "psh/io.hpp"

namespace {

using namespace psh;

enum Exit { kOk = 0, kUsage = 1, kNumeric = 2, kInvariant = 3 };

struct InvariantViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void emit(const RunConfig& cfg, const std::string& text) {
    if (cfg.output.path.empty() || cfg.output.path == "-")
        std::cout << text;
    else
        write_text_file(cfg.output.path, text);
}

std::string rows_to_json(const std::string& csv) {
    // CSV -> {"columns": [...], "rows": [[...], ...]}, numbers kept as text-exact doubles
    std::istringstream in(csv);
    std::string line;
    nlohmann::json j;
    std::getline(in, line);
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ','))
            cols.push_back(c);
    }
    j["columns"] = cols;
    j["rows"] = nlohmann::json::array();
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string c;
        nlohmann::json row = nlohmann::json::array();
        while (std::getline(ss, c, ',')) {
            char* end = nullptr;
            const double v = std::strtod(c.c_str(), &end);
            if (end && *end == '\0' && !c.empty())
                row.push_back(v);
            else
                row.push_back(c);
        }
        j["rows"].push_back(row);
    }
    return j.dump(1) + "\n";
}

void emit_table(const RunConfig& cfg, const std::string& csv) {
    emit(cfg, cfg.output.format == "json" ? rows_to_json(csv) : csv);
}

void check_rule(const std::vector<EPRecord>& recs, std::ostream& log) {
    const SelectionReport rep = verify_selection_rule(recs);
    for (const auto& v : rep.violations)
        log << "violation: record " << v.record << ": " << v.reason << "\n";
    if (!rep.ok())
        throw InvariantViolation(std::to_string(rep.violations.size()) + " selection-rule violation(s)");
}

int cmd_spectrum(const RunConfig& cfg) {
    const ParameterPath path = cfg.path(cfg.chain.gamma_tilde);
    const ChainSpec spec = ParameterPath{path.n, SweepAxis::j_tilde, cfg.chain.gamma_tilde, path.gain_shape}.spec(
        cfg.chain.j_tilde);
    const auto s = spectrum_with_indices(build_hamiltonian(spec), build_parity(spec.n), cfg.tracking().biortho);
    std::ostringstream os;
    write_spectrum_csv(os, s);
    emit_table(cfg, os.str());
    return kOk;
}

int cmd_oracle(const RunConfig& cfg) {
    double j = cfg.chain.j_tilde, delta = std::sqrt(std::max(0.0, 1.0 - j * j));
    if (cfg.chain.j)
        j = *cfg.chain.j;
    if (cfg.chain.delta)
        delta = *cfg.chain.delta;
    const auto states = full_spectrum(cfg.chain.n, j, delta);
    std::ostringstream os;
    if (cfg.chain.n <= kMaxDenseSites) {
        const ChainSpec spec{cfg.chain.n, delta, j, std::vector<double>(static_cast<std::size_t>(cfg.chain.n), 0.0)};
        const auto s = spectrum_with_indices(build_hamiltonian(spec), build_parity(spec.n), cfg.tracking().biortho);
        const double scale = std::hypot(j, delta);
        const double etol = cfg.tol("oracle_energy", 1e-9) * scale;
        const OracleMatch m = match_oracle(s, states, etol);
        write_oracle_csv(os, states, &s, &m);
        emit_table(cfg, os.str());
        if (m.max_energy_error > etol || m.parity_mismatches > 0) {
            std::ostringstream msg;
            msg << "oracle disagreement: energy error " << m.max_energy_error << ", parity mismatches "
                << m.parity_mismatches;
            throw InvariantViolation(msg.str());
        }
        return kOk;
    }
    write_oracle_csv(os, states);
    emit_table(cfg, os.str());
    return kOk;
}

EPFile ep_file_for(const RunConfig& cfg, double fixed, std::vector<EPRecord> recs) {
    return EPFile{cfg.chain.n, cfg.grid.axis, fixed, std::move(recs)};
}

int cmd_sweep(const RunConfig& cfg) {
    const SweepGrid grid = SweepGrid::uniform(cfg.path(), cfg.grid.lo, cfg.grid.hi, cfg.grid.points);
    const SweepResult r = sweep(grid, cfg.sweep_options());
    std::ostringstream os;
    write_tracks_csv(os, r);
    const std::string eps = to_json(ep_file_for(cfg, cfg.grid.fixed, r.ep2)).dump(1) + "\n";
    if (cfg.output.format == "json") {
        nlohmann::json j = nlohmann::json::parse(rows_to_json(os.str()));
        j["ep_records"] = nlohmann::json::parse(eps);
        emit(cfg, j.dump(1) + "\n");
    } else {
        emit(cfg, os.str());
        if (!cfg.output.path.empty() && cfg.output.path != "-")
            write_text_file(sibling_ep_path(cfg.output.path), eps);
    }
    std::cerr << "sweep: " << r.ep2.size() << " EP2, " << r.breaks.size() << " track breaks, " << r.ambiguous.size()
              << " ambiguous cells\n";
    check_rule(r.ep2, std::cerr);
    return kOk;
}

int cmd_find_ep(const RunConfig& cfg) {
    if (cfg.ep.order == 2) {
        const SweepGrid grid = SweepGrid::uniform(cfg.path(), cfg.grid.lo, cfg.grid.hi, cfg.grid.points);
        SweepOptions so = cfg.sweep_options();
        const SweepResult r = sweep(grid, so);
        emit(cfg, to_json(ep_file_for(cfg, cfg.grid.fixed, r.ep2)).dump(1) + "\n");
        check_rule(r.ep2, std::cerr);
        return kOk;
    }
    if (cfg.grid.axis != "j_tilde")
        throw ConfigError("grid.axis", "EP3 search scans j_tilde");
    EP3Options o;
    o.sweep = cfg.sweep_options();
    o.gamma_tol = cfg.tol("ep3_gamma_tol", o.gamma_tol);
    const auto found = scan_ep3(cfg.chain.n, cfg.grid.lo, cfg.grid.hi, cfg.ep.gamma_lo, cfg.ep.gamma_hi,
                                cfg.grid.points, o);
    if (found.empty())
        throw NoEP3InBox("find-ep: no EP2 pair coalesces inside the box");
    EPFile f = ep_file_for(cfg, cfg.ep.gamma_lo, {});
    f.axis = "gamma_tilde";
    nlohmann::json j = to_json(f);
    std::vector<EPRecord> recs;
    for (const auto& e : found) {
        nlohmann::json rj = to_json(e.record);
        rj["pairing_small_j"] = to_string(e.pairing_small_j);
        rj["pairing_large_j"] = to_string(e.pairing_large_j);
        rj["gamma_bracket"] = {e.gamma_below, e.gamma_above};
        j["records"].push_back(rj);
        recs.push_back(e.record);
    }
    emit(cfg, j.dump(1) + "\n");
    check_rule(recs, std::cerr);
    return kOk;
}

int cmd_verify(const RunConfig& cfg) {
    if (!cfg.records.empty()) {
        auto [file, rep] = load_ep_file(cfg.records);
        std::cout << "verify: " << rep.checked << " records, " << rep.violations.size() << " violations\n";
        check_rule(file.records, std::cerr);
        return kOk;
    }
    std::vector<double> fixed = cfg.grid.fixed_values;
    if (fixed.empty())
        fixed.push_back(cfg.grid.fixed);
    std::vector<EPRecord> all;
    nlohmann::json out = nlohmann::json::array();
    for (double f : fixed) {
        const SweepGrid grid = SweepGrid::uniform(cfg.path(f), cfg.grid.lo, cfg.grid.hi, cfg.grid.points);
        const SweepResult r = sweep(grid, cfg.sweep_options());
        const SelectionReport rep = verify_selection_rule(r.ep2);
        std::cout << cfg.grid.axis << " sweep at fixed " << fmt17(f) << ": " << r.ep2.size() << " EP2, "
                  << rep.violations.size() << " violations\n";
        out.push_back(to_json(ep_file_for(cfg, f, r.ep2)));
        all.insert(all.end(), r.ep2.begin(), r.ep2.end());
    }
    if (!cfg.output.path.empty() && cfg.output.path != "-")
        write_text_file(cfg.output.path, out.dump(1) + "\n");
    check_rule(all, std::cerr);
    std::cout << "verify: " << all.size() << " records, 0 violations\n";
    return kOk;
}

int cmd_crossings(const RunConfig& cfg) {
    const SweepGrid grid = SweepGrid::uniform(cfg.path(), cfg.grid.lo, cfg.grid.hi, cfg.grid.points);
    const SweepResult r = sweep(grid, cfg.sweep_options());
    CrossingOptions co;
    co.tracking = cfg.tracking();
    co.location_tol = cfg.tol("crossing_tol", co.location_tol);
    std::ostringstream os;
    write_crossings_csv(os, classify_crossings(r, co));
    emit_table(cfg, os.str());
    return kOk;
}

int dispatch(const RunConfig& cfg) {
    if (cfg.command == "spectrum")
        return cmd_spectrum(cfg);
    if (cfg.command == "oracle")
        return cmd_oracle(cfg);
    if (cfg.command == "sweep")
        return cmd_sweep(cfg);
    if (cfg.command == "find-ep")
        return cmd_find_ep(cfg);
    if (cfg.command == "verify")
        return cmd_verify(cfg);
    return cmd_crossings(cfg);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pseudo-Hermitian Ising chain: spectra, EP sweeps and Z2-index checks"};
    std::optional<std::string> command, config_path, axis, out_path, format, records, grid_preset;
    std::optional<int> n, order;
    std::optional<double> jt, gt, j, delta, fixed, lo, hi, gamma_lo, gamma_hi;
    std::optional<std::size_t> points;
    std::optional<unsigned> workers;
    std::vector<double> gain_left, fixed_values;
    std::vector<std::string> tols;
    bool dump_config = false;

    app.add_option("command", command, "spectrum | oracle | sweep | find-ep | verify | crossings");
    app.add_option("--config", config_path, "JSON run configuration; flags override it");
    app.add_option("--n", n, "number of sites (even)");
    app.add_option("--jt", jt, "normalized coupling j~ in [-1, 1]");
    app.add_option("--gt", gt, "normalized gain gamma~ >= 0");
    app.add_option("--j", j, "physical J (oracle)");
    app.add_option("--delta", delta, "physical Delta (oracle)");
    app.add_option("--gain-left", gain_left, "left half of a custom antisymmetric gain profile")->delimiter(',');
    app.add_option("--axis", axis, "sweep axis: j_tilde | gamma_tilde");
    app.add_option("--fixed", fixed, "value of the other coordinate during a sweep");
    app.add_option("--fixed-values", fixed_values, "several fixed values (verify)")->delimiter(',');
    app.add_option("--lo", lo, "sweep start");
    app.add_option("--hi", hi, "sweep end");
    app.add_option("--points", points, "grid points");
    app.add_option("--grid", grid_preset, "named grid: default");
    app.add_option("--order", order, "EP order to search (2 or 3)");
    app.add_option("--gamma-lo", gamma_lo, "EP3 box: lower gamma~");
    app.add_option("--gamma-hi", gamma_hi, "EP3 box: upper gamma~");
    app.add_option("--tol", tols, "tolerance override name=value (repeatable)");
    app.add_option("-o,--output", out_path, "output path (default stdout)");
    app.add_option("--format", format, "csv | json");
    app.add_option("--records", records, "EP file to re-validate (verify)");
    app.add_option("--workers", workers, "eigensolver threads");
    app.add_flag("--dump-config", dump_config, "print the effective configuration as JSON and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        RunConfig cfg;
        if (config_path) {
            std::ifstream in(*config_path);
            if (!in)
                throw IoError("cannot open " + *config_path);
            nlohmann::json jc;
            try {
                in >> jc;
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("<config>", e.what());
            }
            cfg = run_config_from_json(jc);
        }
        if (command)
            cfg.command = *command;
        if (grid_preset) {
            if (*grid_preset != "default")
                throw ConfigError("grid", "unknown preset '" + *grid_preset + "'");
            cfg.chain.n = 4;
            cfg.grid.axis = "j_tilde";
            cfg.grid.lo = -1.0;
            cfg.grid.hi = 1.0;
            cfg.grid.points = 801;
            cfg.grid.fixed_values = {0.05, 0.21, 0.40125, 0.48375};
        }
        if (n)
            cfg.chain.n = *n;
        if (jt)
            cfg.chain.j_tilde = *jt;
        if (gt)
            cfg.chain.gamma_tilde = *gt;
        if (j)
            cfg.chain.j = *j;
        if (delta)
            cfg.chain.delta = *delta;
        if (!gain_left.empty())
            cfg.chain.gain_left = gain_left;
        if (axis)
            cfg.grid.axis = *axis;
        if (fixed)
            cfg.grid.fixed = *fixed;
        if (!fixed_values.empty())
            cfg.grid.fixed_values = fixed_values;
        if (lo)
            cfg.grid.lo = *lo;
        if (hi)
            cfg.grid.hi = *hi;
        if (points)
            cfg.grid.points = *points;
        if (order)
            cfg.ep.order = *order;
        if (gamma_lo)
            cfg.ep.gamma_lo = *gamma_lo;
        if (gamma_hi)
            cfg.ep.gamma_hi = *gamma_hi;
        for (const auto& t : tols) {
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError("tolerances", "expected name=value, got '" + t + "'");
            try {
                cfg.tolerances[t.substr(0, eq)] = std::stod(t.substr(eq + 1));
            } catch (const std::exception&) {
                throw ConfigError("tolerances." + t.substr(0, eq), "not a number");
            }
        }
        if (out_path)
            cfg.output.path = *out_path;
        if (format)
            cfg.output.format = *format;
        if (records)
            cfg.records = *records;
        if (workers)
            cfg.workers = *workers;

        if (dump_config) {
            std::cout << to_json(cfg).dump(1) << "\n";
            return kOk;
        }
        cfg.validate();
        return dispatch(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kUsage;
    } catch (const InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return kInvariant;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::domain_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kNumeric;
    }
}
