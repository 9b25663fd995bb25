// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
// Usage: acceptance [output-dir]

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "psh/epscan.hpp"
#include "psh/io.hpp"

namespace fs = std::filesystem;
using namespace psh;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

fs::path g_out = "acceptance_out";

std::string num(double x, int prec = 3) {
    std::ostringstream os;
    os << std::setprecision(prec) << x;
    return os.str();
}

const std::vector<int> kOracleSizes{2, 4, 6, 8};
const std::vector<double> kRatios{-5.0, -1.0, -0.2, 0.2, 1.0, 5.0};
const std::vector<double> kSweepGammas{0.05, 0.21, 0.40125, 0.48375};

struct OracleCase {
    int n;
    double ratio;
    double j, delta;
    std::vector<OracleState> states;
    BiorthoSpectrum numeric;
    OracleMatch match;
};

std::vector<OracleCase> oracle_cases() {
    static std::vector<OracleCase> cases = [] {
        std::vector<OracleCase> cs;
        for (int n : kOracleSizes)
            for (double r : kRatios) {
                OracleCase c;
                c.n = n;
                c.ratio = r;
                c.j = r / std::hypot(r, 1.0);
                c.delta = 1.0 / std::hypot(r, 1.0);
                c.states = full_spectrum(n, c.j, c.delta);
                const ChainSpec spec{n, c.delta, c.j, std::vector<double>(static_cast<std::size_t>(n), 0.0)};
                c.numeric = spectrum_with_indices(build_hamiltonian(spec), build_parity(n));
                c.match = match_oracle(c.numeric, c.states, 1e-9);
                cs.push_back(std::move(c));
            }
        return cs;
    }();
    return cases;
}

Outcome oracle_energies() {
    double worst = 0.0;
    for (const auto& c : oracle_cases())
        for (std::size_t k = 0; k < c.states.size(); ++k)
            worst = std::max(worst, std::abs(c.numeric.levels[k].eigenvalue.real() - c.states[k].energy));
    return {worst <= 1e-9, "max |e_numeric - e_oracle| = " + num(worst) + " over 24 cases (tol 1e-9)"};
}

Outcome oracle_parities() {
    int mismatched_levels = 0, pair_failures = 0;
    for (const auto& c : oracle_cases()) {
        for (std::size_t l = 0; l < c.numeric.size(); ++l)
            if (c.states[c.match.state_of[l]].parity != to_int(c.numeric.levels[l].z2))
                ++mismatched_levels;
        // numeric index of the level carrying a given occupation
        auto index_of = [&](std::uint32_t occ) {
            for (std::size_t l = 0; l < c.numeric.size(); ++l)
                if (c.states[c.match.state_of[l]].occupation == occ)
                    return to_int(c.numeric.levels[l].z2);
            return 0;
        };
        const int sj = c.j > 0 ? 1 : -1;
        const std::uint32_t all = (std::uint32_t{1} << c.n) - 1;
        if (index_of(0) * index_of(1) != sj)
            ++pair_failures;
        if (index_of(all & ~1u) * index_of(all) != -sj)
            ++pair_failures;
    }
    return {mismatched_levels == 0 && pair_failures == 0,
            std::to_string(mismatched_levels) + " level mismatches, " + std::to_string(pair_failures) +
                " ground/top pair sign failures"};
}

Outcome pseudo_hermiticity() {
    std::mt19937 rng(20241019);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    double worst = 0.0;
    int custom = 0;
    for (int t = 0; t < 100; ++t) {
        const int n = 2 + 2 * (t % 3);
        ChainSpec s;
        s.n = n;
        s.delta = std::abs(u(rng));
        s.j = u(rng);
        if (t % 2 == 0) {
            s.gamma_profile = staggered_profile(n, std::abs(u(rng)));
        } else {
            std::vector<double> half(static_cast<std::size_t>(n / 2));
            for (auto& g : half)
                g = u(rng);
            s.gamma_profile = build_custom_gain(half);
            ++custom;
        }
        s.validate();
        worst = std::max(worst, psh_residual(build_hamiltonian(s), build_parity(n)));
    }
    return {worst <= 1e-12, "max ||PH - H^dag P||_F = " + num(worst) + " over 100 specs (" + std::to_string(custom) +
                                " non-staggered)"};
}

// Criterion 4 output: tracks and EP records for the four figure gammas.
std::vector<std::string> selection_rule_files(unsigned workers, std::size_t& eps, std::size_t& violations) {
    std::vector<std::string> files;
    eps = violations = 0;
    for (double g : kSweepGammas) {
        SweepOptions opt;
        opt.workers = workers;
        const SweepResult r = sweep(SweepGrid::uniform(ParameterPath{4, SweepAxis::j_tilde, g, {}}, -1.0, 1.0, 801), opt);
        eps += r.ep2.size();
        violations += verify_selection_rule(r.ep2).violations.size();
        const std::string stem = "selection_g" + fmt17(g) + "_w" + std::to_string(workers);
        std::ostringstream csv;
        write_tracks_csv(csv, r);
        write_text_file((g_out / (stem + ".csv")).string(), csv.str());
        write_text_file((g_out / (stem + ".eps.json")).string(),
                        to_json(EPFile{4, "j_tilde", g, r.ep2}).dump(1) + "\n");
        files.push_back(stem + ".csv");
        files.push_back(stem + ".eps.json");
    }
    return files;
}

Outcome selection_rule() {
    std::size_t eps = 0, violations = 0;
    selection_rule_files(1, eps, violations);
    return {violations == 0 && eps > 0,
            std::to_string(eps) + " EP2 on 4 x 801 points, " + std::to_string(violations) + " violations"};
}

Outcome gamma_critical() {
    const GammaPrediction pr = predict_gamma_cr(NormalizedPoint{-0.95, 0.0}.spec(4), 0, 1);
    const auto ep = first_ep2_along_gamma(4, -0.95, 0, 1, 0.02, 801);
    if (!ep)
        return {false, "no EP2 found for the j~=-0.95 ground pair"};
    const double rel = std::abs(pr.gamma_cr - ep->parameter) / ep->parameter;
    const auto ferro = first_ep2_along_gamma(4, 0.95, 0, 1, 0.5, 801);
    return {rel <= 0.05 && !ferro,
            "j~=-0.95: predicted " + num(pr.gamma_cr, 6) + " vs located " + num(ep->parameter, 6) + " (rel " +
                num(rel) + ", tol 5%); j~=+0.95 ground pair EP below 0.5: " + (ferro ? "yes" : "none")};
}

Outcome crossing_stability() {
    const SweepResult r0 = sweep(SweepGrid::uniform(ParameterPath{4, SweepAxis::j_tilde, 0.0, {}}, -1.0, 1.0, 801));
    int split_checked = 0, split_ok = 0;
    double worst_slope = 0.0;
    std::ostringstream where;
    for (const auto& c : classify_crossings(r0)) {
        if (c.kind != CrossingKind::opposite || std::abs(c.location) < 0.1)
            continue; // j~ = 0 is the free-spin point where whole multiplets meet
        const CrossingSplit model = crossing_split_model(4, c);
        // only crossings whose split survives as an isolated EP2 pair at gamma~ = 0.21
        const auto at21 = measure_split(4, c, 0.21, 0.3);
        if (!at21 || std::abs(at21->half_width() / (0.21 * model.half_width_slope) - 1.0) > 0.25)
            continue;
        ++split_checked;
        // least-squares slope through the origin at gamma~ <= 0.05
        double sxy = 0.0, sxx = 0.0;
        bool complete = true;
        for (double g : {0.01, 0.02, 0.03, 0.04, 0.05}) {
            const auto m = measure_split(4, c, g, std::max(0.05, 3 * g * model.half_width_slope));
            if (!m) {
                complete = false;
                break;
            }
            sxy += g * m->half_width();
            sxx += g * g;
        }
        if (!complete)
            continue;
        const double rel = std::abs(sxy / sxx - model.half_width_slope) / model.half_width_slope;
        worst_slope = std::max(worst_slope, rel);
        if (rel <= 0.10)
            ++split_ok;
        where << " " << num(c.location, 5);
    }
    const SweepResult r21 = sweep(SweepGrid::uniform(ParameterPath{4, SweepAxis::j_tilde, 0.21, {}}, -1.0, 1.0, 801));
    int stable = 0;
    double best_gap = INFINITY;
    for (const auto& c : classify_crossings(r21))
        if (c.kind == CrossingKind::same && std::abs(c.location) > 0.1) {
            best_gap = std::min(best_gap, c.gap);
            if (c.gap <= 1e-8)
                ++stable;
        }
    return {split_checked > 0 && split_ok == split_checked && stable > 0,
            std::to_string(split_ok) + "/" + std::to_string(split_checked) +
                " opposite crossings split linearly (at j~ =" + where.str() + "; worst slope error " +
                num(worst_slope) + ", tol 10%); " + std::to_string(stable) +
                " same-index crossings persist at gamma~=0.21 (smallest gap " + num(best_gap) + ")"};
}

std::vector<EP3Result> g_ep3;

std::vector<std::string> ep3_files(unsigned workers) {
    EP3Options opt;
    opt.sweep.workers = workers;
    g_ep3 = scan_ep3(4, -1.0, 1.0, 0.35, 0.45, 801, opt);
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : g_ep3) {
        nlohmann::json rj = to_json(e.record);
        rj["pairing_small_j"] = to_string(e.pairing_small_j);
        rj["pairing_large_j"] = to_string(e.pairing_large_j);
        j.push_back(rj);
    }
    const std::string name = "ep3_w" + std::to_string(workers) + ".json";
    write_text_file((g_out / name).string(), j.dump(1) + "\n");
    return {name};
}

Outcome ep3() {
    ep3_files(1);
    if (g_ep3.empty())
        return {false, "no EP2 collision found in gamma~ [0.35, 0.45]"};
    int bad_sig = 0, bad_exchange = 0;
    std::ostringstream where;
    for (const auto& e : g_ep3) {
        const auto& z = e.record.indices;
        if (z.size() != 3 || z[0] == Z2Index::undefined || z[1] == z[0] || z[2] != z[0])
            ++bad_sig;
        if (e.pairing_large_j != Pairing::lower_middle || e.pairing_small_j != Pairing::middle_upper)
            ++bad_exchange;
        where << " (" << num(e.record.j_tilde, 6) << ", " << num(e.record.gamma_tilde, 6) << ") " << to_char(z[0])
              << to_char(z[1]) << to_char(z[2]) << ";";
    }
    return {bad_sig == 0 && bad_exchange == 0,
            std::to_string(g_ep3.size()) + " EP3 at (j~, gamma~):" + where.str() + " signature failures " +
                std::to_string(bad_sig) + ", exchange failures " + std::to_string(bad_exchange)};
}

Outcome almost_zero_mode() {
    double worst = 0.0;
    for (double j : {10.0, -10.0}) {
        const double exact = solve_modes(8, j, 1.0)[0].energy;
        worst = std::max(worst, std::abs(almost_zero_energy(8, j, 1.0) - exact) / exact);
    }
    return {worst <= 0.05, "N=8, Delta/|J|=0.1: relative error " + num(worst) + " (tol 5%)"};
}

Outcome weak_coupling() {
    int total = 0, intra = 0, odd = 0, total_ext = 0, intra_ext = 0;
    for (double jt : {-0.1011, 0.1011}) {
        const NormalizedPoint p{jt, 0.0};
        const auto states = full_spectrum(4, jt, p.delta());
        const auto s0 = spectrum_with_indices(build_hamiltonian(p.spec(4)), build_parity(4));
        const OracleMatch m = match_oracle(s0, states);
        for (double gmax : {0.3, 1.0}) {
            const SweepResult r =
                sweep(SweepGrid::uniform(ParameterPath{4, SweepAxis::gamma_tilde, jt, {}}, 0.0, gmax, 801));
            for (const auto& e : r.ep2) {
                const int ra = states[m.state_of[e.levels[0]]].r, rb = states[m.state_of[e.levels[1]]].r;
                if (gmax == 0.3) {
                    ++total;
                    intra += ra == rb;
                } else {
                    ++total_ext;
                    intra_ext += ra == rb;
                    odd += std::abs(ra - rb) % 2 == 1;
                }
            }
        }
    }
    return {intra == 0 && intra_ext == 0 && odd == total_ext,
            std::to_string(total) + " EP2 up to gamma~=0.3 (" + std::to_string(intra) + " intra-band); extended to 1.0: " +
                std::to_string(total_ext) + " EP2, " + std::to_string(intra_ext) + " intra-band, " +
                std::to_string(odd) + " with odd band difference"};
}

Outcome determinism() {
    std::size_t e = 0, v = 0;
    std::vector<std::string> one = selection_rule_files(1, e, v), four = selection_rule_files(4, e, v);
    auto a = ep3_files(1), b = ep3_files(4);
    one.insert(one.end(), a.begin(), a.end());
    four.insert(four.end(), b.begin(), b.end());
    int differ = 0;
    for (std::size_t k = 0; k < one.size(); ++k) {
        std::ifstream fa(g_out / one[k], std::ios::binary), fb(g_out / four[k], std::ios::binary);
        std::stringstream sa, sb;
        sa << fa.rdbuf();
        sb << fb.rdbuf();
        if (sa.str().empty() || sa.str() != sb.str())
            ++differ;
    }
    return {differ == 0, std::to_string(one.size()) + " output files compared (workers 1 vs 4), " +
                             std::to_string(differ) + " differ"};
}

} // namespace

int main(int argc, char** argv) {
    if (argc > 1)
        g_out = argv[1];
    fs::create_directories(g_out);

    struct Criterion {
        int id;
        const char* name;
        double budget_s; // 0: none
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "oracle equivalence (energies)", 30, oracle_energies},
        {2, "oracle equivalence (parities)", 0, oracle_parities},
        {3, "pseudo-Hermiticity", 10, pseudo_hermiticity},
        {4, "selection rule exhaustive", 300, selection_rule},
        {5, "two-level critical gain", 0, gamma_critical},
        {6, "crossing stability", 0, crossing_stability},
        {7, "EP3 existence and signature", 0, ep3},
        {8, "almost-zero-mode asymptotics", 0, almost_zero_mode},
        {9, "weak-coupling band structure", 0, weak_coupling},
        {10, "determinism", 0, determinism},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0 && dt > c.budget_s) {
            o.pass = false;
            o.detail += "; over time budget " + num(c.budget_s) + " s";
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << std::setw(2) << c.id << "] " << c.name << ": " << o.detail
                  << " (" << std::fixed << std::setprecision(2) << dt << " s)" << std::defaultfloat << std::endl;
    }
    std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criteria failed" : std::string("acceptance: all 10 criteria passed"))
              << std::endl;
    return failed ? 1 : 0;
}
