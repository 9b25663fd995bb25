#pragma once

// Exceptional-point analysis on top of level tracking: crossing classification,
// two-level projections and critical-gain prediction, third-order EP search, and
// the Z2 selection-rule audit.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "psh/biortho.hpp"
#include "psh/errors.hpp"
#include "psh/model.hpp"
#include "psh/oracle.hpp"
#include "psh/tracking.hpp"

namespace psh {

// ---------------------------------------------------------------------------
// Oracle matching

struct OracleMatch {
    /// oracle state (index into the oracle list) assigned to each numeric level
    std::vector<int> state_of;
    double max_energy_error = 0.0;
    /// energy clusters whose parity content differs between oracle and numerics
    int parity_mismatches = 0;
};

/// Pairs a Hermitian-point spectrum with the oracle list, both sorted by energy.
/// Inside a cluster of equal energies states are paired by parity, which removes the
/// arbitrary ordering of exact degeneracies.
inline OracleMatch match_oracle(const BiorthoSpectrum& spec, const std::vector<OracleState>& oracle,
                                double cluster_tol = 1e-9) {
    if (spec.size() != oracle.size())
        throw std::invalid_argument("match_oracle: spectrum and oracle sizes differ");
    OracleMatch m;
    m.state_of.assign(spec.size(), -1);
    std::size_t start = 0;
    while (start < oracle.size()) {
        std::size_t end = start + 1;
        while (end < oracle.size() && oracle[end].energy - oracle[end - 1].energy <= cluster_tol)
            ++end;
        std::vector<int> free_states;
        for (std::size_t s = start; s < end; ++s)
            free_states.push_back(static_cast<int>(s));
        bool mismatch = false;
        for (std::size_t l = start; l < end; ++l) {
            const auto& lv = spec.levels[l];
            m.max_energy_error = std::max(m.max_energy_error, std::abs(lv.eigenvalue - oracle[l].energy));
            auto it = std::find_if(free_states.begin(), free_states.end(),
                                   [&](int s) { return oracle[s].parity == to_int(lv.z2); });
            if (it == free_states.end()) {
                mismatch = true;
                it = free_states.begin();
            }
            m.state_of[l] = *it;
            free_states.erase(it);
        }
        if (mismatch)
            ++m.parity_mismatches;
        start = end;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Selection rule

struct SelectionViolation {
    std::size_t record = 0;
    std::string reason;
};

struct SelectionReport {
    std::size_t checked = 0;
    std::vector<SelectionViolation> violations;
    bool ok() const { return violations.empty(); }
};

/// Every order-2 record must join opposite, defined indices; every order-3 record
/// must carry a staggered (s, -s, s) signature.
inline SelectionReport verify_selection_rule(const std::vector<EPRecord>& records) {
    SelectionReport rep;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const EPRecord& r = records[i];
        ++rep.checked;
        if (static_cast<int>(r.indices.size()) != r.order) {
            rep.violations.push_back({i, "index count does not match EP order"});
            continue;
        }
        if (std::any_of(r.indices.begin(), r.indices.end(), [](Z2Index z) { return z == Z2Index::undefined; })) {
            rep.violations.push_back({i, "undefined index on the real side"});
            continue;
        }
        for (std::size_t k = 1; k < r.indices.size(); ++k)
            if (r.indices[k] == r.indices[k - 1]) {
                rep.violations.push_back({i, r.order == 2 ? "second-order EP between equal indices"
                                                          : "higher-order EP without staggered signature"});
                break;
            }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Two-level projection and critical gain

/// M_ij = <L_i|H|R_j> for the two levels of `spec` (an already solved spectrum).
inline ComplexMatrix project_two_level(const ComplexMatrix& h, const BiorthoSpectrum& spec, int level_a,
                                       int level_b) {
    for (int l : {level_a, level_b}) {
        if (l < 0 || static_cast<std::size_t>(l) >= spec.size())
            throw std::invalid_argument("project_two_level: level out of range");
        const auto& rec = spec.levels[static_cast<std::size_t>(l)];
        if (!rec.real)
            throw std::invalid_argument("project_two_level: level has complex eigenvalue");
        if (rec.z2 == Z2Index::undefined)
            throw IndexIllDefined(rec.ep_indicator, "project_two_level: level index is ill-defined");
    }
    const auto& es = spec.eigensystem;
    const int ids[2] = {level_a, level_b};
    ComplexMatrix m(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            m(i, j) = es.left.col(ids[i]).dot(h * es.right.col(ids[j]));
    return m;
}

inline ComplexMatrix project_two_level(const ComplexMatrix& h, const ComplexMatrix& zeta, int level_a, int level_b,
                                       const BiorthoOptions& opt = {}) {
    return project_two_level(h, spectrum_with_indices(h, zeta, opt), level_a, level_b);
}

struct GammaPrediction {
    double gamma_cr = 0.0;
    double gap = 0.0;
    Complex w;
    int level_a = 0, level_b = 0;
    Z2Index index_a = Z2Index::undefined, index_b = Z2Index::undefined;
};

/// gamma_cr = gap / (2|w|) with w = <L_a|V|R_b> and V = dH/dgamma, for two real levels
/// of the Hermitian chain at gamma = 0.
inline GammaPrediction predict_gamma_cr(const ChainSpec& spec_at_zero, int level_a, int level_b,
                                        double w_floor = 1e-9, const BiorthoOptions& opt = {}) {
    spec_at_zero.validate();
    for (double g : spec_at_zero.gamma_profile)
        if (g != 0.0)
            throw std::invalid_argument("predict_gamma_cr: spec must have zero gain");
    const ComplexMatrix h = build_hamiltonian(spec_at_zero);
    const ComplexMatrix zeta = build_parity(spec_at_zero.n);
    const BiorthoSpectrum s = spectrum_with_indices(h, zeta, opt);
    const ComplexMatrix v = gain_generator(spec_at_zero);
    const ComplexMatrix mv = project_two_level(v, s, level_a, level_b);
    GammaPrediction p;
    p.level_a = level_a;
    p.level_b = level_b;
    p.index_a = s.levels[level_a].z2;
    p.index_b = s.levels[level_b].z2;
    p.w = mv(0, 1);
    p.gap = std::abs(s.levels[level_a].eigenvalue.real() - s.levels[level_b].eigenvalue.real());
    if (std::abs(p.w) < w_floor)
        throw AccidentallyZeroElement(std::abs(p.w), "predict_gamma_cr: off-diagonal gain element vanishes");
    p.gamma_cr = p.gap / (2.0 * std::abs(p.w));
    return p;
}

/// Follows levels (a, b) of the gamma = 0 spectrum along gamma_tilde at fixed
/// j_tilde and returns the first EP2 they form together, if any.
inline std::optional<EPRecord> first_ep2_along_gamma(int n, double j_tilde, int level_a, int level_b,
                                                     double gamma_max, std::size_t points = 801,
                                                     const SweepOptions& opt = {}) {
    const SweepGrid grid = SweepGrid::uniform(ParameterPath{n, SweepAxis::gamma_tilde, j_tilde, {}}, 0.0, gamma_max, points);
    const SweepResult r = sweep(grid, opt);
    const int lo = std::min(level_a, level_b), hi = std::max(level_a, level_b);
    for (const auto& rec : r.ep2)
        if (rec.levels[0] == lo && rec.levels[1] == hi)
            return rec;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Level crossings

enum class CrossingKind { same, opposite, ambiguous };

inline const char* to_string(CrossingKind k) {
    switch (k) {
    case CrossingKind::same:
        return "same";
    case CrossingKind::opposite:
        return "opposite";
    default:
        return "ambiguous";
    }
}

struct Crossing {
    double location = 0.0;
    int track_a = 0, track_b = 0;
    Z2Index index_a = Z2Index::undefined, index_b = Z2Index::undefined;
    CrossingKind kind = CrossingKind::ambiguous;
    /// |Re e_a - Re e_b| at `location`.
    double gap = 0.0;
    double bracket_width = 0.0;
};

struct CrossingOptions {
    TrackingOptions tracking;
    /// Bisection stops once the bracket is this narrow.
    double location_tol = 1e-12;
    /// A local gap minimum below this without a sign change is reported as ambiguous.
    double ambiguous_gap = 1e-6;
};

namespace detail {

inline double real_gap(const SolvedPoint& sp, int a, int b) {
    return sp.spectrum.levels[static_cast<std::size_t>(a)].eigenvalue.real() -
           sp.spectrum.levels[static_cast<std::size_t>(b)].eigenvalue.real();
}

} // namespace detail

/// Bisects the sign change of Re(e_a - e_b) for levels a, b of `left`, following them
/// by overlap. Returns {location, gap, width, index_a, index_b}.
inline Crossing refine_crossing(const MatrixFamily& fam, SolvedPoint left, int a, int b, double right_value,
                                const CrossingOptions& opt = {}) {
    const double d0 = detail::real_gap(left, a, b);
    double hi = right_value;
    Crossing c;
    c.index_a = left.spectrum.levels[a].z2;
    c.index_b = left.spectrum.levels[b].z2;
    for (int it = 0; it < opt.tracking.max_bisection && std::abs(hi - left.value) > opt.location_tol; ++it) {
        const double mid = 0.5 * (left.value + hi);
        SolvedPoint sp = solve_point(fam, mid, opt.tracking);
        const LevelMatch m = match_levels(left.spectrum, sp.spectrum);
        const int ma = m.next_of[a], mb = m.next_of[b];
        const double d = detail::real_gap(sp, ma, mb);
        if (d == 0.0 || (d > 0.0) != (d0 > 0.0)) {
            hi = mid;
        } else {
            left = std::move(sp);
            a = ma;
            b = mb;
        }
    }
    c.location = 0.5 * (left.value + hi);
    c.bracket_width = std::abs(hi - left.value);
    c.gap = std::abs(detail::real_gap(left, a, b));
    return c;
}

/// Crossings of real tracks in a sweep, labelled by the pair's Z2-indices.
/// At gamma = 0 opposite-index crossings are the ones that split into EP2 pairs once
/// gain is switched on; same-index crossings are expected to persist.
inline std::vector<Crossing> classify_crossings(const MatrixFamily& fam, const SweepResult& sweep_result,
                                                const CrossingOptions& opt = {}) {
    std::vector<Crossing> out;
    const auto& tracks = sweep_result.tracks;
    const std::size_t nt = tracks.size();
    if (nt == 0)
        return out;
    const std::size_t np = tracks.front().samples.size();
    auto gap = [&](std::size_t a, std::size_t b, std::size_t i) {
        return tracks[a].samples[i].eigenvalue.real() - tracks[b].samples[i].eigenvalue.real();
    };
    auto both_real = [&](std::size_t a, std::size_t b, std::size_t i) {
        return tracks[a].samples[i].real && tracks[b].samples[i].real;
    };
    for (std::size_t i = 0; i + 1 < np; ++i) {
        std::optional<SolvedPoint> left;
        for (std::size_t a = 0; a < nt; ++a)
            for (std::size_t b = a + 1; b < nt; ++b) {
                if (!both_real(a, b, i) || !both_real(a, b, i + 1))
                    continue;
                const double d0 = gap(a, b, i), d1 = gap(a, b, i + 1);
                if (d0 != 0.0 && d1 != 0.0 && (d0 > 0.0) != (d1 > 0.0)) {
                    if (!left)
                        left = solve_point(fam, tracks[a].samples[i].parameter, opt.tracking);
                    Crossing c = refine_crossing(fam, *left, tracks[a].samples[i].level, tracks[b].samples[i].level,
                                                 tracks[a].samples[i + 1].parameter, opt);
                    c.track_a = static_cast<int>(a);
                    c.track_b = static_cast<int>(b);
                    if (c.index_a == Z2Index::undefined || c.index_b == Z2Index::undefined)
                        c.kind = CrossingKind::ambiguous;
                    else
                        c.kind = c.index_a == c.index_b ? CrossingKind::same : CrossingKind::opposite;
                    out.push_back(c);
                } else if (i > 0 && both_real(a, b, i - 1)) {
                    const double dm = std::abs(gap(a, b, i - 1)), dc = std::abs(d0), dp = std::abs(d1);
                    if (dc < opt.ambiguous_gap && dc < dm && dc < dp && (gap(a, b, i - 1) > 0.0) == (d1 > 0.0)) {
                        Crossing c;
                        c.location = tracks[a].samples[i].parameter;
                        c.track_a = static_cast<int>(a);
                        c.track_b = static_cast<int>(b);
                        c.index_a = tracks[a].samples[i].z2;
                        c.index_b = tracks[b].samples[i].z2;
                        c.kind = CrossingKind::ambiguous;
                        c.gap = dc;
                        out.push_back(c);
                    }
                }
            }
    }
    std::stable_sort(out.begin(), out.end(), [](const Crossing& x, const Crossing& y) { return x.location < y.location; });
    return out;
}

inline std::vector<Crossing> classify_crossings(const SweepResult& sweep_result, const CrossingOptions& opt = {}) {
    return classify_crossings(sweep_result.grid.path.family(), sweep_result, opt);
}

/// Two-level data of a gamma = 0 crossing along j_tilde: slope alpha with
/// e_a - e_b = 2 alpha (j - j_c), coupling w = <L_a|V|R_b>, and the predicted
/// EP2 half-width per unit gain |w| / alpha.
struct CrossingSplit {
    double alpha = 0.0;
    Complex w;
    double half_width_slope = 0.0;
};

inline CrossingSplit crossing_split_model(int n, const Crossing& c, double step = 1e-5,
                                          const TrackingOptions& opt = {}) {
    const ParameterPath path{n, SweepAxis::j_tilde, 0.0, {}};
    const MatrixFamily fam = path.family();
    // Pick the crossing levels just left of the crossing point.
    const SolvedPoint left = solve_point(fam, c.location - step, opt);
    const SolvedPoint right = solve_point(fam, c.location + step, opt);
    const SolvedPoint centre = solve_point(fam, c.location, opt);
    // Levels at the centre are the two closest real eigenvalues with the crossing indices.
    int ca = -1, cb = -1;
    double best = INFINITY;
    const auto& lv = centre.spectrum.levels;
    for (std::size_t a = 0; a < lv.size(); ++a)
        for (std::size_t b = 0; b < lv.size(); ++b) {
            if (a == b || lv[a].z2 != c.index_a || lv[b].z2 != c.index_b)
                continue;
            const double d = std::abs(lv[a].eigenvalue - lv[b].eigenvalue);
            if (d < best) {
                best = d;
                ca = static_cast<int>(a);
                cb = static_cast<int>(b);
            }
        }
    if (ca < 0)
        throw NumericError("crossing_split_model: crossing levels not found");
    const LevelMatch ml = match_levels(centre.spectrum, left.spectrum);
    const LevelMatch mr = match_levels(centre.spectrum, right.spectrum);
    const double da = (right.spectrum.levels[mr.next_of[ca]].eigenvalue.real() -
                       left.spectrum.levels[ml.next_of[ca]].eigenvalue.real()) /
                      (2 * step);
    const double db = (right.spectrum.levels[mr.next_of[cb]].eigenvalue.real() -
                       left.spectrum.levels[ml.next_of[cb]].eigenvalue.real()) /
                      (2 * step);
    CrossingSplit s;
    s.alpha = 0.5 * std::abs(da - db);
    const ComplexMatrix v = gain_generator(n);
    const auto& es = centre.spectrum.eigensystem;
    s.w = es.left.col(ca).dot(v * es.right.col(cb));
    s.half_width_slope = std::abs(s.w) / s.alpha;
    return s;
}

/// The two EP2s an opposite-index crossing splits into at finite gain.
struct CrossingSplitMeasurement {
    double gamma = 0.0;
    EPRecord lower;
    EPRecord upper;
    double centre() const { return 0.5 * (lower.parameter + upper.parameter); }
    double half_width() const { return 0.5 * (upper.parameter - lower.parameter); }
};

/// Sweeps j_tilde around the crossing at fixed gamma_tilde and returns the nearest
/// EP2 pair, on one level pair, that brackets the crossing location.
inline std::optional<CrossingSplitMeasurement> measure_split(int n, const Crossing& c, double gamma, double radius,
                                                             std::size_t points = 801,
                                                             const SweepOptions& opt = {}) {
    const double lo = std::max(-1.0, c.location - radius), hi = std::min(1.0, c.location + radius);
    const SweepResult r = sweep(SweepGrid::uniform(ParameterPath{n, SweepAxis::j_tilde, gamma, {}}, lo, hi, points), opt);
    std::optional<CrossingSplitMeasurement> best;
    for (const auto& a : r.ep2)
        for (const auto& b : r.ep2) {
            if (a.boundary || b.boundary || a.levels != b.levels)
                continue;
            if (!(a.parameter < c.location && c.location < b.parameter))
                continue;
            if (!((a.indices[0] == c.index_a && a.indices[1] == c.index_b) ||
                  (a.indices[0] == c.index_b && a.indices[1] == c.index_a)))
                continue;
            CrossingSplitMeasurement m{gamma, a, b};
            if (!best || m.half_width() < best->half_width())
                best = m;
        }
    return best;
}

// ---------------------------------------------------------------------------
// Third-order exceptional points

enum class Pairing { none, lower_middle, middle_upper };

inline const char* to_string(Pairing p) {
    switch (p) {
    case Pairing::lower_middle:
        return "lower-middle";
    case Pairing::middle_upper:
        return "middle-upper";
    default:
        return "none";
    }
}

struct EP3Result {
    EPRecord record;
    /// Which pair is complex just past the two EP2s, on the small and large j_tilde side.
    Pairing pairing_small_j = Pairing::none;
    Pairing pairing_large_j = Pairing::none;
    /// Real-window half-width and gamma at the last bracket point below the EP3.
    double window_half_width = 0.0;
    double gamma_below = 0.0;
    double gamma_above = 0.0;
    bool exchange() const {
        return pairing_small_j != Pairing::none && pairing_large_j != Pairing::none &&
               pairing_small_j != pairing_large_j;
    }
};

struct EP3Options {
    SweepOptions sweep;
    /// Points per local j_tilde scan.
    std::size_t local_points = 241;
    std::size_t max_local_points = 1001;
    /// Bracket tolerance in gamma_tilde.
    double gamma_tol = 1e-7;
    int max_bisection = 60;
};

/// Two EP2s sharing a middle level with a three-real window between them.
struct EP2Window {
    EPRecord lower_ep; ///< smaller j_tilde
    EPRecord upper_ep; ///< larger j_tilde
    int middle = -1;
    int lower = -1;
    int upper = -1;
    Z2Index middle_index = Z2Index::undefined;
    Z2Index outer_index = Z2Index::undefined;
    /// lower, middle, upper eigenvalues at the grid point nearest the centre
    std::vector<Complex> centre_values;
    double centre() const { return 0.5 * (lower_ep.parameter + upper_ep.parameter); }
    double half_width() const { return 0.5 * (upper_ep.parameter - lower_ep.parameter); }
};

namespace detail {

/// Windows in a j_tilde sweep: consecutive EP2s on one track, joining it to two
/// different partners, with all three tracks real in between.
inline std::vector<EP2Window> find_windows(const SweepResult& r) {
    std::vector<EP2Window> out;
    const auto& eps = r.ep2;
    for (std::size_t x = 0; x < eps.size(); ++x)
        for (std::size_t y = x + 1; y < eps.size(); ++y) {
            const EPRecord& e1 = eps[x];
            const EPRecord& e2 = eps[y];
            if (e1.boundary || e2.boundary)
                continue;
            int shared = -1;
            for (int t1 : e1.levels)
                for (int t2 : e2.levels)
                    if (t1 == t2)
                        shared = t1;
            if (shared < 0)
                continue;
            const int o1 = e1.levels[0] == shared ? e1.levels[1] : e1.levels[0];
            const int o2 = e2.levels[0] == shared ? e2.levels[1] : e2.levels[0];
            if (o1 == o2)
                continue;
            // no other EP2 on the shared track in between
            bool interrupted = false;
            for (std::size_t z = x + 1; z < y; ++z)
                for (int t : eps[z].levels)
                    if (t == shared || t == o1 || t == o2)
                        interrupted = true;
            if (interrupted)
                continue;
            // all three real strictly between the two EP2s
            const auto& pts = r.grid.points;
            bool all_real = false;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                if (pts[i] <= e1.parameter || pts[i] >= e2.parameter)
                    continue;
                all_real = r.tracks[shared].samples[i].real && r.tracks[o1].samples[i].real &&
                           r.tracks[o2].samples[i].real;
                if (!all_real)
                    break;
            }
            if (!all_real)
                continue;
            EP2Window w;
            w.lower_ep = e1;
            w.upper_ep = e2;
            w.middle = shared;
            // order outer levels by energy inside the window
            std::size_t mid_i = 0;
            double best = INFINITY;
            for (std::size_t i = 0; i < pts.size(); ++i)
                if (std::abs(pts[i] - w.centre()) < best) {
                    best = std::abs(pts[i] - w.centre());
                    mid_i = i;
                }
            const double eo1 = r.tracks[o1].samples[mid_i].eigenvalue.real();
            const double eo2 = r.tracks[o2].samples[mid_i].eigenvalue.real();
            w.lower = eo1 < eo2 ? o1 : o2;
            w.upper = eo1 < eo2 ? o2 : o1;
            const double em = r.tracks[shared].samples[mid_i].eigenvalue.real();
            if (!(std::min(eo1, eo2) < em && em < std::max(eo1, eo2)))
                continue;
            w.centre_values = {r.tracks[w.lower].samples[mid_i].eigenvalue, r.tracks[shared].samples[mid_i].eigenvalue,
                               r.tracks[w.upper].samples[mid_i].eigenvalue};
            w.middle_index = r.tracks[shared].samples[mid_i].z2;
            w.outer_index = r.tracks[w.lower].samples[mid_i].z2;
            if (r.tracks[w.upper].samples[mid_i].z2 != w.outer_index)
                continue;
            out.push_back(w);
        }
    return out;
}

inline std::optional<EP2Window> window_near(int n, double gamma, double centre, double radius,
                                            std::size_t points, const EP3Options& opt) {
    const double lo = std::max(-1.0, centre - radius), hi = std::min(1.0, centre + radius);
    const SweepGrid grid = SweepGrid::uniform(ParameterPath{n, SweepAxis::j_tilde, gamma, {}}, lo, hi, points);
    const SweepResult r = sweep(grid, opt.sweep);
    std::optional<EP2Window> best;
    for (auto& w : find_windows(r))
        if (!best || std::abs(w.centre() - centre) < std::abs(best->centre() - centre))
            best = w;
    return best;
}

/// Which two of the triple near `centre_value` form the conjugate pair at (gamma, j).
inline Pairing pairing_at(int n, double gamma, double j, Complex centre_value) {
    const ParameterPath path{n, SweepAxis::j_tilde, gamma, {}};
    const SolvedPoint sp = solve_point(path.family(), j);
    std::vector<std::pair<double, int>> near;
    for (std::size_t k = 0; k < sp.spectrum.size(); ++k)
        near.emplace_back(std::abs(sp.spectrum.levels[k].eigenvalue - centre_value), static_cast<int>(k));
    std::sort(near.begin(), near.end());
    int real_member = -1, real_count = 0;
    for (int t = 0; t < 3; ++t)
        if (sp.spectrum.levels[near[t].second].real) {
            real_member = near[t].second;
            ++real_count;
        }
    if (real_count != 1)
        return Pairing::none;
    double pair_re = 0.0;
    for (int t = 0; t < 3; ++t)
        if (near[t].second != real_member)
            pair_re += 0.5 * sp.spectrum.levels[near[t].second].eigenvalue.real();
    // The survivor is the outer level on its own side of the pair.
    return sp.spectrum.levels[real_member].eigenvalue.real() > pair_re ? Pairing::lower_middle : Pairing::middle_upper;
}

} // namespace detail

/// All three-real windows bounded by EP2 pairs in a j_tilde sweep over [j_lo, j_hi].
inline std::vector<EP2Window> ep2_windows(int n, double gamma, double j_lo, double j_hi, std::size_t points,
                                          const SweepOptions& opt = {}) {
    const SweepGrid grid = SweepGrid::uniform(ParameterPath{n, SweepAxis::j_tilde, gamma, {}}, j_lo, j_hi, points);
    return detail::find_windows(sweep(grid, opt));
}

/// Starting from a window present at gamma_lo, bisects in gamma_tilde for the point
/// where its two bounding EP2s coalesce. The window must be gone at gamma_hi.
inline EP3Result find_ep3(int n, const EP2Window& start, double gamma_lo, double gamma_hi,
                          const EP3Options& opt = {}) {
    if (!(gamma_hi > gamma_lo))
        throw std::invalid_argument("find_ep3: empty gamma interval");
    EP2Window below = start;
    double g_lo = gamma_lo, g_hi = gamma_hi;
    // The window is a thin cusp near the EP3 and its centre drifts with gamma, so the
    // local scan follows both the width and the drift.
    double slope = 0.0; // d centre / d gamma from the last two accepted windows
    bool have_slope = false;
    auto probe = [&](double g, double span) {
        const double centre = below.centre() + slope * span;
        const double slack = have_slope ? 0.25 * std::abs(slope) * span : 2.0 * span;
        const double radius = 4.0 * below.half_width() + slack + 1e-9;
        const double spacing = below.half_width() / 20.0;
        const auto want = static_cast<std::size_t>(std::ceil(2.0 * radius / std::max(spacing, 1e-300)));
        const std::size_t pts = std::clamp<std::size_t>(want, opt.local_points, opt.max_local_points);
        return detail::window_near(n, g, centre, radius, pts, opt);
    };

    {
        const double wide = std::max(4.0 * below.half_width(), 0.05);
        if (detail::window_near(n, g_hi, below.centre(), wide, opt.local_points, opt))
            throw NoEP3InBox("find_ep3: EP2 window persists at the top of the gamma interval");
    }

    for (int it = 0; it < opt.max_bisection && g_hi - g_lo > opt.gamma_tol; ++it) {
        const double g = 0.5 * (g_lo + g_hi);
        auto w = probe(g, g - g_lo);
        if (w && w->middle_index == below.middle_index && w->outer_index == below.outer_index) {
            slope = (w->centre() - below.centre()) / (g - g_lo);
            have_slope = true;
            below = *w;
            g_lo = g;
        } else {
            g_hi = g;
        }
    }

    EP3Result res;
    res.gamma_below = g_lo;
    res.gamma_above = g_hi;
    res.window_half_width = below.half_width();
    EPRecord& rec = res.record;
    rec.order = 3;
    rec.j_tilde = below.centre();
    rec.gamma_tilde = 0.5 * (g_lo + g_hi);
    rec.parameter = rec.gamma_tilde;
    rec.bracket_width = g_hi - g_lo;
    rec.levels = {below.lower, below.middle, below.upper};
    rec.indices = {below.outer_index, below.middle_index, below.outer_index};
    rec.eigenvalues = below.centre_values;
    rec.residual = 0.0;
    for (const auto& x : rec.eigenvalues)
        for (const auto& y : rec.eigenvalues)
            rec.residual = std::max(rec.residual, std::abs(x - y));

    const Complex centre_value = (rec.eigenvalues[0] + rec.eigenvalues[1] + rec.eigenvalues[2]) / 3.0;
    const double step = std::max(2.0 * below.half_width(), 1e-4);
    res.pairing_small_j = detail::pairing_at(n, g_lo, below.lower_ep.parameter - step, centre_value);
    res.pairing_large_j = detail::pairing_at(n, g_lo, below.upper_ep.parameter + step, centre_value);
    return res;
}

/// Every EP3 inside the (j_tilde, gamma_tilde) box that is reached by the collision
/// of two EP2s visible at the bottom edge of the box.
inline std::vector<EP3Result> scan_ep3(int n, double j_lo, double j_hi, double gamma_lo, double gamma_hi,
                                       std::size_t points = 801, const EP3Options& opt = {}) {
    std::vector<EP3Result> out;
    for (const auto& w : ep2_windows(n, gamma_lo, j_lo, j_hi, points, opt.sweep)) {
        if (w.middle_index == w.outer_index)
            continue;
        try {
            out.push_back(find_ep3(n, w, gamma_lo, gamma_hi, opt));
        } catch (const NoEP3InBox&) {
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const EP3Result& x, const EP3Result& y) { return x.record.j_tilde < y.record.j_tilde; });
    return out;
}

} // namespace psh
