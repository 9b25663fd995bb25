#pragma once

// Parameter paths, biorthogonal level matching, sweeps with level tracking,
// and second-order exceptional point localization on the reality boundary.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "psh/biortho.hpp"
#include "psh/errors.hpp"
#include "psh/model.hpp"
#include "psh/numerics.hpp"
#include "psh/parallel.hpp"

namespace psh {

/// One-parameter family of zeta-pseudo-Hermitian matrices.
struct MatrixFamily {
    std::function<ComplexMatrix(double)> hamiltonian;
    ComplexMatrix zeta;
};

enum class SweepAxis { j_tilde, gamma_tilde };

inline const char* to_string(SweepAxis a) { return a == SweepAxis::j_tilde ? "j_tilde" : "gamma_tilde"; }

inline SweepAxis parse_axis(const std::string& s) {
    if (s == "j_tilde" || s == "jt" || s == "j")
        return SweepAxis::j_tilde;
    if (s == "gamma_tilde" || s == "gt" || s == "gamma")
        return SweepAxis::gamma_tilde;
    throw std::invalid_argument("unknown sweep axis '" + s + "'");
}

/// Normalized chain parameters with one coordinate varied. The gain profile is
/// gamma_tilde * gain_shape; an empty shape means the staggered profile.
struct ParameterPath {
    int n = 4;
    SweepAxis axis = SweepAxis::j_tilde;
    double fixed_value = 0.0;
    std::vector<double> gain_shape;

    NormalizedPoint point(double v) const {
        return axis == SweepAxis::j_tilde ? NormalizedPoint{v, fixed_value} : NormalizedPoint{fixed_value, v};
    }

    ChainSpec spec(double v) const {
        const NormalizedPoint p = point(v);
        if (gain_shape.empty())
            return p.spec(n);
        if (!(p.j_tilde >= -1.0 && p.j_tilde <= 1.0) || !(p.gamma_tilde >= 0.0))
            throw std::invalid_argument("ParameterPath: point outside the normalized domain");
        ChainSpec s{n, p.delta(), p.j_tilde, gain_shape};
        for (auto& g : s.gamma_profile)
            g *= p.gamma_tilde;
        s.validate();
        return s;
    }

    MatrixFamily family() const {
        ParameterPath self = *this;
        return MatrixFamily{[self](double v) { return build_hamiltonian(self.spec(v)); }, build_parity(n)};
    }
};

struct SweepGrid {
    ParameterPath path;
    std::vector<double> points;

    void validate() const {
        if (points.empty())
            throw std::invalid_argument("SweepGrid: no points");
        for (std::size_t i = 1; i < points.size(); ++i)
            if (!(points[i] > points[i - 1]))
                throw std::invalid_argument("SweepGrid: points must be strictly increasing");
        path.spec(points.front());
        path.spec(points.back());
    }

    static SweepGrid uniform(ParameterPath path, double lo, double hi, std::size_t count) {
        if (count < 2 || !(hi > lo))
            throw std::invalid_argument("SweepGrid::uniform: need count >= 2 and hi > lo");
        SweepGrid g{std::move(path), {}};
        g.points.resize(count);
        for (std::size_t i = 0; i < count; ++i)
            g.points[i] = (i + 1 == count) ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
        return g;
    }
};

struct TrackingOptions {
    BiorthoOptions biortho;
    /// Matched biorthogonal overlap below this is a track break.
    double min_overlap = 0.5;
    /// Cells with composite transitions or weak overlaps are halved up to this depth.
    int max_subdivision = 10;
    /// Parameter offsets tried when a point lands on a defective matrix.
    double nudge = 1e-9;
    int max_nudges = 8;
    /// Reality-boundary bisection tolerance in the swept parameter.
    double ep_tol = 1e-8;
    int max_bisection = 200;
};

struct SolvedPoint {
    double requested = 0.0;
    double value = 0.0;
    bool nudged = false;
    BiorthoSpectrum spectrum;
};

/// Spectrum at `v`; on an exactly defective matrix the parameter is shifted by
/// small offsets instead of failing.
inline SolvedPoint solve_point(const MatrixFamily& fam, double v, const TrackingOptions& opt = {}) {
    SolvedPoint sp;
    sp.requested = v;
    for (int attempt = 0; attempt <= opt.max_nudges; ++attempt) {
        const double shift = attempt == 0 ? 0.0
                                          : ((attempt % 2) ? 1.0 : -1.0) * opt.nudge * (1 + (attempt - 1) / 2) *
                                                std::max(1.0, std::abs(v));
        try {
            sp.value = v + shift;
            sp.nudged = attempt != 0;
            sp.spectrum = spectrum_with_indices(fam.hamiltonian(sp.value), fam.zeta, opt.biortho);
            return sp;
        } catch (const AtExceptionalPoint&) {
            if (attempt == opt.max_nudges)
                throw;
        }
    }
    throw NumericError("solve_point: unreachable");
}

struct LevelMatch {
    std::vector<int> next_of;    ///< level in `next` matched to each level of `prev`
    std::vector<double> overlap; ///< matched overlap per level of `prev`
    double weakest = 1.0;
};

/// Greedy assignment on the gauge-invariant biorthogonal overlap
/// |<L_a(prev)|R_b(next)>| * ||R_a(prev)|| / ||R_b(next)||, which is 1 for an
/// unchanged level and 0 for a level biorthogonal to it.
inline LevelMatch match_levels(const BiorthoSpectrum& prev, const BiorthoSpectrum& next) {
    const auto& lp = prev.eigensystem.left;
    const auto& rp = prev.eigensystem.right;
    const auto& rn = next.eigensystem.right;
    const Eigen::Index n = lp.cols();
    if (rn.cols() != n)
        throw std::invalid_argument("match_levels: spectra of different size");
    Eigen::MatrixXd ov = (lp.adjoint() * rn).cwiseAbs();
    for (Eigen::Index a = 0; a < n; ++a)
        ov.row(a) *= rp.col(a).norm();
    for (Eigen::Index b = 0; b < n; ++b)
        ov.col(b) /= rn.col(b).norm();

    std::vector<std::tuple<double, int, int>> cand;
    cand.reserve(static_cast<std::size_t>(n * n));
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b)
            cand.emplace_back(ov(a, b), static_cast<int>(a), static_cast<int>(b));
    std::sort(cand.begin(), cand.end(), [](const auto& x, const auto& y) {
        if (std::get<0>(x) != std::get<0>(y))
            return std::get<0>(x) > std::get<0>(y);
        if (std::get<1>(x) != std::get<1>(y))
            return std::get<1>(x) < std::get<1>(y);
        return std::get<2>(x) < std::get<2>(y);
    });
    LevelMatch m;
    m.next_of.assign(static_cast<std::size_t>(n), -1);
    m.overlap.assign(static_cast<std::size_t>(n), 0.0);
    std::vector<char> taken(static_cast<std::size_t>(n), 0);
    Eigen::Index assigned = 0;
    for (const auto& [v, a, b] : cand) {
        if (m.next_of[a] >= 0 || taken[b])
            continue;
        m.next_of[a] = b;
        m.overlap[a] = v;
        taken[b] = 1;
        if (++assigned == n)
            break;
    }
    for (double v : m.overlap)
        m.weakest = std::min(m.weakest, v);
    return m;
}

struct EPRecord {
    int order = 2;
    /// Swept-parameter value (midpoint of the final bracket).
    double parameter = 0.0;
    double j_tilde = 0.0;
    double gamma_tilde = 0.0;
    /// Participating levels: track ids inside sweeps, level indices for bare calls.
    std::vector<int> levels;
    /// Z2-indices just outside the EP on the real side, ordered as `levels`.
    std::vector<Z2Index> indices;
    /// Eigenvalue spread of the participating levels at the real-side end.
    double residual = 0.0;
    double bracket_width = 0.0;
    /// Participating eigenvalues on the real side.
    std::vector<Complex> eigenvalues;
    /// Converged onto a sweep endpoint where the matrix is diagonalizable (Delta = 0 or
    /// gamma = 0): a plain degeneracy on the domain boundary rather than an interior EP.
    bool boundary = false;
};

namespace detail {

inline bool mutual_partners(const BiorthoSpectrum& s, int a, int b) {
    const auto& la = s.levels[static_cast<std::size_t>(a)];
    const auto& lb = s.levels[static_cast<std::size_t>(b)];
    return !la.real && !lb.real && la.conjugate_partner == b && lb.conjugate_partner == a;
}

} // namespace detail

/// Bisects the reality boundary of levels (a, b) between a parameter where both are
/// real and one where they form a conjugate pair. Levels are followed by overlap
/// matching from the current real-side end.
inline EPRecord find_ep2(const MatrixFamily& fam, const SolvedPoint& real_side, int level_a, int level_b,
                         const SolvedPoint& complex_side, const TrackingOptions& opt = {}) {
    const auto& rs = real_side.spectrum;
    if (level_a == level_b || level_a < 0 || level_b < 0 || static_cast<std::size_t>(level_a) >= rs.size() ||
        static_cast<std::size_t>(level_b) >= rs.size())
        throw std::invalid_argument("find_ep2: invalid level pair");
    if (!rs.levels[level_a].real || !rs.levels[level_b].real)
        throw NoEPInBracket("find_ep2: levels are not both real at the real-side end");
    {
        const LevelMatch m = match_levels(rs, complex_side.spectrum);
        if (!detail::mutual_partners(complex_side.spectrum, m.next_of[level_a], m.next_of[level_b]))
            throw NoEPInBracket("find_ep2: levels do not form a conjugate pair at the complex-side end");
    }

    SolvedPoint real_end = real_side;
    int a = level_a, b = level_b;
    Z2Index za = rs.levels[a].z2, zb = rs.levels[b].z2;
    double complex_value = complex_side.value;
    for (int it = 0; it < opt.max_bisection && std::abs(complex_value - real_end.value) > opt.ep_tol; ++it) {
        const double mid = 0.5 * (real_end.value + complex_value);
        SolvedPoint sp = solve_point(fam, mid, opt);
        const LevelMatch m = match_levels(real_end.spectrum, sp.spectrum);
        const int ma = m.next_of[a], mb = m.next_of[b];
        const auto& la = sp.spectrum.levels[ma];
        const auto& lb = sp.spectrum.levels[mb];
        if (la.real && lb.real) {
            real_end = std::move(sp);
            a = ma;
            b = mb;
            if (la.z2 != Z2Index::undefined)
                za = la.z2;
            if (lb.z2 != Z2Index::undefined)
                zb = lb.z2;
        } else {
            complex_value = sp.value;
        }
    }

    EPRecord rec;
    rec.order = 2;
    rec.parameter = 0.5 * (real_end.value + complex_value);
    rec.bracket_width = std::abs(complex_value - real_end.value);
    rec.levels = {level_a, level_b};
    rec.indices = {za, zb};
    const Complex ea = real_end.spectrum.levels[a].eigenvalue, eb = real_end.spectrum.levels[b].eigenvalue;
    rec.eigenvalues = {ea, eb};
    rec.residual = std::abs(ea - eb);
    return rec;
}

inline EPRecord find_ep2(const MatrixFamily& fam, int level_a, int level_b, double real_end, double complex_end,
                         const TrackingOptions& opt = {}) {
    return find_ep2(fam, solve_point(fam, real_end, opt), level_a, level_b, solve_point(fam, complex_end, opt), opt);
}

struct TrackSample {
    double parameter = 0.0;
    Complex eigenvalue;
    Z2Index z2 = Z2Index::undefined;
    double ep_indicator = 0.0;
    bool real = false;
    int level = -1;        ///< position in the sorted spectrum at this point
    int partner_track = -1;
};

struct LevelTrack {
    int level_id = 0;
    std::vector<TrackSample> samples;
    /// Weakest matched overlap along the track.
    double continuity_score = 1.0;
};

struct TrackBreak {
    std::size_t point = 0; ///< break between point-1 and point
    int track = 0;
    double overlap = 0.0;
};

/// A cell whose transitions could not be split into clean pair events.
struct AmbiguousCell {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<int> tracks;
};

struct SweepOptions {
    TrackingOptions tracking;
    unsigned workers = 1;
    /// Locate EP2s on the reality boundary while sweeping.
    bool locate_eps = true;
    std::size_t block = 64;
};

struct SweepResult {
    SweepGrid grid;
    std::vector<LevelTrack> tracks;
    std::vector<TrackBreak> breaks;
    std::vector<EPRecord> ep2;
    std::vector<AmbiguousCell> ambiguous;
    std::vector<std::size_t> nudged_points;
};

namespace detail {

enum class CellKind { quiet, clean, composite };

struct PairTransition {
    int a = -1, b = -1; ///< levels at the left end
    bool opening = true; ///< real on the left, complex on the right
};

inline CellKind classify_cell(const BiorthoSpectrum& left, const BiorthoSpectrum& right, const LevelMatch& m,
                              std::vector<PairTransition>& events, std::vector<int>& involved) {
    const int n = static_cast<int>(left.size());
    std::vector<int> prev_of(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a)
        prev_of[m.next_of[a]] = a;
    bool composite = false;
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (int a = 0; a < n; ++a) {
        const auto& la = left.levels[a];
        const auto& ra = right.levels[m.next_of[a]];
        if (la.real && ra.real)
            continue;
        if (!la.real && !ra.real) {
            const auto pl = la.conjugate_partner;
            const auto pr = ra.conjugate_partner;
            // Partners inside a degenerate complex cluster are interchangeable.
            if (!pl || !pr ||
                (m.next_of[*pl] != *pr &&
                 std::abs(right.levels[m.next_of[*pl]].eigenvalue - right.levels[*pr].eigenvalue) >
                     right.reality_tol)) {
                composite = true;
                involved.push_back(a);
            }
            continue;
        }
        if (seen[a])
            continue;
        if (la.real) { // opening
            const auto pr = ra.conjugate_partner;
            if (!pr) {
                composite = true;
                involved.push_back(a);
                continue;
            }
            const int b = prev_of[*pr];
            if (!left.levels[b].real) {
                composite = true;
                involved.push_back(a);
                continue;
            }
            seen[a] = seen[b] = 1;
            events.push_back({std::min(a, b), std::max(a, b), true});
        } else { // closing
            const auto pl = la.conjugate_partner;
            if (!pl || !right.levels[m.next_of[*pl]].real) {
                composite = true;
                involved.push_back(a);
                continue;
            }
            const int b = *pl;
            seen[a] = seen[b] = 1;
            events.push_back({std::min(a, b), std::max(a, b), false});
        }
    }
    if (composite)
        return CellKind::composite;
    return events.empty() ? CellKind::quiet : CellKind::clean;
}

struct CellContext {
    const MatrixFamily& fam;
    const SweepOptions& opt;
    SweepResult& out;
    std::size_t point; ///< index of the right grid point
};

/// Advances track->level assignments from `left` to `right`, recording EP2s. Cells
/// with composite transitions or weak overlaps are halved recursively.
inline void resolve_cell(CellContext& ctx, const SolvedPoint& left, const SolvedPoint& right,
                         const std::vector<int>& tracks_left, std::vector<int>& tracks_right, int depth) {
    const LevelMatch m = match_levels(left.spectrum, right.spectrum);
    std::vector<PairTransition> events;
    std::vector<int> involved;
    const CellKind kind = classify_cell(left.spectrum, right.spectrum, m, events, involved);
    const bool weak = m.weakest < ctx.opt.tracking.min_overlap;
    if ((kind == CellKind::composite || weak) && depth < ctx.opt.tracking.max_subdivision) {
        const SolvedPoint mid = solve_point(ctx.fam, 0.5 * (left.value + right.value), ctx.opt.tracking);
        std::vector<int> tracks_mid;
        resolve_cell(ctx, left, mid, tracks_left, tracks_mid, depth + 1);
        resolve_cell(ctx, mid, right, tracks_mid, tracks_right, depth + 1);
        return;
    }

    const std::size_t nt = tracks_left.size();
    std::vector<int> track_of_left(nt);
    for (std::size_t t = 0; t < nt; ++t)
        track_of_left[static_cast<std::size_t>(tracks_left[t])] = static_cast<int>(t);
    tracks_right.resize(nt);
    for (std::size_t t = 0; t < nt; ++t)
        tracks_right[t] = m.next_of[static_cast<std::size_t>(tracks_left[t])];

    for (std::size_t a = 0; a < nt; ++a) {
        auto& score = ctx.out.tracks[static_cast<std::size_t>(track_of_left[a])].continuity_score;
        score = std::min(score, m.overlap[a]);
        if (m.overlap[a] < ctx.opt.tracking.min_overlap)
            ctx.out.breaks.push_back({ctx.point, track_of_left[a], m.overlap[a]});
    }

    if (kind == CellKind::composite) {
        AmbiguousCell cell{left.value, right.value, {}};
        for (int a : involved)
            cell.tracks.push_back(track_of_left[static_cast<std::size_t>(a)]);
        std::sort(cell.tracks.begin(), cell.tracks.end());
        ctx.out.ambiguous.push_back(std::move(cell));
        return;
    }
    if (!ctx.opt.locate_eps)
        return;
    for (const auto& ev : events) {
        EPRecord rec;
        if (ev.opening) {
            rec = find_ep2(ctx.fam, left, ev.a, ev.b, right, ctx.opt.tracking);
        } else {
            const int ra = m.next_of[ev.a], rb = m.next_of[ev.b];
            rec = find_ep2(ctx.fam, right, ra, rb, left, ctx.opt.tracking);
        }
        const auto& pts = ctx.out.grid.points;
        const double tol = ctx.opt.tracking.ep_tol;
        rec.boundary = std::abs(rec.parameter - pts.front()) <= tol || std::abs(rec.parameter - pts.back()) <= tol;
        rec.levels = {track_of_left[ev.a], track_of_left[ev.b]};
        if (rec.levels[0] > rec.levels[1]) {
            std::swap(rec.levels[0], rec.levels[1]);
            std::swap(rec.indices[0], rec.indices[1]);
            std::swap(rec.eigenvalues[0], rec.eigenvalues[1]);
        }
        ctx.out.ep2.push_back(std::move(rec));
    }
}

inline void append_samples(SweepResult& out, const SolvedPoint& sp, const std::vector<int>& track_level) {
    const std::size_t nt = track_level.size();
    std::vector<int> track_of_level(nt);
    for (std::size_t t = 0; t < nt; ++t)
        track_of_level[static_cast<std::size_t>(track_level[t])] = static_cast<int>(t);
    for (std::size_t t = 0; t < nt; ++t) {
        const auto& lv = sp.spectrum.levels[static_cast<std::size_t>(track_level[t])];
        TrackSample s;
        s.parameter = sp.requested;
        s.eigenvalue = lv.eigenvalue;
        s.z2 = lv.z2;
        s.ep_indicator = lv.ep_indicator;
        s.real = lv.real;
        s.level = track_level[t];
        if (lv.conjugate_partner)
            s.partner_track = track_of_level[static_cast<std::size_t>(*lv.conjugate_partner)];
        out.tracks[t].samples.push_back(s);
    }
}

} // namespace detail

/// Solves every grid point (in parallel blocks), then follows levels point to point
/// by biorthogonal overlap. Output is independent of the worker count.
inline SweepResult sweep(const MatrixFamily& fam, const SweepGrid& grid, const SweepOptions& opt = {}) {
    grid.validate();
    SweepResult out;
    out.grid = grid;
    const std::size_t np = grid.points.size();
    const std::size_t block = std::max<std::size_t>(opt.block, 1);

    std::vector<int> track_level;
    std::optional<SolvedPoint> prev;
    for (std::size_t start = 0; start < np; start += block) {
        const std::size_t count = std::min(block, np - start);
        std::vector<SolvedPoint> solved(count);
        parallel_for(count, opt.workers,
                     [&](std::size_t k) { solved[k] = solve_point(fam, grid.points[start + k], opt.tracking); });
        for (std::size_t k = 0; k < count; ++k) {
            SolvedPoint& sp = solved[k];
            if (sp.nudged)
                out.nudged_points.push_back(start + k);
            if (!prev) {
                const std::size_t nt = sp.spectrum.size();
                track_level.resize(nt);
                out.tracks.resize(nt);
                for (std::size_t t = 0; t < nt; ++t) {
                    track_level[t] = static_cast<int>(t);
                    out.tracks[t].level_id = static_cast<int>(t);
                    out.tracks[t].samples.reserve(np);
                }
            } else {
                detail::CellContext ctx{fam, opt, out, start + k};
                std::vector<int> next_level;
                detail::resolve_cell(ctx, *prev, sp, track_level, next_level, 0);
                track_level = std::move(next_level);
            }
            detail::append_samples(out, sp, track_level);
            prev = std::move(sp);
        }
    }
    std::stable_sort(out.ep2.begin(), out.ep2.end(),
                     [](const EPRecord& x, const EPRecord& y) { return x.parameter < y.parameter; });
    return out;
}

inline SweepResult sweep(const SweepGrid& grid, const SweepOptions& opt = {}) {
    SweepResult r = sweep(grid.path.family(), grid, opt);
    for (auto& rec : r.ep2) {
        const NormalizedPoint p = grid.path.point(rec.parameter);
        rec.j_tilde = p.j_tilde;
        rec.gamma_tilde = p.gamma_tilde;
    }
    return r;
}

} // namespace psh
