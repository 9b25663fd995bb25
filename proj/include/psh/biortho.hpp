#pragma once

// Biorthogonal spectrum of a zeta-pseudo-Hermitian matrix with Z2-indices.
//
// For a level with real eigenvalue the left vector is proportional to zeta|R>.
// After rescaling R by 1/sqrt|<R|zeta|R>| the relation becomes |L> = s zeta|R>
// with s = sign <R|zeta|R> = +-1, the Z2-index of the level. The index is
// undefined for complex levels, which come in conjugate pairs.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "psh/errors.hpp"
#include "psh/numerics.hpp"

namespace psh {

enum class Z2Index : int { negative = -1, undefined = 0, positive = 1 };

inline int to_int(Z2Index z) { return static_cast<int>(z); }

inline char to_char(Z2Index z) {
    switch (z) {
    case Z2Index::positive:
        return '+';
    case Z2Index::negative:
        return '-';
    default:
        return '0';
    }
}

struct BiorthoOptions {
    double tol = kDefaultTol;
    /// Levels with |Im e| <= reality_rel * spectral radius are real.
    double reality_rel = 1e-8;
    /// Below this normalized |<R|zeta|R>| the index of a real level is not assigned.
    double indicator_floor = 1e-6;
    double cluster_rel = kClusterRelTol;
    /// Conjugate partners must agree to pairing_rel * spectral radius.
    double pairing_rel = 1e-6;
    double defective_condition = kDefectiveCondition;
};

struct LevelRecord {
    int index = 0;
    Complex eigenvalue;
    Z2Index z2 = Z2Index::undefined;
    double ep_indicator = 0.0;
    std::optional<int> conjugate_partner;
    bool real = false;
    /// Real level whose indicator fell below the floor.
    bool index_ill_defined = false;
};

struct BiorthoSpectrum {
    std::vector<LevelRecord> levels;
    EigenSystem eigensystem;
    double reality_tol = 0.0;
    /// max over indexed levels of ||L - s zeta R|| / ||L||
    double mapping_residual = 0.0;

    std::size_t size() const { return levels.size(); }
    std::size_t real_count() const {
        return static_cast<std::size_t>(std::count_if(levels.begin(), levels.end(),
                                                      [](const LevelRecord& l) { return l.real; }));
    }
};

/// |<R|zeta|R>| / (||R|| ||zeta R||): 1 for a zeta eigenvector, 0 at an exceptional point.
inline double ep_indicator(const ComplexVector& r, const ComplexMatrix& zeta) {
    if (r.size() != zeta.rows())
        throw std::invalid_argument("ep_indicator: dimension mismatch");
    const ComplexVector zr = zeta * r;
    const double denom = r.norm() * zr.norm();
    if (!(denom > 0.0))
        throw std::invalid_argument("ep_indicator: zero vector");
    return std::abs(r.dot(zr)) / denom;
}

/// Sign of <R|zeta|R>.
inline Z2Index z2_index(const ComplexVector& r, const ComplexMatrix& zeta,
                        double indicator_floor = BiorthoOptions{}.indicator_floor) {
    const double ind = ep_indicator(r, zeta);
    if (ind < indicator_floor)
        throw IndexIllDefined(ind, "z2_index: <R|zeta|R> vanishes (indicator " + std::to_string(ind) + ")");
    return r.dot(zeta * r).real() > 0.0 ? Z2Index::positive : Z2Index::negative;
}

namespace detail {

/// Within a cluster of equal real eigenvalues, rotate to the basis that diagonalizes
/// the zeta-form restricted to the cluster. The rotation may permute nearly equal
/// levels, so eigenvalues are recomputed as <L|H|R> and the members re-sorted.
inline void diagonalize_zeta_in_cluster(EigenSystem& sys, const ComplexMatrix& h, const ComplexMatrix& zeta,
                                        const std::vector<int>& members) {
    const auto m = static_cast<Eigen::Index>(members.size());
    ComplexMatrix rc(sys.right.rows(), m), lc(sys.left.rows(), m);
    for (Eigen::Index c = 0; c < m; ++c) {
        rc.col(c) = sys.right.col(members[c]);
        lc.col(c) = sys.left.col(members[c]);
    }
    ComplexMatrix form = rc.adjoint() * zeta * rc;
    form = (0.5 * (form + form.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(form);
    const ComplexMatrix& u = es.eigenvectors();
    rc = (rc * u).eval();
    lc = (lc * u).eval();
    std::vector<Complex> values(members.size());
    for (Eigen::Index c = 0; c < m; ++c)
        values[c] = lc.col(c).dot(h * rc.col(c)) / lc.col(c).dot(rc.col(c));
    std::vector<int> order(members.size());
    for (std::size_t c = 0; c < order.size(); ++c)
        order[c] = static_cast<int>(c);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return values[a].real() < values[b].real() ||
               (values[a].real() == values[b].real() && values[a].imag() < values[b].imag());
    });
    // members are listed in spectral order already
    std::vector<int> slots(members.begin(), members.end());
    std::sort(slots.begin(), slots.end());
    for (std::size_t c = 0; c < order.size(); ++c) {
        sys.right.col(slots[c]) = rc.col(order[c]);
        sys.left.col(slots[c]) = lc.col(order[c]);
        sys.eigenvalues[slots[c]] = values[order[c]];
    }
}

inline void pair_conjugates(std::vector<LevelRecord>& levels, double pair_tol) {
    for (std::size_t a = 0; a < levels.size(); ++a) {
        if (levels[a].real || levels[a].conjugate_partner)
            continue;
        const Complex target = std::conj(levels[a].eigenvalue);
        std::optional<std::size_t> best;
        double best_dist = pair_tol;
        for (std::size_t b = 0; b < levels.size(); ++b) {
            if (b == a || levels[b].real || levels[b].conjugate_partner)
                continue;
            const double d = std::abs(levels[b].eigenvalue - target);
            if (d <= best_dist) {
                best_dist = d;
                best = b;
            }
        }
        if (best) {
            levels[a].conjugate_partner = static_cast<int>(*best);
            levels[*best].conjugate_partner = static_cast<int>(a);
        }
    }
}

} // namespace detail

/// Biorthonormal spectrum of `h` with Z2-indices relative to the pseudo-metric `zeta`.
inline BiorthoSpectrum spectrum_with_indices(const ComplexMatrix& h, const ComplexMatrix& zeta,
                                             const BiorthoOptions& opt = {}) {
    if (zeta.rows() != h.rows() || zeta.cols() != h.cols())
        throw std::invalid_argument("spectrum_with_indices: H and zeta dimensions differ");
    EigOptions eo;
    eo.tol = opt.tol;
    eo.cluster_rel = opt.cluster_rel;
    eo.defective_condition = opt.defective_condition;

    BiorthoSpectrum out;
    try {
        out.eigensystem = eig_general(h, eo);
    } catch (const NearDefective& e) {
        throw AtExceptionalPoint(e.condition(), std::string("spectrum_with_indices: ") + e.what());
    }
    EigenSystem& sys = out.eigensystem;
    const std::size_t n = sys.dim();

    double radius = 0.0;
    for (const auto& v : sys.eigenvalues)
        radius = std::max(radius, std::abs(v));
    radius = std::max(radius, 1e-300);
    out.reality_tol = opt.reality_rel * std::max(radius, 1.0);

    std::vector<Complex> real_values;
    std::vector<int> real_ids;
    for (std::size_t k = 0; k < n; ++k)
        if (std::abs(sys.eigenvalues[k].imag()) <= out.reality_tol) {
            real_values.push_back(sys.eigenvalues[k]);
            real_ids.push_back(static_cast<int>(k));
        }
    const double cluster_threshold = opt.cluster_rel * std::max(h.norm(), 1.0);
    for (const auto& group : eigenvalue_clusters(real_values, cluster_threshold)) {
        if (group.size() < 2)
            continue;
        std::vector<int> members;
        for (int g : group)
            members.push_back(real_ids[static_cast<std::size_t>(g)]);
        detail::diagonalize_zeta_in_cluster(sys, h, zeta, members);
    }

    out.levels.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto col = static_cast<Eigen::Index>(k);
        LevelRecord& lv = out.levels[k];
        lv.index = static_cast<int>(k);
        lv.eigenvalue = sys.eigenvalues[k];
        lv.real = std::abs(lv.eigenvalue.imag()) <= out.reality_tol;
        ComplexVector r = sys.right.col(col);
        lv.ep_indicator = ep_indicator(r, zeta);
        if (!lv.real)
            continue;
        if (lv.ep_indicator < opt.indicator_floor) {
            lv.index_ill_defined = true;
            continue;
        }
        const double form = r.dot(zeta * r).real();
        lv.z2 = form > 0.0 ? Z2Index::positive : Z2Index::negative;
        const double w = std::sqrt(std::abs(form));
        ComplexVector left_rescaled = sys.left.col(col) * w;
        r /= w;
        ComplexVector mapped = static_cast<double>(to_int(lv.z2)) * (zeta * r);
        out.mapping_residual = std::max(out.mapping_residual,
                                        (left_rescaled - mapped).norm() / std::max(left_rescaled.norm(), 1e-300));
        sys.right.col(col) = r;
        sys.left.col(col) = mapped;
    }
    detail::pair_conjugates(out.levels, opt.pairing_rel * std::max(radius, 1.0));
    sys.biortho_residual = detail::biortho_error(sys.left, sys.right);
    return out;
}

} // namespace psh
