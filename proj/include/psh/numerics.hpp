#pragma once

// Dense complex linear algebra: Pauli tensor products, general eigendecomposition
// with left/right eigenvectors, and biorthonormalization.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "psh/errors.hpp"

namespace psh {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

inline constexpr double kDefaultTol = 1e-10;
inline constexpr double kClusterRelTol = 1e-8;
inline constexpr double kDefectiveCondition = 1e12;

struct EigOptions {
    double tol = kDefaultTol;
    /// Eigenvalues closer than cluster_rel * ||M||_F are treated as one cluster.
    double cluster_rel = kClusterRelTol;
    /// cond(R) above this raises NearDefective.
    double defective_condition = kDefectiveCondition;
};

/// Eigenvalues with matching right (columns of `right`) and left (columns of `left`)
/// eigenvectors: M R_n = l_n R_n and L_n^dagger M = l_n L_n^dagger.
struct EigenSystem {
    std::vector<Complex> eigenvalues;
    ComplexMatrix right;
    ComplexMatrix left;
    double tol = kDefaultTol;
    double condition = 1.0;
    double biortho_residual = 0.0;
    bool hermitian = false;

    std::size_t dim() const noexcept { return eigenvalues.size(); }
    ComplexVector right_vector(std::size_t n) const { return right.col(static_cast<Eigen::Index>(n)); }
    ComplexVector left_vector(std::size_t n) const { return left.col(static_cast<Eigen::Index>(n)); }
};

inline ComplexMatrix pauli_x() {
    ComplexMatrix m(2, 2);
    m << 0.0, 1.0, 1.0, 0.0;
    return m;
}

inline ComplexMatrix pauli_y() {
    ComplexMatrix m(2, 2);
    m << 0.0, Complex(0.0, -1.0), Complex(0.0, 1.0), 0.0;
    return m;
}

inline ComplexMatrix pauli_z() {
    ComplexMatrix m(2, 2);
    m << 1.0, 0.0, 0.0, -1.0;
    return m;
}

inline ComplexMatrix identity2() { return ComplexMatrix::Identity(2, 2); }

inline bool all_finite(const ComplexMatrix& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag()))
                return false;
    return true;
}

inline void require_square_finite(const ComplexMatrix& m, const char* who) {
    if (m.rows() == 0 || m.rows() != m.cols())
        throw std::invalid_argument(std::string(who) + ": matrix must be square and non-empty");
    if (!all_finite(m))
        throw std::invalid_argument(std::string(who) + ": matrix has non-finite entries");
}

/// Ordered tensor product factors[0] (x) factors[1] (x) ... ; the first factor is the
/// most significant index.
inline ComplexMatrix kron_chain(std::span<const ComplexMatrix> factors) {
    if (factors.empty())
        throw std::invalid_argument("kron_chain: empty factor list");
    for (const auto& f : factors)
        if (f.rows() == 0 || f.rows() != f.cols())
            throw std::invalid_argument("kron_chain: factors must be square");
    ComplexMatrix out = factors.front();
    for (std::size_t i = 1; i < factors.size(); ++i) {
        ComplexMatrix next = Eigen::kroneckerProduct(out, factors[i]).eval();
        out = std::move(next);
    }
    return out;
}

inline ComplexMatrix kron_chain(std::initializer_list<ComplexMatrix> factors) {
    std::vector<ComplexMatrix> v(factors);
    return kron_chain(std::span<const ComplexMatrix>(v));
}

namespace detail {

/// Order by Re, then by Im inside runs whose real parts agree to `re_tol`.
/// The two-pass form keeps the comparator a strict weak ordering.
inline std::vector<int> spectral_order(const std::vector<Complex>& values, double re_tol) {
    std::vector<int> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (values[a].real() != values[b].real())
            return values[a].real() < values[b].real();
        return values[a].imag() < values[b].imag();
    });
    std::size_t start = 0;
    while (start < idx.size()) {
        std::size_t end = start + 1;
        while (end < idx.size() && values[idx[end]].real() - values[idx[end - 1]].real() <= re_tol)
            ++end;
        std::stable_sort(idx.begin() + static_cast<std::ptrdiff_t>(start),
                         idx.begin() + static_cast<std::ptrdiff_t>(end), [&](int a, int b) {
                             if (values[a].imag() != values[b].imag())
                                 return values[a].imag() < values[b].imag();
                             return values[a].real() < values[b].real();
                         });
        start = end;
    }
    return idx;
}

inline void permute(EigenSystem& sys, const std::vector<int>& order) {
    const auto n = static_cast<Eigen::Index>(order.size());
    std::vector<Complex> vals(order.size());
    ComplexMatrix r(sys.right.rows(), n), l(sys.left.rows(), n);
    for (Eigen::Index k = 0; k < n; ++k) {
        vals[static_cast<std::size_t>(k)] = sys.eigenvalues[static_cast<std::size_t>(order[k])];
        r.col(k) = sys.right.col(order[k]);
        l.col(k) = sys.left.col(order[k]);
    }
    sys.eigenvalues = std::move(vals);
    sys.right = std::move(r);
    sys.left = std::move(l);
}

inline double biortho_error(const ComplexMatrix& left, const ComplexMatrix& right) {
    ComplexMatrix g = left.adjoint() * right;
    g -= ComplexMatrix::Identity(g.rows(), g.cols());
    return g.cwiseAbs().maxCoeff();
}

} // namespace detail

/// Groups of indices whose eigenvalues lie within `threshold` of each other
/// (transitively). Groups are listed in order of their smallest member.
inline std::vector<std::vector<int>> eigenvalue_clusters(const std::vector<Complex>& values,
                                                         double threshold) {
    const int n = static_cast<int>(values.size());
    std::vector<int> parent(values.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(values[i] - values[j]) <= threshold) {
                int a = find(i), b = find(j);
                if (a != b)
                    parent[std::max(a, b)] = std::min(a, b);
            }
    std::vector<std::vector<int>> groups;
    std::vector<int> slot(values.size(), -1);
    for (int i = 0; i < n; ++i) {
        int root = find(i);
        if (slot[root] < 0) {
            slot[root] = static_cast<int>(groups.size());
            groups.emplace_back();
        }
        groups[slot[root]].push_back(i);
    }
    return groups;
}

/// Rescales the system to ||R_n|| = 1 and <L_n|R_m> = delta_nm, sorting levels by
/// (Re, Im). Clusters of equal eigenvalues are resolved through their Gram matrix.
inline EigenSystem biorthonormalize(EigenSystem sys, double tol = kDefaultTol,
                                    double cluster_threshold = -1.0) {
    const std::size_t n = sys.dim();
    if (n == 0 || static_cast<std::size_t>(sys.right.cols()) != n ||
        static_cast<std::size_t>(sys.left.cols()) != n)
        throw std::invalid_argument("biorthonormalize: inconsistent eigensystem sizes");
    sys.tol = tol;

    double scale = 0.0;
    for (const auto& v : sys.eigenvalues)
        scale = std::max(scale, std::abs(v));
    if (cluster_threshold < 0.0)
        cluster_threshold = kClusterRelTol * std::max(scale, 1.0);

    detail::permute(sys, detail::spectral_order(sys.eigenvalues, cluster_threshold));

    for (const auto& group : eigenvalue_clusters(sys.eigenvalues, cluster_threshold)) {
        const auto m = static_cast<Eigen::Index>(group.size());
        if (m == 1) {
            const Eigen::Index k = group.front();
            const double rn = sys.right.col(k).norm();
            if (rn == 0.0)
                throw std::invalid_argument("biorthonormalize: zero right eigenvector");
            sys.right.col(k) /= rn;
            const Complex s = sys.left.col(k).dot(sys.right.col(k));
            if (std::abs(s) <= tol * sys.left.col(k).norm())
                throw NearDefective(std::abs(s) > 0 ? 1.0 / std::abs(s) : INFINITY,
                                    "biorthonormalize: left/right pair is self-orthogonal");
            sys.left.col(k) /= std::conj(s);
            continue;
        }
        ComplexMatrix rc(sys.right.rows(), m), lc(sys.left.rows(), m);
        for (Eigen::Index c = 0; c < m; ++c) {
            rc.col(c) = sys.right.col(group[c]);
            rc.col(c).normalize();
            lc.col(c) = sys.left.col(group[c]);
        }
        ComplexMatrix gram = lc.adjoint() * rc;
        Eigen::PartialPivLU<ComplexMatrix> lu(gram);
        if (!(lu.rcond() > tol)) {
            std::ostringstream os;
            os << "biorthonormalize: unresolved degenerate cluster {";
            for (std::size_t c = 0; c < group.size(); ++c)
                os << (c ? ", " : "") << group[c];
            os << "}";
            throw DegenerateCluster(group, os.str());
        }
        lc = lc * lu.inverse().adjoint();
        for (Eigen::Index c = 0; c < m; ++c) {
            sys.right.col(group[c]) = rc.col(c);
            sys.left.col(group[c]) = lc.col(c);
        }
    }
    sys.biortho_residual = detail::biortho_error(sys.left, sys.right);
    return sys;
}

/// Full eigendecomposition of a general complex matrix. Hermitian input goes through
/// the self-adjoint solver; everything else through complex Schur (QR iteration), with
/// left eigenvectors taken from the inverse of the right-vector matrix.
inline EigenSystem eig_general(const ComplexMatrix& m, const EigOptions& opt = {}) {
    require_square_finite(m, "eig_general");
    const double norm = m.norm();
    EigenSystem sys;
    sys.tol = opt.tol;

    const double herm_defect = (m - m.adjoint()).norm();
    if (herm_defect <= 1e-14 * std::max(norm, 1.0)) {
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m);
        if (es.info() != Eigen::Success)
            throw NumericError("eig_general: self-adjoint solver failed");
        sys.hermitian = true;
        sys.eigenvalues.reserve(static_cast<std::size_t>(m.rows()));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            sys.eigenvalues.emplace_back(es.eigenvalues()(i), 0.0);
        sys.right = es.eigenvectors();
        sys.left = es.eigenvectors();
        sys.condition = 1.0;
    } else {
        Eigen::ComplexEigenSolver<ComplexMatrix> es(m, true);
        if (es.info() != Eigen::Success)
            throw NumericError("eig_general: complex QR iteration failed to converge");
        sys.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + m.rows());
        sys.right = es.eigenvectors();
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            sys.right.col(i).normalize();
        Eigen::PartialPivLU<ComplexMatrix> lu(sys.right);
        const double rcond = lu.rcond();
        sys.condition = rcond > 0.0 ? 1.0 / rcond : INFINITY;
        if (!(sys.condition <= opt.defective_condition)) {
            std::ostringstream os;
            os << "eig_general: eigenvector matrix condition " << sys.condition
               << " exceeds " << opt.defective_condition << " (matrix is at or near a defective point)";
            throw NearDefective(sys.condition, os.str());
        }
        sys.left = lu.inverse().adjoint();
    }

    const double threshold = opt.cluster_rel * std::max(norm, 1.0);
    return biorthonormalize(std::move(sys), opt.tol, threshold);
}

/// max_n ||M R_n - l_n R_n|| / ||M||_F
inline double right_residual(const ComplexMatrix& m, const EigenSystem& sys) {
    double worst = 0.0;
    for (std::size_t n = 0; n < sys.dim(); ++n) {
        const auto k = static_cast<Eigen::Index>(n);
        ComplexVector r = m * sys.right.col(k) - sys.eigenvalues[n] * sys.right.col(k);
        worst = std::max(worst, r.norm() / sys.right.col(k).norm());
    }
    return worst / std::max(m.norm(), 1e-300);
}

/// max_n ||L_n^dagger M - l_n L_n^dagger|| / ||M||_F
inline double left_residual(const ComplexMatrix& m, const EigenSystem& sys) {
    double worst = 0.0;
    for (std::size_t n = 0; n < sys.dim(); ++n) {
        const auto k = static_cast<Eigen::Index>(n);
        ComplexVector r = m.adjoint() * sys.left.col(k) - std::conj(sys.eigenvalues[n]) * sys.left.col(k);
        worst = std::max(worst, r.norm() / sys.left.col(k).norm());
    }
    return worst / std::max(m.norm(), 1e-300);
}

/// ||M - sum_n l_n R_n L_n^dagger||_F
inline double reconstruction_error(const ComplexMatrix& m, const EigenSystem& sys) {
    ComplexVector lambda(static_cast<Eigen::Index>(sys.dim()));
    for (std::size_t n = 0; n < sys.dim(); ++n)
        lambda(static_cast<Eigen::Index>(n)) = sys.eigenvalues[n];
    ComplexMatrix rebuilt = sys.right * lambda.asDiagonal() * sys.left.adjoint();
    return (m - rebuilt).norm();
}

} // namespace psh
