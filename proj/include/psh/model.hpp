#pragma once

// Transverse-field Ising chain with an imaginary longitudinal field profile,
// open boundaries, in the sigma^z product basis. Site 1 is the most significant
// tensor factor; bit value 0 is spin up (sigma^z = +1).

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "psh/numerics.hpp"

namespace psh {

inline constexpr int kMaxDenseSites = 12;

struct ChainSpec {
    int n = 2;
    double delta = 1.0;
    double j = 1.0;
    /// gamma_n for sites 1..N; the Hamiltonian carries i*gamma_n*sigma^z_n.
    std::vector<double> gamma_profile;

    /// True when gamma_n == -gamma_{N+1-n} for all n (parity pseudo-Hermiticity).
    bool antisymmetric_profile(double tol = 0.0) const {
        for (int a = 0; a < n; ++a)
            if (std::abs(gamma_profile[a] + gamma_profile[n - 1 - a]) > tol)
                return false;
        return true;
    }

    /// Structural checks only; pseudo-Hermiticity is checked separately.
    void validate_structure() const {
        if (n <= 0 || n % 2 != 0)
            throw std::invalid_argument("ChainSpec: N must be a positive even integer, got " + std::to_string(n));
        if (n > kMaxDenseSites)
            throw std::invalid_argument("ChainSpec: N=" + std::to_string(n) + " exceeds dense limit");
        if (!(delta >= 0.0) || !std::isfinite(delta))
            throw std::invalid_argument("ChainSpec: delta must be finite and >= 0");
        if (!std::isfinite(j))
            throw std::invalid_argument("ChainSpec: J must be finite");
        if (static_cast<int>(gamma_profile.size()) != n)
            throw std::invalid_argument("ChainSpec: gamma profile must have N entries");
        for (double g : gamma_profile)
            if (!std::isfinite(g))
                throw std::invalid_argument("ChainSpec: gamma profile has non-finite entries");
    }

    void validate() const {
        validate_structure();
        if (!antisymmetric_profile(1e-15))
            throw std::invalid_argument("ChainSpec: gamma profile must satisfy gamma_n = -gamma_{N+1-n}");
    }

    std::size_t dim() const { return std::size_t{1} << n; }
};

/// gamma_n = (-1)^(n-1) gamma
inline std::vector<double> staggered_profile(int n, double gamma) {
    std::vector<double> p(static_cast<std::size_t>(std::max(n, 0)));
    for (int a = 0; a < n; ++a)
        p[a] = (a % 2 == 0) ? gamma : -gamma;
    return p;
}

/// Antisymmetric profile from its left half: gamma_{N+1-n} = -gamma_n.
inline std::vector<double> build_custom_gain(std::span<const double> left_half) {
    if (left_half.empty())
        throw std::invalid_argument("build_custom_gain: empty half profile");
    const std::size_t half = left_half.size();
    std::vector<double> p(2 * half);
    for (std::size_t a = 0; a < half; ++a) {
        p[a] = left_half[a];
        p[2 * half - 1 - a] = -left_half[a];
    }
    return p;
}

inline ChainSpec staggered_chain(int n, double delta, double j, double gamma) {
    ChainSpec s{n, delta, j, staggered_profile(n, gamma)};
    s.validate();
    return s;
}

/// Point on the normalization circle sqrt(J^2 + Delta^2) = 1.
struct NormalizedPoint {
    double j_tilde = 0.0;
    double gamma_tilde = 0.0;

    double delta() const { return std::sqrt(std::max(0.0, 1.0 - j_tilde * j_tilde)); }

    ChainSpec spec(int n) const {
        if (!(j_tilde >= -1.0 && j_tilde <= 1.0))
            throw std::invalid_argument("NormalizedPoint: j_tilde must lie in [-1, 1]");
        if (!(gamma_tilde >= 0.0))
            throw std::invalid_argument("NormalizedPoint: gamma_tilde must be >= 0");
        return staggered_chain(n, delta(), j_tilde, gamma_tilde);
    }

    static NormalizedPoint from_physical(double j, double delta, double gamma) {
        const double scale = std::hypot(j, delta);
        if (!(scale > 0.0))
            throw std::invalid_argument("NormalizedPoint: J and Delta cannot both vanish");
        return {j / scale, gamma / scale};
    }
};

namespace detail {
inline int spin_at(std::uint64_t state, int n, int site) { // site is 0-based from the left
    return ((state >> (n - 1 - site)) & 1u) ? -1 : 1;
}
} // namespace detail

/// H = sum_n [Delta sigma^x_n + i gamma_n sigma^z_n] - J sum_n sigma^z_n sigma^z_{n+1}
inline ComplexMatrix build_hamiltonian(const ChainSpec& spec) {
    spec.validate_structure();
    const int n = spec.n;
    const auto dim = static_cast<Eigen::Index>(spec.dim());
    ComplexMatrix h = ComplexMatrix::Zero(dim, dim);
    for (Eigen::Index s = 0; s < dim; ++s) {
        const auto state = static_cast<std::uint64_t>(s);
        double zz = 0.0, field = 0.0;
        for (int a = 0; a < n; ++a) {
            const int z = detail::spin_at(state, n, a);
            field += spec.gamma_profile[a] * z;
            if (a + 1 < n)
                zz += z * detail::spin_at(state, n, a + 1);
        }
        h(s, s) = Complex(-spec.j * zz, field);
        if (spec.delta != 0.0)
            for (int a = 0; a < n; ++a)
                h(static_cast<Eigen::Index>(state ^ (std::uint64_t{1} << (n - 1 - a))), s) += spec.delta;
    }
    return h;
}

/// Single-site operator `op` on site `site` (0-based) of an n-site chain.
inline ComplexMatrix site_operator(const ComplexMatrix& op, int site, int n) {
    std::vector<ComplexMatrix> factors(static_cast<std::size_t>(n), identity2());
    factors[static_cast<std::size_t>(site)] = op;
    return kron_chain(std::span<const ComplexMatrix>(factors));
}

/// Same Hamiltonian assembled term by term from Pauli strings.
inline ComplexMatrix build_hamiltonian_kron(const ChainSpec& spec) {
    spec.validate_structure();
    const int n = spec.n;
    const auto dim = static_cast<Eigen::Index>(spec.dim());
    ComplexMatrix h = ComplexMatrix::Zero(dim, dim);
    const Complex i1(0.0, 1.0);
    for (int a = 0; a < n; ++a) {
        h += spec.delta * site_operator(pauli_x(), a, n);
        h += i1 * spec.gamma_profile[a] * site_operator(pauli_z(), a, n);
    }
    for (int a = 0; a + 1 < n; ++a) {
        std::vector<ComplexMatrix> f(static_cast<std::size_t>(n), identity2());
        f[a] = pauli_z();
        f[a + 1] = pauli_z();
        h -= spec.j * kron_chain(std::span<const ComplexMatrix>(f));
    }
    return h;
}

/// Mirror reflection site n <-> N+1-n as a permutation matrix on the product basis.
inline ComplexMatrix build_parity(int n) {
    if (n <= 0 || n % 2 != 0)
        throw std::invalid_argument("build_parity: N must be a positive even integer");
    if (n > kMaxDenseSites)
        throw std::invalid_argument("build_parity: N exceeds dense limit");
    const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n);
    ComplexMatrix p = ComplexMatrix::Zero(dim, dim);
    for (Eigen::Index s = 0; s < dim; ++s) {
        std::uint64_t in = static_cast<std::uint64_t>(s), out = 0;
        for (int b = 0; b < n; ++b)
            if ((in >> b) & 1u)
                out |= std::uint64_t{1} << (n - 1 - b);
        p(static_cast<Eigen::Index>(out), s) = 1.0;
    }
    return p;
}

/// ||zeta H - H^dagger zeta||_F
inline double psh_residual(const ComplexMatrix& h, const ComplexMatrix& zeta) {
    if (h.rows() != h.cols() || zeta.rows() != zeta.cols() || h.rows() != zeta.rows())
        throw std::invalid_argument("psh_residual: dimension mismatch");
    return (zeta * h - h.adjoint() * zeta).norm();
}

/// dH/dgamma for the staggered profile: i sum_n (-1)^(n-1) sigma^z_n. Diagonal and anti-Hermitian.
inline ComplexMatrix gain_generator(int n) {
    if (n <= 0 || n % 2 != 0)
        throw std::invalid_argument("gain_generator: N must be a positive even integer");
    const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n);
    ComplexMatrix v = ComplexMatrix::Zero(dim, dim);
    for (Eigen::Index s = 0; s < dim; ++s) {
        int m = 0;
        for (int a = 0; a < n; ++a)
            m += (a % 2 == 0 ? 1 : -1) * detail::spin_at(static_cast<std::uint64_t>(s), n, a);
        v(s, s) = Complex(0.0, m);
    }
    return v;
}

inline ComplexMatrix gain_generator(const ChainSpec& spec) {
    spec.validate_structure();
    return gain_generator(spec.n);
}

} // namespace psh
