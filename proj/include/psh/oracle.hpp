#pragma once

// Exact free-fermion solution of the open transverse-field Ising chain at zero
// imaginary field: Bogolyubov mode wave-vectors, energies, mode parity factors,
// and the energy and mirror parity of every many-body state.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "psh/errors.hpp"

namespace psh {

inline constexpr int kOracleMaxSites = 14;

struct FermionMode {
    /// Rank in increasing energy, 0 is the lowest mode.
    int i = 0;
    /// Wave-vector: real in [0, pi], i*kappa (J > 0) or pi - i*kappa (J < 0).
    std::complex<double> k;
    double energy = 0.0;
    /// sign[sin k / sin(N k)]
    int delta = 1;
    bool complex_k = false;
    double kappa = 0.0;
};

struct OracleState {
    std::uint32_t occupation = 0; ///< bit i set <=> mode i occupied
    double energy = 0.0;
    int parity = 1;
    int r = 0;    ///< number of occupied modes
    int band = 0; ///< occupied modes other than the lowest one
};

struct ModeSolverOptions {
    double pole_margin = 1e-12;
    int max_iterations = 200;
    /// kappa below this is reported as the real root k = 0.
    double branch_collapse = 1e-10;
};

/// sin((N+1)k) / sin(Nk)
inline double mode_function(int n, double k) { return std::sin((n + 1) * k) / std::sin(n * k); }

/// (sign J)^(N-1) (-1)^i
inline int delta_closed_form(int i, int n, double j) {
    const int sj = j < 0.0 ? -1 : 1;
    const int a = (n - 1) % 2 == 0 ? 1 : sj;
    return (i % 2 == 0 ? 1 : -1) * a;
}

namespace detail {

template <class F>
double bisect(F&& g, double lo, double hi, int max_iterations, const char* what) {
    double glo = g(lo);
    const double ghi = g(hi);
    if (glo == 0.0)
        return lo;
    if (ghi == 0.0)
        return hi;
    if ((glo > 0.0) == (ghi > 0.0)) {
        std::ostringstream os;
        os << what << ": no sign change on [" << lo << ", " << hi << "]";
        throw BracketNotConverged(lo, hi, os.str());
    }
    for (int it = 0; it < max_iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            return mid;
        const double gm = g(mid);
        if (gm == 0.0)
            return mid;
        if ((gm > 0.0) == (glo > 0.0)) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    if (hi - lo <= 1e-14 * std::max(1.0, std::abs(hi)))
        return 0.5 * (lo + hi);
    std::ostringstream os;
    os << what << ": bisection did not converge, last bracket [" << lo << ", " << hi << "]";
    throw BracketNotConverged(lo, hi, os.str());
}

} // namespace detail

/// Bogolyubov modes of the N-site open chain, ordered by increasing energy.
///
/// Real wave-vectors solve sin((N+1)k)/sin(Nk) = J/Delta; between consecutive poles
/// of sin(Nk) there is at most one root. For |J|/Delta > (N+1)/N the lowest root
/// leaves the real axis and kappa solves sinh((N+1)kappa)/sinh(N kappa) = |J|/Delta.
/// Energies use eps = 2 Delta |sin k / sin(Nk)|, which equals the dispersion
/// 2 sqrt((J - Delta)^2 + 4 J Delta sin^2(k/2)) on solutions of the mode equation and
/// stays accurate for the exponentially small lowest mode.
inline std::vector<FermionMode> solve_modes(int n, double j, double delta,
                                            const ModeSolverOptions& opt = {}) {
    if (n <= 0 || n % 2 != 0)
        throw std::invalid_argument("solve_modes: N must be a positive even integer");
    if (!(delta > 0.0) || !std::isfinite(delta))
        throw std::invalid_argument("solve_modes: Delta must be positive");
    if (j == 0.0 || !std::isfinite(j))
        throw std::invalid_argument("solve_modes: J must be non-zero");

    using std::numbers::pi;
    const double ratio = std::abs(j) / delta;
    const bool antiferro = j < 0.0;
    auto g = [&](double k) { return std::sin((n + 1) * k) - ratio * std::sin(n * k); };

    // Solve for |J| (ferromagnetic branch); the antiferromagnetic modes are k -> pi - k.
    std::vector<FermionMode> modes;
    for (int i = 0; i < n; ++i) {
        const double lo = pi * i / n + opt.pole_margin;
        const double hi = pi * (i + 1) / n - opt.pole_margin;
        const bool bracketed = (g(lo) > 0.0) != (g(hi) > 0.0);
        FermionMode m;
        if (bracketed) {
            const double k = detail::bisect(g, lo, hi, opt.max_iterations, "solve_modes");
            m.k = antiferro ? pi - k : k;
            m.energy = 2.0 * delta * std::abs(std::sin(k) / std::sin(n * k));
        } else if (i == 0) {
            auto h = [&](double kappa) {
                return std::cosh(kappa) + std::sinh(kappa) / std::tanh(n * kappa) - ratio;
            };
            const double kappa_hi = std::log(ratio);
            const double kappa = detail::bisect(h, 1e-300, kappa_hi, 2000, "solve_modes (complex branch)");
            if (kappa < opt.branch_collapse) {
                m.k = antiferro ? pi : 0.0;
                m.energy = 2.0 * delta / n;
            } else {
                m.complex_k = true;
                m.kappa = kappa;
                m.k = antiferro ? std::complex<double>(pi, -kappa) : std::complex<double>(0.0, kappa);
                m.energy = 2.0 * delta * std::sinh(kappa) / std::sinh(n * kappa);
            }
        } else {
            std::ostringstream os;
            os << "solve_modes: no root in (" << lo << ", " << hi << ") for J/Delta=" << j / delta;
            throw BracketNotConverged(lo, hi, os.str());
        }
        modes.push_back(m);
    }

    for (auto& m : modes) {
        if (m.complex_k) {
            m.delta = antiferro ? ((n - 1) % 2 == 0 ? 1 : -1) : 1;
        } else {
            const double k = m.k.real();
            const double s = std::sin(k) / std::sin(n * k);
            // k = 0 or pi endpoints: sin k / sin Nk -> 1/N and (-1)^(N+1)/N.
            if (std::abs(std::sin(n * k)) < 1e-300 || !std::isfinite(s))
                m.delta = (k < 1.0) ? 1 : ((n + 1) % 2 == 0 ? 1 : -1);
            else
                m.delta = s > 0.0 ? 1 : -1;
        }
    }
    std::stable_sort(modes.begin(), modes.end(),
                     [](const FermionMode& a, const FermionMode& b) { return a.energy < b.energy; });
    for (int i = 0; i < n; ++i)
        modes[static_cast<std::size_t>(i)].i = i;
    return modes;
}

/// (-1)^(r(r-1)/2) prod_{occupied} delta_k
inline int state_parity(std::uint32_t occupation, const std::vector<FermionMode>& modes) {
    const int r = std::popcount(occupation);
    int parity = ((r * (r - 1) / 2) % 2 == 0) ? 1 : -1;
    for (std::size_t i = 0; i < modes.size(); ++i)
        if ((occupation >> i) & 1u)
            parity *= modes[i].delta;
    return parity;
}

/// All 2^N many-body states sorted by energy (parity breaks exact ties, + first).
inline std::vector<OracleState> full_spectrum(int n, double j, double delta,
                                              const ModeSolverOptions& opt = {}) {
    if (n > kOracleMaxSites)
        throw ResourceError("full_spectrum: N=" + std::to_string(n) + " exceeds enumeration bound " +
                            std::to_string(kOracleMaxSites));
    const auto modes = solve_modes(n, j, delta, opt);
    double vacuum = 0.0;
    for (const auto& m : modes)
        vacuum -= 0.5 * m.energy;
    const std::uint32_t count = std::uint32_t{1} << n;
    std::vector<OracleState> states;
    states.reserve(count);
    for (std::uint32_t occ = 0; occ < count; ++occ) {
        OracleState s;
        s.occupation = occ;
        s.energy = vacuum;
        for (int i = 0; i < n; ++i)
            if ((occ >> i) & 1u)
                s.energy += modes[static_cast<std::size_t>(i)].energy;
        s.r = std::popcount(occ);
        s.band = std::popcount(occ & ~std::uint32_t{1});
        s.parity = state_parity(occ, modes);
        states.push_back(s);
    }
    std::stable_sort(states.begin(), states.end(), [](const OracleState& a, const OracleState& b) {
        if (a.energy != b.energy)
            return a.energy < b.energy;
        return a.parity > b.parity;
    });
    return states;
}

/// 2|J| (1 - Delta^2/J^2) (Delta/|J|)^N, the strong-coupling estimate of the lowest mode.
inline double almost_zero_energy(int n, double j, double delta) {
    const double a = std::abs(j);
    if (!(a > delta) || !(delta >= 0.0))
        throw std::domain_error("almost_zero_energy: requires |J| > Delta >= 0");
    const double x = delta / a;
    return 2.0 * a * (1.0 - x * x) * std::pow(x, n);
}

/// Relative parity sign(J) (-1)^r of two states differing only by the lowest mode,
/// with r other modes occupied.
inline int pair_relative_parity(int r, double j) {
    if (r < 0)
        throw std::invalid_argument("pair_relative_parity: r must be >= 0");
    return (j < 0.0 ? -1 : 1) * (r % 2 == 0 ? 1 : -1);
}

} // namespace psh
