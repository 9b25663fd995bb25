#include <gtest/gtest.h>

#include "psh/biortho.hpp"
#include "psh/model.hpp"

using namespace psh;

namespace {

ComplexMatrix toy(double a, Complex w) {
    ComplexMatrix m(2, 2);
    m << a, w, -std::conj(w), -a;
    return m;
}

ComplexMatrix diag_zeta() {
    ComplexMatrix z = ComplexMatrix::Zero(2, 2);
    z(0, 0) = 1.0;
    z(1, 1) = -1.0;
    return z;
}

} // namespace

TEST(Z2Index, BasisVectors) {
    ComplexVector e0(2), e1(2);
    e0 << 1.0, 0.0;
    e1 << 0.0, 1.0;
    EXPECT_EQ(z2_index(e0, diag_zeta()), Z2Index::positive);
    EXPECT_EQ(z2_index(e1, diag_zeta()), Z2Index::negative);
}

TEST(Z2Index, InvariantUnderComplexScaling) {
    ComplexVector r(2);
    r << Complex(0.9, 0.1), Complex(0.2, -0.3);
    const Z2Index z = z2_index(r, diag_zeta());
    for (Complex c : {Complex(2.0, 0.0), Complex(0.0, -3.0), Complex(-1e-3, 4e-3)})
        EXPECT_EQ(z2_index(c * r, diag_zeta()), z);
}

TEST(Z2Index, IllDefinedAtNullVector) {
    ComplexVector r(2);
    r << 1.0, 1.0; // <R|zeta|R> = 0
    EXPECT_THROW(z2_index(r, diag_zeta()), IndexIllDefined);
    EXPECT_THROW(ep_indicator(ComplexVector::Zero(2), diag_zeta()), std::invalid_argument);
}

TEST(EpIndicator, HermitianIdentityMetricGivesOne) {
    const ComplexMatrix h = build_hamiltonian(staggered_chain(4, 0.4, 0.9, 0.0));
    const auto s = spectrum_with_indices(h, ComplexMatrix::Identity(h.rows(), h.cols()));
    for (const auto& l : s.levels) {
        EXPECT_NEAR(l.ep_indicator, 1.0, 1e-12);
        EXPECT_EQ(l.z2, Z2Index::positive);
    }
}

TEST(EpIndicator, VanishesAtToyExceptionalPoint) {
    // a = |w|: the 2x2 is a Jordan block; its only eigenvector is (1, -1)/sqrt2
    ComplexVector r(2);
    r << 1.0, -1.0;
    EXPECT_LT(ep_indicator(r, diag_zeta()), 1e-15);
    EXPECT_THROW(spectrum_with_indices(toy(1.0, 1.0), diag_zeta()), AtExceptionalPoint);
}

TEST(EpIndicator, DecreasesTowardsTheEP) {
    double prev = 1.0;
    for (double a : {2.0, 1.1, 1.01, 1.001}) {
        const auto s = spectrum_with_indices(toy(a, 1.0), diag_zeta());
        const double ind = s.levels[1].ep_indicator;
        EXPECT_GT(ind, 0.0);
        EXPECT_LT(ind, prev);
        prev = ind;
    }
    EXPECT_LT(prev, 0.05);
}

TEST(Spectrum, ToyIndicesUpperPositiveLowerNegative) {
    const auto s = spectrum_with_indices(toy(2.0, 1.0), diag_zeta());
    ASSERT_EQ(s.size(), 2u);
    EXPECT_NEAR(s.levels[1].eigenvalue.real(), std::sqrt(3.0), 1e-13);
    EXPECT_EQ(s.levels[1].z2, Z2Index::positive);
    EXPECT_EQ(s.levels[0].z2, Z2Index::negative);
    EXPECT_LT(s.mapping_residual, 1e-12);
}

TEST(Spectrum, TwoSiteChainParities) {
    const ComplexMatrix h = build_hamiltonian(staggered_chain(2, 1.0, 1.0, 0.0));
    const auto s = spectrum_with_indices(h, build_parity(2));
    const std::vector<Z2Index> want{Z2Index::positive, Z2Index::positive, Z2Index::negative, Z2Index::positive};
    const double r5 = std::sqrt(5.0);
    const std::vector<double> e{-r5, -1.0, 1.0, r5};
    for (int k = 0; k < 4; ++k) {
        EXPECT_NEAR(s.levels[k].eigenvalue.real(), e[k], 1e-13);
        EXPECT_EQ(s.levels[k].z2, want[k]) << "level " << k;
    }
}

TEST(Spectrum, IndexEqualsParityAtHermitianPoint) {
    const ComplexMatrix h = build_hamiltonian(staggered_chain(4, 0.6, -0.8, 0.0));
    const ComplexMatrix p = build_parity(4);
    const auto s = spectrum_with_indices(h, p);
    for (std::size_t k = 0; k < s.size(); ++k) {
        const ComplexVector r = s.eigensystem.right.col(static_cast<Eigen::Index>(k));
        const ComplexVector pr = p * r;
        const double sign = static_cast<double>(to_int(s.levels[k].z2));
        EXPECT_LT((pr - sign * r).norm() / r.norm(), 1e-10) << "level " << k;
    }
}

TEST(Spectrum, AccidentalDegeneracyResolvedByParity) {
    // N=4 at J = Delta has exact opposite-parity crossings; each level still gets an index.
    const double jt = std::sqrt(0.5);
    const ComplexMatrix h = build_hamiltonian(staggered_chain(4, jt, jt, 0.0));
    const auto s = spectrum_with_indices(h, build_parity(4));
    for (const auto& l : s.levels) {
        EXPECT_TRUE(l.real);
        EXPECT_NE(l.z2, Z2Index::undefined);
        EXPECT_GT(l.ep_indicator, 1.0 - 1e-10);
    }
}

TEST(Spectrum, ConjugatePairsAndLeftRightMapping) {
    const ComplexMatrix h = build_hamiltonian(staggered_chain(4, 0.6, 0.8, 0.3));
    const ComplexMatrix p = build_parity(4);
    const auto s = spectrum_with_indices(h, p);
    int undefined = 0;
    for (const auto& l : s.levels) {
        if (!l.real) {
            ++undefined;
            ASSERT_TRUE(l.conjugate_partner.has_value());
            const auto& q = s.levels[static_cast<std::size_t>(*l.conjugate_partner)];
            EXPECT_EQ(q.conjugate_partner, l.index);
            EXPECT_LT(std::abs(q.eigenvalue - std::conj(l.eigenvalue)), 1e-9);
            EXPECT_EQ(l.z2, Z2Index::undefined);
        } else {
            const auto col = static_cast<Eigen::Index>(l.index);
            const ComplexVector r = s.eigensystem.right.col(col);
            EXPECT_LT(std::abs(r.dot(p * r).imag()), 1e-10);
            const ComplexVector mapped = static_cast<double>(to_int(l.z2)) * (p * r);
            EXPECT_LT((s.eigensystem.left.col(col) - mapped).norm(), 1e-9);
        }
    }
    EXPECT_GT(undefined, 0);
    EXPECT_EQ(undefined % 2, 0);
    EXPECT_LT(s.eigensystem.biortho_residual, 1e-9);
}

TEST(Spectrum, IndexConservedBelowFirstEP) {
    // N=4, j~ = -0.95: the ground pair stays real up to gamma~ ~ 2.6e-3.
    const ComplexMatrix p = build_parity(4);
    const auto s0 = spectrum_with_indices(build_hamiltonian(NormalizedPoint{-0.95, 0.0}.spec(4)), p);
    for (double g = 0.0; g < 2.4e-3; g += 2e-4) {
        const auto s = spectrum_with_indices(build_hamiltonian(NormalizedPoint{-0.95, g}.spec(4)), p);
        for (int k : {0, 1}) {
            ASSERT_TRUE(s.levels[k].real);
            EXPECT_EQ(s.levels[k].z2, s0.levels[k].z2) << "gamma " << g;
        }
    }
}

TEST(Spectrum, DimensionMismatchRejected) {
    EXPECT_THROW(spectrum_with_indices(toy(2.0, 1.0), build_parity(2)), std::invalid_argument);
}
