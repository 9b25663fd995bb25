#include <gtest/gtest.h>

#include "psh/tracking.hpp"

using namespace psh;

namespace {

// H = [[e0/2, g w], [-g conj(w), -e0/2]] with zeta = diag(1, -1): EP at g = e0 / (2|w|)
MatrixFamily toy_family(double e0, Complex w) {
    ComplexMatrix zeta = ComplexMatrix::Zero(2, 2);
    zeta(0, 0) = 1.0;
    zeta(1, 1) = -1.0;
    return MatrixFamily{[=](double g) {
                            ComplexMatrix m(2, 2);
                            m << e0 / 2, g * w, -g * std::conj(w), -e0 / 2;
                            return m;
                        },
                        zeta};
}

SweepGrid grid_on(double lo, double hi, std::size_t count) {
    // the path is only used for validation of the numbers
    return SweepGrid::uniform(ParameterPath{4, SweepAxis::j_tilde, 0.0, {}}, lo, hi, count);
}

} // namespace

TEST(FindEP2, ToyModelCriticalGain) {
    TrackingOptions opt;
    opt.ep_tol = 1e-12;
    const MatrixFamily fam = toy_family(0.2, 1.0);
    const EPRecord rec = find_ep2(fam, 0, 1, 0.0, 0.2, opt);
    EXPECT_NEAR(rec.parameter, 0.1, 1e-10);
    EXPECT_LE(rec.bracket_width, opt.ep_tol);
    ASSERT_EQ(rec.indices.size(), 2u);
    EXPECT_NE(rec.indices[0], rec.indices[1]);
}

TEST(FindEP2, ComplexPhaseOfCouplingIrrelevant) {
    TrackingOptions opt;
    opt.ep_tol = 1e-12;
    const EPRecord rec = find_ep2(toy_family(0.5, std::polar(2.0, 0.7)), 0, 1, 0.0, 1.0, opt);
    EXPECT_NEAR(rec.parameter, 0.125, 1e-10);
}

TEST(FindEP2, SameIndexPairHasNoEP) {
    // zeta = identity: the family is Hermitian and the pair never leaves the real axis
    MatrixFamily fam{[](double g) {
                         ComplexMatrix m(2, 2);
                         m << 0.1, g, g, -0.1;
                         return m;
                     },
                     ComplexMatrix::Identity(2, 2)};
    EXPECT_THROW(find_ep2(fam, 0, 1, 0.0, 1.0), NoEPInBracket);
}

TEST(FindEP2, BracketMustStartReal) {
    EXPECT_THROW(find_ep2(toy_family(0.2, 1.0), 0, 1, 0.15, 0.2), NoEPInBracket);
    EXPECT_THROW(find_ep2(toy_family(0.2, 1.0), 0, 0, 0.0, 0.2), std::invalid_argument);
}

TEST(Sweep, ToyTracksFollowSquareRootLaw) {
    // grid contains the EP itself: that point is nudged rather than failing
    const SweepResult r = sweep(toy_family(0.2, 1.0), grid_on(0.0, 0.2, 201));
    ASSERT_EQ(r.tracks.size(), 2u);
    EXPECT_FALSE(r.nudged_points.empty());
    ASSERT_EQ(r.ep2.size(), 1u);
    EXPECT_NEAR(r.ep2[0].parameter, 0.1, 1e-8);
    for (std::size_t i = 0; i < r.grid.points.size(); ++i) {
        const double g = r.tracks[0].samples[i].parameter;
        if (std::abs(g - 0.1) < 1e-6)
            continue;
        const Complex want = std::sqrt(Complex(0.01 - g * g, 0.0));
        for (const auto& t : r.tracks) {
            const Complex e = t.samples[i].eigenvalue;
            EXPECT_NEAR(std::abs(e.real()), want.real(), 1e-10);
            EXPECT_NEAR(std::abs(e.imag()), want.imag(), 1e-10);
        }
    }
}

TEST(Sweep, HermitianLineIsRealEverywhere) {
    const SweepResult r = sweep(SweepGrid::uniform(ParameterPath{4, SweepAxis::j_tilde, 0.0, {}}, -1.0, 1.0, 201));
    ASSERT_EQ(r.tracks.size(), 16u);
    for (const auto& t : r.tracks) {
        ASSERT_EQ(t.samples.size(), 201u);
        for (const auto& s : t.samples) {
            EXPECT_TRUE(s.real);
            EXPECT_EQ(s.eigenvalue.imag(), 0.0);
        }
    }
    EXPECT_TRUE(r.ep2.empty());
}

TEST(Sweep, GainOpensConjugatePairs) {
    const SweepResult r = sweep(SweepGrid::uniform(ParameterPath{4, SweepAxis::j_tilde, 0.21, {}}, -1.0, 1.0, 401));
    EXPECT_FALSE(r.ep2.empty());
    bool any_complex = false;
    for (const auto& t : r.tracks)
        for (const auto& s : t.samples)
            if (!s.real) {
                any_complex = true;
                ASSERT_GE(s.partner_track, 0);
                const auto& p = r.tracks[static_cast<std::size_t>(s.partner_track)];
                EXPECT_LT(std::abs(p.samples[&s - t.samples.data()].eigenvalue - std::conj(s.eigenvalue)), 1e-7);
            }
    EXPECT_TRUE(any_complex);
    for (const auto& e : r.ep2) {
        EXPECT_LE(e.bracket_width, 1e-8);
        EXPECT_NE(e.indices[0], e.indices[1]);
    }
}

TEST(Sweep, RealCountChangesOnlyAtRecordedEPs) {
    const SweepResult r = sweep(SweepGrid::uniform(ParameterPath{4, SweepAxis::j_tilde, 0.21, {}}, -1.0, 1.0, 401));
    const auto& pts = r.grid.points;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        int before = 0, after = 0;
        for (const auto& t : r.tracks) {
            before += t.samples[i - 1].real;
            after += t.samples[i].real;
        }
        int events = 0;
        for (const auto& e : r.ep2)
            if (e.parameter > pts[i - 1] && e.parameter < pts[i])
                ++events;
        EXPECT_EQ(std::abs(before - after) <= 2 * events, true) << "cell " << i;
        if (before != after)
            EXPECT_GT(events, 0) << "cell " << i;
    }
}

TEST(Sweep, IndicatorsPositiveOnRealSideAndShrinkTowardsEP) {
    const ParameterPath path{4, SweepAxis::j_tilde, 0.21, {}};
    const SweepResult r = sweep(SweepGrid::uniform(path, -0.9, -0.3, 121));
    ASSERT_FALSE(r.ep2.empty());
    const EPRecord& e = r.ep2.front();
    const MatrixFamily fam = path.family();
    // approach from the real side: find which side is real by probing
    double prev = 2.0;
    for (double d : {1e-2, 1e-3, 1e-4, 1e-5}) {
        for (double sgn : {-1.0, 1.0}) {
            const SolvedPoint sp = solve_point(fam, e.parameter + sgn * d);
            double smallest = 1.0;
            std::size_t real_near = 0;
            for (const auto& l : sp.spectrum.levels)
                if (l.real && std::abs(l.eigenvalue - e.eigenvalues[0]) < 0.2) {
                    smallest = std::min(smallest, l.ep_indicator);
                    ++real_near;
                }
            if (real_near >= 2) {
                EXPECT_GT(smallest, 0.0);
                EXPECT_LT(smallest, prev);
                prev = smallest;
            }
        }
    }
    EXPECT_LT(prev, 0.05);
}

TEST(Sweep, DeterministicAcrossWorkerCounts) {
    const SweepGrid grid = SweepGrid::uniform(ParameterPath{4, SweepAxis::j_tilde, 0.40125, {}}, -1.0, 1.0, 301);
    SweepOptions a, b;
    a.workers = 1;
    b.workers = 4;
    b.block = 17;
    const SweepResult ra = sweep(grid, a), rb = sweep(grid, b);
    ASSERT_EQ(ra.ep2.size(), rb.ep2.size());
    for (std::size_t k = 0; k < ra.ep2.size(); ++k) {
        EXPECT_EQ(ra.ep2[k].parameter, rb.ep2[k].parameter);
        EXPECT_EQ(ra.ep2[k].levels, rb.ep2[k].levels);
    }
    for (std::size_t t = 0; t < ra.tracks.size(); ++t)
        for (std::size_t i = 0; i < grid.points.size(); ++i)
            EXPECT_EQ(ra.tracks[t].samples[i].eigenvalue, rb.tracks[t].samples[i].eigenvalue);
}

TEST(Grid, Validation) {
    const ParameterPath p{4, SweepAxis::j_tilde, 0.1, {}};
    EXPECT_THROW(SweepGrid::uniform(p, 0.5, 0.5, 10), std::invalid_argument);
    EXPECT_THROW(SweepGrid::uniform(p, -2.0, 1.0, 10).validate(), std::invalid_argument);
    SweepGrid g{p, {0.1, 0.3, 0.2}};
    EXPECT_THROW(g.validate(), std::invalid_argument);
    EXPECT_EQ(parse_axis("gt"), SweepAxis::gamma_tilde);
    EXPECT_THROW(parse_axis("delta"), std::invalid_argument);
}

TEST(Matching, IdentityBetweenEqualSpectra) {
    const auto fam = ParameterPath{4, SweepAxis::j_tilde, 0.21, {}}.family();
    const SolvedPoint a = solve_point(fam, 0.3);
    const LevelMatch m = match_levels(a.spectrum, a.spectrum);
    for (std::size_t k = 0; k < m.next_of.size(); ++k)
        EXPECT_EQ(m.next_of[k], static_cast<int>(k));
    EXPECT_NEAR(m.weakest, 1.0, 1e-9);
}
