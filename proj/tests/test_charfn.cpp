#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "heston/charfn.hpp"
#include "heston/harness.hpp"
#include "oracles.hpp"

using namespace heston;

namespace {

oracle::P as_oracle(const HestonParams& p) {
    return {p.v0(), p.v_bar(), p.rho(), p.kappa(), p.sigma()};
}

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

const Representation kAll[] = {Representation::Heston, Representation::Schoutens,
                               Representation::DelBano, Representation::Cui};

}  // namespace

TEST(CharFn, NormalisationAtZero) {
    const MarketContext m = reference_market();
    std::mt19937_64 rng(11);
    for (int n = 0; n < 200; ++n) {
        const HestonParams p = draw_random_params(rng);
        for (double t : {0.01, 0.5, 2.0, 15.0})
            for (auto rep : kAll) EXPECT_LT(std::abs(char_fn(rep, p, m, 0.0, t) - 1.0), 1e-12);
    }
}

TEST(CharFn, MartingaleAtMinusI) {
    const MarketContext m{1.3, 0.05};
    std::mt19937_64 rng(12);
    for (int n = 0; n < 200; ++n) {
        const HestonParams p = draw_random_params(rng);
        for (double t : {0.1, 1.0, 5.0, 15.0}) {
            const cplx phi = char_fn(Representation::Cui, p, m, cplx{0.0, -1.0}, t);
            EXPECT_LT(rel(phi, m.forward(t)), 1e-10);
        }
    }
}

TEST(CharFn, ConjugateSymmetry) {
    const MarketContext m = reference_market();
    const HestonParams p = reference_params();
    for (double u : {0.3, 1.7, 9.0, 40.0})
        for (auto rep : kAll) {
            const cplx a = char_fn(rep, p, m, -u, 1.0);
            const cplx b = std::conj(char_fn(rep, p, m, u, 1.0));
            EXPECT_LT(std::abs(a - b), 1e-14 * std::max(1.0, std::abs(b)));
        }
}

TEST(CharFn, CuiMatchesLittleTrapOracle) {
    const MarketContext m = reference_market();
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> uu(1e-4, 200.0);
    for (int n = 0; n < 100; ++n) {
        const HestonParams p = draw_random_params(rng);
        for (double t : {0.5, 5.0, 15.0})
            for (int k = 0; k < 10; ++k) {
                const double u = uu(rng);
                const cplx want = oracle::little_trap_cf(as_oracle(p), m.spot, m.rate, u, t);
                if (std::abs(want) < 1e-250) continue;
                EXPECT_LT(rel(char_fn(Representation::Cui, p, m, u, t), want), 1e-9)
                    << "u=" << u << " t=" << t;
            }
    }
}

TEST(CharFn, TermsReconstruction) {
    const HestonParams p = reference_params();
    for (double t : {0.1, 1.0, 15.0, 200.0})
        for (cplx u : {cplx{0.5, 0.0}, cplx{3.0, -1.0}, cplx{50.0, 0.0}}) {
            const CharFnTerms k = cf_terms(p, u, t);
            const cplx d2 = k.xi * k.xi + p.sigma() * p.sigma() * (u * u + kI * u);
            EXPECT_LT(rel(k.d * k.d, d2), 1e-12);
            EXPECT_LT(rel(k.A * k.A2, k.A1), 1e-10);
            EXPECT_GE(k.d.real(), 0.0);
        }
}

TEST(CharFn, TermsAtZeroFrequency) {
    const HestonParams p = reference_params();
    const CharFnTerms k = cf_terms(p, 0.0, 1.0);
    EXPECT_LT(std::abs(k.xi - p.kappa()), 1e-15);
    EXPECT_LT(std::abs(k.d - p.kappa()), 1e-15);
    EXPECT_LT(std::abs(k.A), 1e-15);
    EXPECT_LT(std::abs(k.A1), 1e-15);
}

TEST(CharFn, DMatchesNaiveWhereNoWrap) {
    const HestonParams p = reference_params();
    const CharFnTerms k = cf_terms(p, 5.0, 15.0);
    const cplx naive = oracle::naive_D(as_oracle(p), 5.0, 15.0);
    EXPECT_LT(std::abs(k.D - naive), 1e-10);
}

TEST(CharFn, ShortMaturityBranchesAgree) {
    const MarketContext m = reference_market();
    const HestonParams p = reference_params();
    for (double u : {0.5, 5.0, 50.0}) {
        const cplx cui = char_fn(Representation::Cui, p, m, u, 1e-6);
        const cplx sch = char_fn(Representation::Schoutens, p, m, u, 1e-6);
        EXPECT_LT(rel(cui, sch), 1e-12);
    }
}

TEST(CharFn, LongMaturityDoesNotOverflow) {
    const MarketContext m = reference_market();
    const HestonParams p = reference_params();
    for (double u : {1.0, 10.0}) {
        const CharFnTerms k = cf_terms(p, u, 1000.0);
        EXPECT_LT(k.log_scale, 0.0);
        const cplx phi = cui_char_fn(p, m, k);
        const cplx want = oracle::little_trap_cf(as_oracle(p), m.spot, m.rate, u, 1000.0);
        EXPECT_TRUE(std::isfinite(phi.real()));
        EXPECT_LT(std::abs(phi - want), 1e-12);
    }
}

// The CF is continuous in u for the rearranged and Schoutens forms, while the
// original Heston form and the Del Bano one jump once the log crosses its cut.
TEST(CharFn, ContinuityScan) {
    const MarketContext m = reference_market();
    const HestonParams p = reference_params();
    const double t = 15.0;
    std::vector<double> grid;
    for (int k = 1; k <= 10000; ++k) grid.push_back(1e-3 * k);
    auto scan = [&](Representation rep) {
        std::vector<double> re;
        for (double u : grid) re.push_back(char_fn(rep, p, m, u, t).real());
        return find_jumps(re);
    };
    const auto heston_jumps = scan(Representation::Heston);
    const auto delbano_jumps = scan(Representation::DelBano);
    ASSERT_FALSE(heston_jumps.empty());
    ASSERT_FALSE(delbano_jumps.empty());
    EXPECT_NEAR(grid[heston_jumps.front()], 1.0, 0.25);
    EXPECT_NEAR(grid[delbano_jumps.front()], 2.0, 0.5);
    EXPECT_TRUE(scan(Representation::Cui).empty());
    EXPECT_TRUE(scan(Representation::Schoutens).empty());
}

TEST(CharFn, SpiralPhaseRearrangedIsContinuous) {
    const HestonParams p = reference_params();
    std::vector<double> grid;
    for (int k = 0; k <= 4000; ++k) grid.push_back(1e-3 * k);
    const auto pts = spiral_diagnostic(p, 15.0, grid);
    std::vector<cplx> principal;
    std::vector<cplx> rearranged;
    for (const auto& s : pts) {
        principal.push_back(s.log_a2_principal);
        rearranged.push_back(s.log_a2_rearranged);
        EXPECT_LT(std::abs(std::exp(s.log_a2_principal - s.log_a2_rearranged) - 1.0), 1e-10);
    }
    EXPECT_GT(max_phase_step(principal), std::numbers::pi);
    EXPECT_LT(max_phase_step(rearranged), 0.1);
}

TEST(CharFn, SpiralRejectsSmallA2) {
    const HestonParams p{0.04, 0.04, -0.5, 0.5, 0.3};
    const double grid[] = {0.0};
    EXPECT_THROW(spiral_diagnostic(p, 0.01, grid), DomainError);
    const double bad[] = {1.0, 0.5};
    EXPECT_THROW(spiral_diagnostic(reference_params(), 15.0, bad), DomainError);
}

TEST(CharFn, FindJumpsOnStep) {
    std::vector<double> f;
    for (int k = 0; k < 100; ++k) f.push_back(0.01 * k + (k >= 50 ? 1.0 : 0.0));
    const auto j = find_jumps(f);
    ASSERT_EQ(j.size(), 1u);
    EXPECT_EQ(j[0], 49u);
}

TEST(CharFn, RepresentationNames) {
    EXPECT_EQ(representation_from_string("delbano"), Representation::DelBano);
    EXPECT_EQ(representation_from_string("cui"), Representation::Cui);
    EXPECT_THROW(representation_from_string("bogus"), DomainError);
}

TEST(CharFn, RejectsNonPositiveMaturity) {
    EXPECT_THROW(cf_terms(reference_params(), 1.0, 0.0), DomainError);
}
