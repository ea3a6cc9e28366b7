#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "heston/harness.hpp"

using namespace heston;

namespace {

const Surface& reference_surface() {
    static const Surface s = generate_surface(reference_params(), reference_market());
    return s;
}

const SurfacePoint& point(int days, double delta) {
    for (const auto& p : reference_surface().points)
        if (p.maturity_days == days && p.delta == delta) return p;
    throw std::runtime_error("missing point");
}

}  // namespace

TEST(Harness, SurfaceShape) {
    const auto& s = reference_surface();
    EXPECT_EQ(s.points.size(), 40u);
    EXPECT_EQ(s.chain.size(), 40u);
    for (const auto& p : s.points) EXPECT_TRUE(p.ok);
}

TEST(Harness, SurfaceSelfConsistent) {
    const auto& s = reference_surface();
    for (const auto& q : s.chain.quotes) {
        const double iv = bs::implied_vol(q.market_price, 1.0, 0.02, q.option.strike,
                                          q.option.maturity, q.option.type);
        EXPECT_NEAR(iv, q.implied_vol, 1e-10);
    }
    for (const auto& p : s.points) {
        const OptionType ty = p.delta < 0 ? OptionType::Put : OptionType::Call;
        const double d = bs::bs_delta(1.0, 0.02, p.strike, days_to_years(p.maturity_days),
                                      p.implied_vol, ty);
        EXPECT_NEAR(d, p.delta, 1e-9);
    }
}

TEST(Harness, ReferenceSurfaceCallColumns) {
    EXPECT_NEAR(point(252, 0.50).implied_vol, 0.2975, 2e-3);
    EXPECT_NEAR(point(252, 0.25).implied_vol, 0.2837, 2e-3);
    EXPECT_NEAR(point(252, 0.10).implied_vol, 0.2722, 2e-3);
    EXPECT_NEAR(point(150, 0.50).implied_vol, 0.2925, 2e-3);
    EXPECT_NEAR(point(180, 0.50).implied_vol, 0.2943, 2e-3);
    EXPECT_NEAR(point(360, 0.50).implied_vol, 0.3007, 2e-3);
}

TEST(Harness, FlatSurfaceWithoutVolOfVol) {
    const HestonParams p{0.04, 0.04, 0.0, 2.0, 1e-6};
    const auto s = generate_surface(p, reference_market());
    for (const auto& q : s.chain.quotes) EXPECT_NEAR(q.implied_vol, 0.2, 1e-4);
}

TEST(Harness, DrawsAreDeterministicAndInRange) {
    const auto a = draw_random_params(77);
    const auto b = draw_random_params(77);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, draw_random_params(78));
    std::mt19937_64 rng(3);
    const int n = 10000;
    std::array<double, kNumParams> mean{};
    for (int k = 0; k < n; ++k) {
        const auto t = draw_random_params(rng).to_array();
        for (std::size_t j = 0; j < kNumParams; ++j) {
            EXPECT_GE(t[j], kReasonableBounds[j].lo);
            EXPECT_LE(t[j], kReasonableBounds[j].hi);
            mean[j] += t[j] / n;
        }
    }
    for (std::size_t j = 0; j < kNumParams; ++j) {
        const double lo = kReasonableBounds[j].lo, hi = kReasonableBounds[j].hi;
        const double se = (hi - lo) / std::sqrt(12.0 * n);
        EXPECT_NEAR(mean[j], 0.5 * (lo + hi), 4.0 * se) << kParamNames[j];
    }
}

TEST(Harness, PerturbationStaysWithinTenPercent) {
    const auto base = reference_params().to_array();
    std::mt19937_64 rng(9);
    for (int k = 0; k < 200; ++k) {
        const auto t = perturb(reference_params(), rng).to_array();
        for (std::size_t j = 0; j < kNumParams; ++j)
            EXPECT_LE(std::abs(t[j] - base[j]), 0.1 * std::abs(base[j]) + 1e-15);
    }
}

TEST(Harness, ValidationAtOptimumSucceeds) {
    ValidationConfig cfg;
    cfg.n_optima = 2;
    cfg.n_guesses = 2;
    cfg.start_at_optimum = true;
    const auto s = run_validation(cfg);
    EXPECT_EQ(s.n_cases, 4u);
    EXPECT_EQ(s.n_success, 4u);
    EXPECT_EQ(s.mean_iterations, 0.0);
}

TEST(Harness, ValidationDeterministicAcrossThreads) {
    ValidationConfig cfg;
    cfg.n_optima = 2;
    cfg.n_guesses = 2;
    cfg.threads = 1;
    const auto a = run_validation(cfg);
    cfg.threads = 3;
    const auto b = run_validation(cfg);
    EXPECT_EQ(a.n_success, b.n_success);
    EXPECT_EQ(a.mean_iterations, b.mean_iterations);
    EXPECT_EQ(a.mean_residual_norm, b.mean_residual_norm);
    EXPECT_EQ(a.stop_counts, b.stop_counts);
}

TEST(Harness, ContourHasMinimumAtOptimum) {
    const auto& chain = reference_surface().chain;
    const auto c = dump_contour(reference_params(), Param::Kappa, Param::VBar, chain, 11);
    ASSERT_EQ(c.grid.size(), 121u);
    const auto& centre = c.grid[5 * 11 + 5];
    EXPECT_NEAR(centre.x, 3.0, 1e-12);
    EXPECT_NEAR(centre.y, 0.1, 1e-12);
    EXPECT_LT(centre.residual_norm, 1e-9);
    for (const auto& g : c.grid)
        if (std::isfinite(g.residual_norm)) EXPECT_GE(g.residual_norm, centre.residual_norm);
}

TEST(Harness, ContourValleyAlongKappa) {
    // the objective is far flatter in kappa than in v_bar
    const auto& chain = reference_surface().chain;
    const auto c = dump_contour(reference_params(), Param::Kappa, Param::VBar, chain, 11, 0.1);
    const double along_kappa = c.grid[5 * 11 + 10].residual_norm;
    const double along_vbar = c.grid[10 * 11 + 5].residual_norm;
    EXPECT_GT(along_vbar, 5.0 * along_kappa);
}

TEST(Harness, ContourMatchesGaussNewtonModel) {
    // near the optimum ||r(theta* + h e_j)|| ~ |h| sqrt(H_jj) with H = J J^T
    const auto& chain = reference_surface().chain;
    const auto H = gauss_newton_hessian(jacobian(reference_params(), chain)).H;
    const auto c = dump_contour(reference_params(), Param::Kappa, Param::VBar, chain, 11, 1e-3);
    EXPECT_NEAR(c.grid[5 * 11 + 10].residual_norm / (3e-3 * std::sqrt(H(3, 3))), 1.0, 0.05);
    EXPECT_NEAR(c.grid[10 * 11 + 5].residual_norm / (1e-4 * std::sqrt(H(1, 1))), 1.0, 0.05);
}

TEST(Harness, ContourPathFromReport) {
    const auto& chain = reference_surface().chain;
    const auto rep = calibrate(chain, representative_guess());
    const auto c = dump_contour(reference_params(), Param::Kappa, Param::VBar, chain, 10, 0.5,
                                default_rule(), &rep);
    EXPECT_EQ(c.path.size(), rep.iterations + 1);
    EXPECT_DOUBLE_EQ(c.path.front().x, 1.2);
    EXPECT_THROW(dump_contour(reference_params(), Param::Kappa, Param::Kappa, chain), DomainError);
}

TEST(Harness, IntegrandTruncationShrinks) {
    const auto tr = dump_integrand_convergence(reference_params(), reference_market(), 1.1,
                                               {60, 90, 180, 252});
    ASSERT_EQ(tr.size(), 4u);
    for (std::size_t k = 1; k < tr.size(); ++k) EXPECT_LE(tr[k].bound.u_bar, tr[k - 1].bound.u_bar);
    EXPECT_EQ(tr[0].u.size(), 500u);
}

TEST(Harness, QuadratureStudyReferenceIsExact) {
    const auto& chain = reference_surface().chain;
    const auto rows = quadrature_error_study(reference_params(), chain, RuleKind::GaussLegendre,
                                             {40, 200}, 200);
    EXPECT_LE(rows[0].mean, 1e-6);
    EXPECT_EQ(rows[1].max, 0.0);
}

TEST(Harness, RealisticCasesTable) {
    const auto cs = realistic_cases();
    ASSERT_EQ(cs.size(), 3u);
    EXPECT_EQ(cs[0].params, HestonParams::from_table_order(0.5, 0.04, 1.0, -0.9, 0.04));
    EXPECT_EQ(cs[2].name, "III");
}
