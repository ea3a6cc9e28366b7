#include <gtest/gtest.h>

#include <random>

#include <Eigen/QR>

#include "heston/calibrator.hpp"
#include "heston/harness.hpp"

using namespace heston;

namespace {

const QuoteChain& reference_chain() {
    static const QuoteChain chain = generate_surface(reference_params(), reference_market()).chain;
    return chain;
}

LmState random_state(std::uint64_t seed, Eigen::Index n = 12) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    LmState s;
    s.J = Jacobian(5, n);
    s.r.resize(n);
    for (Eigen::Index i = 0; i < 5; ++i)
        for (Eigen::Index j = 0; j < n; ++j) s.J(i, j) = z(rng);
    for (Eigen::Index j = 0; j < n; ++j) s.r[j] = z(rng);
    return s;
}

}  // namespace

TEST(LmStep, LargeDampingIsSteepestDescent) {
    LmState s = random_state(1);
    s.mu = 1e12;
    const ParamVector step = lm_step(s);
    const ParamVector g = s.J * s.r;
    EXPECT_NEAR(step.dot(-g) / (step.norm() * g.norm()), 1.0, 1e-10);
    EXPECT_NEAR(step.norm() * s.mu / g.norm(), 1.0, 1e-6);
}

TEST(LmStep, SmallDampingIsGaussNewton) {
    LmState s = random_state(2);
    s.mu = 1e-14;
    const ParamVector step = lm_step(s);
    // least squares solution of J^T x = -r
    const Eigen::MatrixXd A = s.J.transpose();
    const Eigen::VectorXd x = A.colPivHouseholderQr().solve(-s.r);
    EXPECT_LT((step - x).norm() / x.norm(), 1e-8);
}

TEST(LmStep, ZeroJacobianGivesZeroStep) {
    LmState s = random_state(3);
    s.J.setZero();
    s.mu = 1.0;
    EXPECT_EQ(lm_step(s).norm(), 0.0);
    s.mu = 0.0;
    EXPECT_THROW(lm_step(s), DomainError);
}

TEST(LmStep, StepIsDescentDirection) {
    for (std::uint64_t seed = 10; seed < 30; ++seed) {
        LmState s = random_state(seed);
        s.mu = 0.1;
        const ParamVector step = lm_step(s);
        EXPECT_LT(step.dot(s.J * s.r), 0.0);
    }
}

TEST(Hessian, OrthonormalRowsAreWellConditioned) {
    const Eigen::MatrixXd q = Eigen::MatrixXd::Random(20, 20).householderQr().householderQ();
    const Jacobian J = q.topRows(5);
    const auto h = gauss_newton_hessian(J);
    EXPECT_FALSE(h.rank_deficient);
    EXPECT_NEAR(h.condition, 1.0, 1e-12);
    EXPECT_LT((h.H - Matrix5::Identity()).norm(), 1e-12);
}

TEST(Hessian, RankDeficient) {
    Jacobian J = Jacobian::Random(5, 10);
    J.row(4) = 2.0 * J.row(1);
    const auto h = gauss_newton_hessian(J);
    EXPECT_TRUE(h.rank_deficient);
    EXPECT_TRUE(std::isinf(h.condition));
    const auto few = gauss_newton_hessian(Jacobian::Random(5, 3));
    EXPECT_TRUE(few.rank_deficient);
}

TEST(Calibrate, StartAtOptimumStopsImmediately) {
    const auto rep = calibrate(reference_chain(), reference_params());
    EXPECT_EQ(rep.stop_reason, StopReason::Residual);
    EXPECT_EQ(rep.iterations, 0u);
    EXPECT_LT(rep.residual_norm, 1e-12);
    EXPECT_EQ(rep.trace.size(), 1u);
}

TEST(Calibrate, RepresentativeRun) {
    const auto rep = calibrate(reference_chain(), representative_guess());
    EXPECT_EQ(rep.stop_reason, StopReason::Residual);
    EXPECT_LE(rep.squared_residual_norm, 1e-10);
    EXPECT_LE(rep.iterations, 26u);
    const auto fit = rep.theta_final.to_array();
    const auto ref = reference_params().to_array();
    EXPECT_LT(std::abs(fit[3] - ref[3]), 1.1e-2);
    EXPECT_LT(std::abs(fit[1] - ref[1]), 2.2e-5);
    EXPECT_LT(std::abs(fit[4] - ref[4]), 4.7e-4);
    EXPECT_LT(std::abs(fit[2] - ref[2]), 1e-4);
    EXPECT_LT(std::abs(fit[0] - ref[0]), 1.2e-5);
}

TEST(Calibrate, TraceInvariants) {
    const auto& chain = reference_chain();
    const auto rep = calibrate(chain, representative_guess());
    ASSERT_FALSE(rep.trace.empty());
    EXPECT_TRUE(rep.trace.front().accepted);
    EXPECT_DOUBLE_EQ(rep.trace.front().residual_norm, rep.initial_residual_norm);

    std::size_t accepted = 0;
    std::size_t evaluated = 0;
    double last = rep.initial_residual_norm;
    for (std::size_t k = 1; k < rep.trace.size(); ++k) {
        const auto& e = rep.trace[k];
        if (e.evaluated) ++evaluated;
        if (e.accepted) {
            ++accepted;
            EXPECT_LT(e.residual_norm, last);
            last = e.residual_norm;
        }
        EXPECT_TRUE(!e.accepted || e.evaluated);
    }
    EXPECT_EQ(accepted, rep.iterations);
    EXPECT_EQ(rep.n_price_evals, evaluated + 1);
    EXPECT_EQ(rep.n_linear_solves, rep.trace.size() - 1);
    EXPECT_DOUBLE_EQ(last, rep.residual_norm);

    const double recomputed = residual_vector(rep.theta_final, chain).r.norm();
    EXPECT_NEAR(recomputed, rep.residual_norm, 1e-14);
    EXPECT_DOUBLE_EQ(rep.squared_residual_norm, rep.residual_norm * rep.residual_norm);
}

TEST(Calibrate, NormResidualTestRunsLonger) {
    LmOptions o;
    o.residual_test = ResidualTest::Norm;
    const auto rep = calibrate(reference_chain(), representative_guess(), o);
    EXPECT_NE(rep.stop_reason, StopReason::MaxIter);
    EXPECT_LT(rep.residual_norm, 1e-8);
    const auto sq = calibrate(reference_chain(), representative_guess());
    EXPECT_GE(rep.iterations, sq.iterations);
}

TEST(Calibrate, StrictModeKeepsDampingOnAcceptance) {
    LmOptions o;
    o.strict_paper = true;
    o.max_iterations = 15;
    const auto rep = calibrate(reference_chain(), representative_guess(), o);
    double mu = rep.trace.size() > 1 ? rep.trace[1].mu : 0.0;
    for (std::size_t k = 1; k + 1 < rep.trace.size(); ++k) {
        if (rep.trace[k].accepted) EXPECT_DOUBLE_EQ(rep.trace[k + 1].mu, rep.trace[k].mu);
        EXPECT_GE(rep.trace[k].mu, mu);
        mu = rep.trace[k].mu;
    }
}

TEST(Calibrate, BoundsAreRespected) {
    LmOptions o;
    o.bounds = kReasonableBounds;
    std::mt19937_64 rng(5);
    const auto& chain = reference_chain();
    for (int n = 0; n < 3; ++n) {
        const HestonParams g = draw_random_params(rng);
        const auto rep = calibrate(chain, g, o);
        for (const auto& e : rep.trace)
            for (std::size_t j = 0; j < kNumParams; ++j) {
                EXPECT_GE(e.theta[j], kReasonableBounds[j].lo);
                EXPECT_LE(e.theta[j], kReasonableBounds[j].hi);
            }
    }
    EXPECT_THROW(calibrate(chain, HestonParams{0.01, 0.1, -0.5, 1.0, 0.3}, o), DomainError);
}

TEST(Calibrate, MaxIterationsReported) {
    LmOptions o;
    o.max_iterations = 2;
    const auto rep = calibrate(reference_chain(), representative_guess(), o);
    EXPECT_EQ(rep.stop_reason, StopReason::MaxIter);
    EXPECT_EQ(rep.iterations, 2u);
}

TEST(Calibrate, OptionValidation) {
    LmOptions o;
    o.tau = -1.0;
    EXPECT_THROW(calibrate(reference_chain(), representative_guess(), o), DomainError);
    QuoteChain empty{reference_market(), {}};
    EXPECT_THROW(calibrate(empty, representative_guess()), DomainError);
}

TEST(Calibrate, SingleQuoteResidual) {
    const OptionSpec opt{1.2, 0.25};
    QuoteChain c{reference_market(), {{opt, 0.01, 0.0}}};
    const auto r = residual_vector(reference_params(), c);
    ASSERT_EQ(r.r.size(), 1);
    EXPECT_DOUBLE_EQ(r.r[0], price(reference_params(), reference_market(), opt) - 0.01);
    EXPECT_DOUBLE_EQ(r.f, 0.5 * r.r[0] * r.r[0]);
}

TEST(Calibrate, StopReasonNames) {
    for (auto s : {StopReason::Residual, StopReason::Gradient, StopReason::Step, StopReason::MaxIter})
        EXPECT_EQ(stop_reason_from_string(to_string(s)), s);
    EXPECT_EQ(to_string(StopReason::Residual), "RESIDUAL");
}

TEST(Calibrate, RealisticCaseThree) {
    const auto c = realistic_cases()[2];
    const auto stats = run_realistic_case(c, 5, 3, {}, 1);
    EXPECT_EQ(stats.n_success, 5u);
    EXPECT_LE(stats.mean_iterations, 15.0);
}
