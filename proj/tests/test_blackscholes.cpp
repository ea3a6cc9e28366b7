#include <gtest/gtest.h>

#include <random>

#include "heston/blackscholes.hpp"
#include "heston/harness.hpp"
#include "oracles.hpp"

using namespace heston;
using namespace heston::bs;

TEST(BlackScholes, NormalCdfAgainstSeries) {
    for (double x = -8.0; x <= 8.0; x += 0.25) {
        const double want = oracle::normal_cdf(x);
        EXPECT_LE(std::abs(norm_cdf(x) - want), 1e-12 * std::max(want, 1e-3)) << x;
    }
}

TEST(BlackScholes, AtTheMoneyValue) {
    // N(0.1) - N(-0.1) from the series oracle
    const double want = oracle::normal_cdf(0.1) - oracle::normal_cdf(-0.1);
    EXPECT_NEAR(want, 0.0796557, 5e-8);
    EXPECT_NEAR(bs_price(1.0, 0.0, 1.0, 1.0, 0.2, OptionType::Call), want, 1e-14);
}

TEST(BlackScholes, Parity) {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> k(0.5, 2.0), t(0.05, 5.0), v(0.05, 1.0), r(-0.02, 0.1);
    for (int n = 0; n < 500; ++n) {
        const double K = k(rng), T = t(rng), V = v(rng), R = r(rng);
        const double c = bs_price(1.0, R, K, T, V, OptionType::Call);
        const double p = bs_price(1.0, R, K, T, V, OptionType::Put);
        EXPECT_NEAR(c - p, 1.0 - K * std::exp(-R * T), 1e-14);
    }
}

TEST(BlackScholes, ZeroVolLimit) {
    const double c = bs_price(1.0, 0.05, 0.9, 1.0, 1e-12, OptionType::Call);
    EXPECT_NEAR(c, 1.0 - 0.9 * std::exp(-0.05), 1e-14);
    EXPECT_NEAR(bs_price(1.0, 0.05, 1.2, 1.0, 1e-12, OptionType::Call), 0.0, 1e-14);
}

TEST(BlackScholes, ImpliedVolRoundTrip) {
    for (double vol : {0.01, 0.05, 0.2, 0.7, 1.5, 3.0})
        for (double k : {0.8, 1.0, 1.2})
            for (auto ty : {OptionType::Call, OptionType::Put}) {
                const double px = bs_price(1.0, 0.02, k, 1.0, vol, ty);
                const double intrinsic = ty == OptionType::Call
                                             ? std::max(1.0 - k * std::exp(-0.02), 0.0)
                                             : std::max(k * std::exp(-0.02) - 1.0, 0.0);
                // no time value left to invert
                if (px - intrinsic < 1e-12) continue;
                EXPECT_NEAR(implied_vol(px, 1.0, 0.02, k, 1.0, ty), vol, 1e-9 * std::max(1.0, vol))
                    << vol << " " << k;
            }
}

TEST(BlackScholes, ImpliedVolBounds) {
    const double lower = 1.0 - 0.9 * std::exp(-0.02);
    EXPECT_EQ(implied_vol(lower, 1.0, 0.02, 0.9, 1.0, OptionType::Call), 0.0);
    EXPECT_THROW(implied_vol(lower - 1e-6, 1.0, 0.02, 0.9, 1.0, OptionType::Call), NoSolutionError);
    EXPECT_THROW(implied_vol(1.0, 1.0, 0.02, 0.9, 1.0, OptionType::Call), NoSolutionError);
    const double v = implied_vol(lower + 1e-15, 1.0, 0.02, 0.9, 1.0, OptionType::Call);
    EXPECT_GE(v, 0.0);
    EXPECT_TRUE(std::isfinite(v));
}

TEST(BlackScholes, ImpliedVolOfHestonPrice) {
    const MarketContext m = reference_market();
    const HestonParams p = reference_params();
    const OptionSpec opt{1.05, 0.5};
    const double px = price(p, m, opt);
    const double v = implied_vol(px, 1.0, 0.02, 1.05, 0.5, OptionType::Call);
    EXPECT_NEAR(bs_price(1.0, 0.02, 1.05, 0.5, v, OptionType::Call), px, 1e-10 * px);
}

TEST(BlackScholes, AtmDeltaStrike) {
    const double vol = 0.3, T = 0.5, r = 0.02;
    const double k = strike_from_delta(0.5, vol, 1.0, r, T, OptionType::Call);
    EXPECT_NEAR(k, std::exp((r + 0.5 * vol * vol) * T), 1e-14);
}

TEST(BlackScholes, DeltaRoundTrip) {
    for (double d = 0.05; d <= 0.951; d += 0.05) {
        const double kc = strike_from_delta(d, 0.25, 1.0, 0.02, 0.7, OptionType::Call);
        EXPECT_NEAR(bs_delta(1.0, 0.02, kc, 0.7, 0.25, OptionType::Call), d, 1e-9);
        const double kp = strike_from_delta(-d, 0.25, 1.0, 0.02, 0.7, OptionType::Put);
        EXPECT_NEAR(bs_delta(1.0, 0.02, kp, 0.7, 0.25, OptionType::Put), -d, 1e-9);
    }
    EXPECT_THROW(strike_from_delta(1.2, 0.2, 1.0, 0.0, 1.0, OptionType::Call), DomainError);
    EXPECT_THROW(strike_from_delta(0.2, 0.2, 1.0, 0.0, 1.0, OptionType::Put), DomainError);
}

TEST(BlackScholes, DeltaIsSpotDerivative) {
    const double h = 1e-5;
    for (auto ty : {OptionType::Call, OptionType::Put}) {
        const double fd = (bs_price(1.0 + h, 0.02, 1.1, 0.8, 0.3, ty) -
                           bs_price(1.0 - h, 0.02, 1.1, 0.8, 0.3, ty)) /
                          (2.0 * h);
        EXPECT_NEAR(bs_delta(1.0, 0.02, 1.1, 0.8, 0.3, ty), fd, 1e-6);
    }
}

TEST(BlackScholes, QuantileInvertsCdf) {
    for (double p : {1e-10, 0.01, 0.3, 0.5, 0.9, 0.999999})
        EXPECT_NEAR(norm_cdf(norm_quantile(p)), p, 1e-13 * std::max(p, 1e-3));
}
