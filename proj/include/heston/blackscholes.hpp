#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "heston/errors.hpp"
#include "heston/params.hpp"

namespace heston::bs {

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

inline double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("norm_quantile needs p in (0, 1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

namespace detail {

inline double d1(double spot, double rate, double strike, double maturity, double vol) {
    const double sd = vol * std::sqrt(maturity);
    return (std::log(spot / strike) + (rate + 0.5 * vol * vol) * maturity) / sd;
}

}  // namespace detail

inline double bs_price(double spot, double rate, double strike, double maturity, double vol,
                       OptionType type) {
    if (!(spot > 0.0 && strike > 0.0 && maturity > 0.0 && vol >= 0.0))
        throw DomainError("bs_price: spot, strike, maturity must be positive and vol >= 0");
    const double df = std::exp(-rate * maturity);
    if (vol == 0.0) {
        const double fwd_intrinsic = spot - strike * df;
        return type == OptionType::Call ? std::max(fwd_intrinsic, 0.0)
                                        : std::max(-fwd_intrinsic, 0.0);
    }
    const double d1 = detail::d1(spot, rate, strike, maturity, vol);
    const double d2 = d1 - vol * std::sqrt(maturity);
    if (type == OptionType::Call) return spot * norm_cdf(d1) - strike * df * norm_cdf(d2);
    return strike * df * norm_cdf(-d2) - spot * norm_cdf(-d1);
}

/// Spot delta: N(d1) for calls, N(d1) - 1 for puts.
inline double bs_delta(double spot, double rate, double strike, double maturity, double vol,
                       OptionType type) {
    if (!(spot > 0.0 && strike > 0.0 && maturity > 0.0 && vol > 0.0))
        throw DomainError("bs_delta: inputs must be positive");
    const double n = norm_cdf(detail::d1(spot, rate, strike, maturity, vol));
    return type == OptionType::Call ? n : n - 1.0;
}

inline double bs_vega(double spot, double rate, double strike, double maturity, double vol) {
    return spot * norm_pdf(detail::d1(spot, rate, strike, maturity, vol)) * std::sqrt(maturity);
}

/// Strike whose spot delta at `vol` equals `delta`.
inline double strike_from_delta(double delta, double vol, double spot, double rate,
                                double maturity, OptionType type) {
    const bool ok = type == OptionType::Call ? (delta > 0.0 && delta < 1.0)
                                             : (delta > -1.0 && delta < 0.0);
    if (!ok) throw DomainError("strike_from_delta: delta outside the open interval for its type");
    if (!(vol > 0.0 && spot > 0.0 && maturity > 0.0))
        throw DomainError("strike_from_delta: inputs must be positive");
    const double d1 = norm_quantile(type == OptionType::Call ? delta : delta + 1.0);
    return spot * std::exp(-d1 * vol * std::sqrt(maturity) + (rate + 0.5 * vol * vol) * maturity);
}

inline constexpr int kImpliedVolMaxIter = 100;

/// Black-Scholes implied volatility by Newton's method safeguarded with a
/// bisection bracket. Throws NoSolutionError when the price is outside the
/// static no-arbitrage bounds.
inline double implied_vol(double price, double spot, double rate, double strike, double maturity,
                          OptionType type) {
    if (!(spot > 0.0 && strike > 0.0 && maturity > 0.0))
        throw DomainError("implied_vol: spot, strike, maturity must be positive");
    const double df = std::exp(-rate * maturity);
    const double lower = type == OptionType::Call ? std::max(spot - strike * df, 0.0)
                                                  : std::max(strike * df - spot, 0.0);
    const double upper = type == OptionType::Call ? spot : strike * df;
    if (!(price >= lower && price < upper))
        throw NoSolutionError("implied_vol: price outside no-arbitrage bounds");
    if (price == lower) return 0.0;

    auto f = [&](double v) { return bs_price(spot, rate, strike, maturity, v, type) - price; };

    double lo = 0.0;
    double hi = 1.0;
    while (f(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e3) throw NoSolutionError("implied_vol: volatility above 1000");
    }

    // Start at the inflection point of the price in vol, where Newton is monotone.
    double v = std::sqrt(2.0 * std::abs(std::log(spot / strike) + rate * maturity) / maturity);
    if (!(v > lo && v < hi)) v = 0.5 * (lo + hi);
    const double tol = 4.0 * std::numeric_limits<double>::epsilon() * std::max(price, 1e-300);
    for (int it = 0; it < kImpliedVolMaxIter; ++it) {
        const double fv = f(v);
        if (std::abs(fv) <= tol) return v;
        if (fv > 0.0)
            hi = v;
        else
            lo = v;
        const double vega = bs_vega(spot, rate, strike, maturity, v);
        double next = v - fv / vega;
        if (!(vega > 0.0) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() * hi) return next;
        v = next;
    }
    return v;
}

}  // namespace heston::bs
