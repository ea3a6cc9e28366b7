#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "heston/errors.hpp"

namespace heston {

inline constexpr std::size_t kNumParams = 5;

// Index of each model parameter inside the parameter vector
// theta = [v0, v_bar, rho, kappa, sigma].
enum class Param : std::size_t { V0 = 0, VBar = 1, Rho = 2, Kappa = 3, Sigma = 4 };

inline constexpr std::array<std::string_view, kNumParams> kParamNames = {"v0", "v_bar", "rho",
                                                                         "kappa", "sigma"};

/// The five Heston model parameters.
///
/// Instances are always valid: v0, v_bar, kappa and sigma strictly positive and
/// rho strictly inside (-1, 1). Construction with anything else throws
/// DomainError.
class HestonParams {
public:
    HestonParams(double v0, double v_bar, double rho, double kappa, double sigma)
        : v0_(v0), v_bar_(v_bar), rho_(rho), kappa_(kappa), sigma_(sigma) {
        validate();
    }

    static HestonParams from_array(const std::array<double, kNumParams>& theta) {
        return {theta[0], theta[1], theta[2], theta[3], theta[4]};
    }

    // Convenience for the (kappa, v_bar, sigma, rho, v0) order used in tables.
    static HestonParams from_table_order(double kappa, double v_bar, double sigma, double rho,
                                         double v0) {
        return {v0, v_bar, rho, kappa, sigma};
    }

    [[nodiscard]] std::array<double, kNumParams> to_array() const {
        return {v0_, v_bar_, rho_, kappa_, sigma_};
    }

    [[nodiscard]] double v0() const { return v0_; }
    [[nodiscard]] double v_bar() const { return v_bar_; }
    [[nodiscard]] double rho() const { return rho_; }
    [[nodiscard]] double kappa() const { return kappa_; }
    [[nodiscard]] double sigma() const { return sigma_; }
    [[nodiscard]] double operator[](Param p) const { return to_array()[static_cast<std::size_t>(p)]; }

    [[nodiscard]] static bool is_valid(const std::array<double, kNumParams>& t) {
        for (double x : t)
            if (!std::isfinite(x)) return false;
        return t[0] > 0.0 && t[1] > 0.0 && t[2] > -1.0 && t[2] < 1.0 && t[3] > 0.0 && t[4] > 0.0;
    }

    friend bool operator==(const HestonParams&, const HestonParams&) = default;

private:
    void validate() const {
        if (!is_valid(to_array()))
            throw DomainError("invalid Heston parameters: v0=" + std::to_string(v0_) +
                              " v_bar=" + std::to_string(v_bar_) + " rho=" + std::to_string(rho_) +
                              " kappa=" + std::to_string(kappa_) +
                              " sigma=" + std::to_string(sigma_));
    }

    double v0_;
    double v_bar_;
    double rho_;
    double kappa_;
    double sigma_;
};

/// Spot and flat continuously compounded rate.
struct MarketContext {
    double spot = 1.0;
    double rate = 0.0;

    MarketContext() = default;
    MarketContext(double s, double r) : spot(s), rate(r) {
        if (!(spot > 0.0) || !std::isfinite(spot) || !std::isfinite(rate))
            throw DomainError("market context requires a positive finite spot");
    }

    [[nodiscard]] double discount(double t) const { return std::exp(-rate * t); }
    [[nodiscard]] double forward(double t) const { return spot * std::exp(rate * t); }
};

enum class OptionType { Call, Put };

inline std::string_view to_string(OptionType t) { return t == OptionType::Call ? "CALL" : "PUT"; }

/// One European vanilla contract; maturity in year fractions (252 trading days = 1).
struct OptionSpec {
    double strike = 1.0;
    double maturity = 1.0;
    OptionType type = OptionType::Call;

    OptionSpec() = default;
    OptionSpec(double k, double t, OptionType ty = OptionType::Call)
        : strike(k), maturity(t), type(ty) {
        if (!(strike > 0.0) || !(maturity > 0.0) || !std::isfinite(strike) ||
            !std::isfinite(maturity))
            throw DomainError("option requires positive strike and maturity");
    }
};

inline constexpr double kTradingDaysPerYear = 252.0;

inline double days_to_years(double days) { return days / kTradingDaysPerYear; }

struct Quote {
    OptionSpec option;
    double market_price = 0.0;
    double implied_vol = 0.0;  // 0 when unknown
};

/// Market context plus the quotes to calibrate against.
struct QuoteChain {
    MarketContext market;
    std::vector<Quote> quotes;

    [[nodiscard]] std::size_t size() const { return quotes.size(); }

    // Throws DomainError when the chain is empty or a price breaks the static bounds.
    void validate() const {
        if (quotes.empty()) throw DomainError("quote chain is empty");
        for (std::size_t i = 0; i < quotes.size(); ++i) {
            const auto& q = quotes[i];
            const double bound = q.option.type == OptionType::Call
                                     ? market.spot
                                     : q.option.strike * market.discount(q.option.maturity);
            if (!(q.market_price >= 0.0) || q.market_price > bound)
                throw DomainError("quote " + std::to_string(i) +
                                  " violates no-arbitrage price bounds");
        }
    }
};

}  // namespace heston
