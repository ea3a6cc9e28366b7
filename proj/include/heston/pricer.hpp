#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>

#include "heston/charfn.hpp"
#include "heston/params.hpp"
#include "heston/quadrature.hpp"

namespace heston {

/// Counts integral evaluations. One option price needs two integrals (the
/// shifted u - i one and the plain u one); a vectorised gradient also needs
/// two, each carrying all five components.
struct EvalCounter {
    std::size_t integrals = 0;
};

namespace detail {

// e^{-iu log K} / (iu) for real u > 0.
inline cplx strike_kernel(double u, double log_k) {
    return std::polar(1.0, -u * log_k) / cplx{0.0, u};
}

inline void count(EvalCounter* c, std::size_t n) {
    if (c) c->integrals += n;
}

}  // namespace detail

/// The two pricing integrands at real u > 0:
///   [ Re(e^{-iu ln K} phi(u - i) / (iu)),  Re(e^{-iu ln K} phi(u) / (iu)) ]
inline std::array<double, 2> integrand_block(const HestonParams& p, const MarketContext& m,
                                             const OptionSpec& opt, double u) {
    if (!(u > 0.0)) throw DomainError("integrand_block requires u > 0");
    const double t = opt.maturity;
    const cplx kernel = detail::strike_kernel(u, std::log(opt.strike));
    const cplx phi_shift = cui_char_fn(p, m, cf_terms(p, cplx{u, -1.0}, t));
    const cplx phi = cui_char_fn(p, m, cf_terms(p, cplx{u, 0.0}, t));
    return {(kernel * phi_shift).real(), (kernel * phi).real()};
}

/// European call by the two-integral formula
///   C = (S - e^{-rT} K)/2 + e^{-rT}/pi [ I(phi(u - i)) - K I(phi(u)) ]
/// using the continuous representation.
inline double price_call(const HestonParams& p, const MarketContext& m, const OptionSpec& opt,
                         const QuadratureRule& rule = default_rule(),
                         EvalCounter* counter = nullptr) {
    if (opt.type != OptionType::Call) throw DomainError("price_call needs a call option");
    const double t = opt.maturity;
    const double k = opt.strike;
    const auto integrals =
        integrate_vectorized(rule, [&](double u) { return integrand_block(p, m, opt, u); });
    detail::count(counter, 2);
    const double disc = m.discount(t);
    return 0.5 * (m.spot - disc * k) +
           disc / std::numbers::pi * (integrals[0] - k * integrals[1]);
}

/// European put from the call at the same strike via put-call parity.
inline double price_put(const HestonParams& p, const MarketContext& m, const OptionSpec& opt,
                        const QuadratureRule& rule = default_rule(),
                        EvalCounter* counter = nullptr) {
    if (opt.type != OptionType::Put) throw DomainError("price_put needs a put option");
    const OptionSpec call{opt.strike, opt.maturity, OptionType::Call};
    const double c = price_call(p, m, call, rule, counter);
    return c - m.spot + opt.strike * m.discount(opt.maturity);
}

inline double price(const HestonParams& p, const MarketContext& m, const OptionSpec& opt,
                    const QuadratureRule& rule = default_rule(), EvalCounter* counter = nullptr) {
    return opt.type == OptionType::Call ? price_call(p, m, opt, rule, counter)
                                        : price_put(p, m, opt, rule, counter);
}

/// Call or put priced with an explicitly chosen representation of the
/// characteristic function. The discontinuous forms are only meant for
/// comparisons; price() always uses the continuous one.
inline double price_with(Representation rep, const HestonParams& p, const MarketContext& m,
                         const OptionSpec& opt, const QuadratureRule& rule = default_rule()) {
    if (rep == Representation::Cui) return price(p, m, opt, rule);
    const double t = opt.maturity;
    const double k = opt.strike;
    const double log_k = std::log(k);
    const auto integrals = integrate_vectorized(rule, [&](double u) {
        const cplx kernel = detail::strike_kernel(u, log_k);
        return std::array<double, 2>{(kernel * char_fn(rep, p, m, cplx{u, -1.0}, t)).real(),
                                     (kernel * char_fn(rep, p, m, cplx{u, 0.0}, t)).real()};
    });
    const double disc = m.discount(t);
    const double call =
        0.5 * (m.spot - disc * k) + disc / std::numbers::pi * (integrals[0] - k * integrals[1]);
    return opt.type == OptionType::Call ? call : call - m.spot + k * disc;
}

}  // namespace heston
