#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "heston/errors.hpp"
#include "heston/params.hpp"

namespace heston {

using cplx = std::complex<double>;

inline constexpr cplx kI{0.0, 1.0};

/// The four algebraically equivalent forms of the Heston characteristic function.
///
///  - Heston:    the original form, with g1 = (xi + d) / (xi - d). Discontinuous.
///  - Schoutens: the "little trap" form with g2 = 1 / g1. Continuous.
///  - DelBano:   the hyperbolic form exp(...) * B^(2 kappa v_bar / sigma^2), with the
///               -t kappa v_bar rho i u / sigma correction. Discontinuous.
///  - Cui:       the hyperbolic form with log B replaced by the rearranged D.
///               Continuous and the one all pricing and gradients use.
enum class Representation { Heston, Schoutens, DelBano, Cui };

inline std::string_view to_string(Representation r) {
    switch (r) {
        case Representation::Heston: return "heston";
        case Representation::Schoutens: return "schoutens";
        case Representation::DelBano: return "delbano";
        case Representation::Cui: return "cui";
    }
    return "?";
}

inline Representation representation_from_string(std::string_view s) {
    if (s == "heston") return Representation::Heston;
    if (s == "schoutens") return Representation::Schoutens;
    if (s == "delbano") return Representation::DelBano;
    if (s == "cui") return Representation::Cui;
    throw DomainError("unknown representation '" + std::string(s) + "'");
}

namespace detail {

// exp(z) - 1 without cancellation for small |z|.
inline cplx expm1(cplx z) {
    const double x = z.real();
    const double y = z.imag();
    const double em1 = std::expm1(x);
    const double s = std::sin(0.5 * y);
    return {em1 * std::cos(y) - 2.0 * s * s, (em1 + 1.0) * std::sin(y)};
}

// log(1 + z) without cancellation for small |z| (principal branch).
inline cplx log1p(cplx z) {
    const double x = z.real();
    const double y = z.imag();
    return {0.5 * std::log1p(2.0 * x + x * x + y * y), std::atan2(y, 1.0 + x)};
}

inline bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

}  // namespace detail

/// Intermediate complex quantities of the hyperbolic representation at one
/// frequency u and horizon t.
///
/// A1, A2, sinh_half and cosh_half carry a common real factor exp(log_scale);
/// log_scale is zero unless t * Re(d) > 50, in which case it is -Re(d) t / 2 so
/// nothing overflows. Ratios such as A = A1 / A2 are unaffected.
struct CharFnTerms {
    cplx u;
    double t = 0.0;
    cplx uu;           // u^2 + iu
    cplx xi;           // kappa - sigma rho i u
    cplx d;            // principal sqrt(xi^2 + sigma^2 (u^2 + iu))
    cplx d_minus_xi;   // d - xi, formed as sigma^2 (u^2 + iu) / (d + xi)
    cplx sinh_half;    // sinh(d t / 2), scaled
    cplx cosh_half;    // cosh(d t / 2), scaled
    cplx exp_minus_dt; // exp(-d t)
    cplx A1;
    cplx A2;
    cplx A;
    cplx D;            // log d + (kappa - d) t / 2 - log((d + xi)/2 + (d - xi)/2 e^{-dt})
    cplx D_reduced;    // D - sigma rho i u t / 2
    double log_scale = 0.0;
};

inline constexpr double kOverflowGuard = 50.0;

/// Evaluate the shared terms of the continuous representation.
/// Throws EvaluationError when any term is non-finite.
inline CharFnTerms cf_terms(const HestonParams& p, cplx u, double t) {
    if (!(t > 0.0)) throw DomainError("cf_terms requires t > 0");
    const double kappa = p.kappa();
    const double sigma = p.sigma();
    const double rho = p.rho();
    const double sigma2 = sigma * sigma;

    CharFnTerms r;
    r.u = u;
    r.t = t;
    const cplx iu = kI * u;
    r.uu = u * u + iu;
    r.xi = kappa - sigma * rho * iu;
    r.d = std::sqrt(r.xi * r.xi + sigma2 * r.uu);

    const cplx d_plus_xi = r.d + r.xi;
    if (std::norm(d_plus_xi) >= std::norm(r.d - r.xi))
        r.d_minus_xi = sigma2 * r.uu / d_plus_xi;
    else
        r.d_minus_xi = r.d - r.xi;

    const double re_dt = r.d.real() * t;
    const double im_half = 0.5 * r.d.imag() * t;
    cplx ep;  // e^{dt/2} * scale
    cplx em;  // e^{-dt/2} * scale
    if (re_dt > kOverflowGuard) {
        r.log_scale = -0.5 * re_dt;
        ep = std::polar(1.0, im_half);
        em = std::polar(std::exp(-re_dt), -im_half);
    } else {
        ep = std::exp(0.5 * r.d * t);
        em = std::exp(-0.5 * r.d * t);
    }
    r.cosh_half = 0.5 * (ep + em);
    r.sinh_half = 0.5 * (ep - em);
    r.exp_minus_dt = std::exp(-r.d * t);

    r.A1 = r.uu * r.sinh_half;
    r.A2 = r.d * r.cosh_half + r.xi * r.sinh_half;
    r.A = r.A1 / r.A2;

    // log d - log(bracket) = -log(1 + q); the log1p path keeps full relative
    // accuracy when bracket/d is close to 1 and |q| < 1/2 pins both logs to
    // the same branch.
    const cplx q = r.d_minus_xi / (2.0 * r.d) * detail::expm1(-r.d * t);
    if (std::abs(q) < 0.5) {
        r.D_reduced = -0.5 * r.d_minus_xi * t - detail::log1p(q);
    } else {
        const cplx bracket = 0.5 * d_plus_xi + 0.5 * r.d_minus_xi * r.exp_minus_dt;
        r.D_reduced = std::log(r.d) - 0.5 * r.d_minus_xi * t - std::log(bracket);
    }
    r.D = r.D_reduced + 0.5 * sigma * rho * iu * t;

    if (!detail::finite(r.A) || !detail::finite(r.D_reduced) || !detail::finite(r.A2))
        throw EvaluationError("characteristic function terms overflowed at u=(" +
                              std::to_string(u.real()) + "," + std::to_string(u.imag()) +
                              ") t=" + std::to_string(t));
    return r;
}

/// Log of the continuous characteristic function, given precomputed terms.
inline cplx cui_log_char_fn(const HestonParams& p, const MarketContext& m,
                            const CharFnTerms& terms) {
    const double sigma2 = p.sigma() * p.sigma();
    const cplx iu = kI * terms.u;
    // -t kappa v_bar rho i u / sigma + 2 kappa v_bar / sigma^2 D collapses onto D_reduced.
    return iu * (std::log(m.spot) + m.rate * terms.t) - p.v0() * terms.A +
           (2.0 * p.kappa() * p.v_bar() / sigma2) * terms.D_reduced;
}

inline cplx cui_char_fn(const HestonParams& p, const MarketContext& m, const CharFnTerms& terms) {
    return std::exp(cui_log_char_fn(p, m, terms));
}

namespace detail {

inline cplx heston_form(const HestonParams& p, const MarketContext& m, cplx u, double t) {
    const double sigma2 = p.sigma() * p.sigma();
    const cplx iu = kI * u;
    const cplx drift = iu * (std::log(m.spot) + m.rate * t);
    const cplx xi = p.kappa() - p.sigma() * p.rho() * iu;
    const cplx d = std::sqrt(xi * xi + sigma2 * (u * u + iu));
    if (xi - d == cplx{0.0, 0.0}) return std::exp(drift);
    const cplx g1 = (xi + d) / (xi - d);
    const cplx edt = std::exp(d * t);
    const cplx expo = drift +
                      p.kappa() * p.v_bar() / sigma2 *
                          ((xi + d) * t - 2.0 * std::log((1.0 - g1 * edt) / (1.0 - g1))) +
                      p.v0() / sigma2 * (xi + d) * (1.0 - edt) / (1.0 - g1 * edt);
    return std::exp(expo);
}

inline cplx schoutens_form(const HestonParams& p, const MarketContext& m, cplx u, double t) {
    const CharFnTerms k = cf_terms(p, u, t);
    const double sigma2 = p.sigma() * p.sigma();
    const cplx iu = kI * u;
    const cplx drift = iu * (std::log(m.spot) + m.rate * t);
    const cplx xi_minus_d = -k.d_minus_xi;
    const cplx g2 = xi_minus_d / (k.xi + k.d);
    const cplx e = k.exp_minus_dt;
    const cplx expo = drift +
                      p.kappa() * p.v_bar() / sigma2 *
                          (xi_minus_d * t - 2.0 * std::log((1.0 - g2 * e) / (1.0 - g2))) +
                      p.v0() / sigma2 * xi_minus_d * (1.0 - e) / (1.0 - g2 * e);
    return std::exp(expo);
}

inline cplx delbano_form(const HestonParams& p, const MarketContext& m, cplx u, double t) {
    const double sigma = p.sigma();
    const double sigma2 = sigma * sigma;
    const cplx iu = kI * u;
    const cplx drift = iu * (std::log(m.spot) + m.rate * t);
    const cplx xi = p.kappa() - sigma * p.rho() * iu;
    const cplx d = std::sqrt(xi * xi + sigma2 * (u * u + iu));
    const cplx sh = std::sinh(0.5 * d * t);
    const cplx ch = std::cosh(0.5 * d * t);
    const cplx a2 = d * ch + xi * sh;
    const cplx a = (u * u + iu) * sh / a2;
    const cplx b = d * std::exp(0.5 * p.kappa() * t) / a2;
    const double alpha = 2.0 * p.kappa() * p.v_bar() / sigma2;
    return std::exp(drift - t * p.kappa() * p.v_bar() * p.rho() * iu / sigma - p.v0() * a) *
           std::pow(b, alpha);
}

}  // namespace detail

/// phi(u, t) = E[exp(i u log S_t)] in the chosen representation. u may be complex.
inline cplx char_fn(Representation rep, const HestonParams& p, const MarketContext& m, cplx u,
                    double t) {
    if (!(t > 0.0)) throw DomainError("char_fn requires t > 0");
    cplx value;
    switch (rep) {
        case Representation::Cui: value = cui_char_fn(p, m, cf_terms(p, u, t)); break;
        case Representation::Schoutens: value = detail::schoutens_form(p, m, u, t); break;
        case Representation::Heston: value = detail::heston_form(p, m, u, t); break;
        case Representation::DelBano: value = detail::delbano_form(p, m, u, t); break;
    }
    if (!detail::finite(value))
        throw EvaluationError("characteristic function overflowed (" +
                              std::string(to_string(rep)) + ")");
    return value;
}

/// One sample of the A2 spiral: gamma(u) = A2 log log|A2| / |A2| and the two
/// forms of log A2 (principal log of A2 versus the rearranged form).
struct SpiralPoint {
    double u = 0.0;
    cplx gamma;
    cplx log_a2_principal;
    cplx log_a2_rearranged;
};

inline std::vector<SpiralPoint> spiral_diagnostic(const HestonParams& p, double t,
                                                  std::span<const double> u_grid) {
    std::vector<SpiralPoint> out;
    out.reserve(u_grid.size());
    double prev = -1.0;
    for (double u : u_grid) {
        if (!(u >= 0.0) || u <= prev)
            throw DomainError("spiral_diagnostic needs a strictly ascending non-negative grid");
        prev = u;
        const CharFnTerms k = cf_terms(p, cplx{u, 0.0}, t);
        SpiralPoint s;
        s.u = u;
        // A2 carries the real positive factor exp(log_scale); removing it from
        // the principal log leaves the principal log of the true A2.
        s.log_a2_principal = std::log(k.A2) - k.log_scale;
        s.log_a2_rearranged =
            0.5 * k.d * t + std::log(0.5 * (k.d + k.xi) + 0.5 * k.d_minus_xi * k.exp_minus_dt);
        const double log_abs = s.log_a2_principal.real();
        if (!(log_abs > 1.0))
            throw DomainError("spiral_diagnostic requires |A2| > e (u=" + std::to_string(u) + ")");
        s.gamma = std::polar(std::log(log_abs), s.log_a2_principal.imag());
        out.push_back(s);
    }
    return out;
}

/// Largest absolute change of the imaginary part between consecutive samples.
inline double max_phase_step(std::span<const cplx> logs) {
    double worst = 0.0;
    for (std::size_t i = 1; i < logs.size(); ++i)
        worst = std::max(worst, std::abs(logs[i].imag() - logs[i - 1].imag()));
    return worst;
}

/// Indices k where |f[k+1] - f[k]| exceeds `ratio` times the larger of the two
/// neighbouring increments (the local secant slope) plus an absolute floor.
/// Flags jump discontinuities on a uniform grid.
inline std::vector<std::size_t> find_jumps(std::span<const double> f, double ratio = 10.0,
                                           double abs_floor = 1e-12) {
    std::vector<std::size_t> jumps;
    if (f.size() < 4) return jumps;
    for (std::size_t k = 1; k + 2 < f.size(); ++k) {
        const double step = std::abs(f[k + 1] - f[k]);
        const double local = std::max(std::abs(f[k] - f[k - 1]), std::abs(f[k + 2] - f[k + 1]));
        if (step > ratio * local + abs_floor) jumps.push_back(k);
    }
    return jumps;
}

}  // namespace heston
