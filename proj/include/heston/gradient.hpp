#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "heston/charfn.hpp"
#include "heston/params.hpp"
#include "heston/pricer.hpp"
#include "heston/quadrature.hpp"

namespace heston {

/// dC/dtheta in the order [v0, v_bar, rho, kappa, sigma].
using GradientVector = std::array<double, kNumParams>;

/// 5 x n matrix; column i is the price gradient of quote i.
using Jacobian = Eigen::Matrix<double, 5, Eigen::Dynamic>;

/// Partial derivatives shared by the gradient components.
///
/// B = d e^{kappa t/2} / A2 is never formed (it overflows at long maturities);
/// its derivatives are carried as logarithmic derivatives (dB/dx) / B.
/// Fragments of A1 and A2 carry the same exp(log_scale) factor as the terms.
struct HFragments {
    cplx dd_drho;
    cplx dA2_drho;
    cplx dlogB_drho;
    cplx dA1_drho;
    cplx dA_drho;
    cplx dA_dkappa;
    cplx dlogB_dkappa;
    cplx dd_dsigma;
    cplx dA1_dsigma;
    cplx dA2_dsigma;
    cplx dA_dsigma;
    cplx dlogB_dsigma;
};

inline HFragments h_fragments(const HestonParams& p, const CharFnTerms& k) {
    const double sigma = p.sigma();
    const double rho = p.rho();
    const double t = k.t;
    const cplx iu = kI * k.u;
    const cplx& xi = k.xi;
    const cplx& d = k.d;

    HFragments f;
    f.dd_drho = -xi * sigma * iu / d;
    f.dA2_drho = -sigma * iu * (2.0 + t * xi) / (2.0 * d) * (xi * k.cosh_half + d * k.sinh_half);
    f.dlogB_drho = f.dd_drho / d - f.dA2_drho / k.A2;
    f.dA1_drho = -iu * k.uu * t * xi * sigma / (2.0 * d) * k.cosh_half;
    f.dA_drho = (f.dA1_drho - k.A * f.dA2_drho) / k.A2;

    // i / (sigma u) = -1 / (sigma i u)
    const cplx to_kappa = -1.0 / (sigma * iu);
    f.dA_dkappa = to_kappa * f.dA_drho;
    f.dlogB_dkappa = to_kappa * f.dlogB_drho + 0.5 * t;

    f.dd_dsigma = (rho / sigma - 1.0 / xi) * f.dd_drho + sigma * k.u * k.u / d;
    f.dA1_dsigma = k.uu * t / 2.0 * f.dd_dsigma * k.cosh_half;
    f.dA2_dsigma = rho / sigma * f.dA2_drho - (2.0 + t * xi) / (iu * t * xi) * f.dA1_drho +
                   sigma * t * k.A1 / 2.0;
    f.dA_dsigma = (f.dA1_dsigma - k.A * f.dA2_dsigma) / k.A2;
    f.dlogB_dsigma = f.dd_dsigma / d - f.dA2_dsigma / k.A2;
    return f;
}

/// h(u) with grad phi = phi * h, from precomputed terms.
inline std::array<cplx, kNumParams> h_vector(const HestonParams& p, const CharFnTerms& k) {
    // phi(0) = 1 for every theta, so its gradient vanishes there.
    if (k.u == cplx{0.0, 0.0}) return {};
    const double v0 = p.v0();
    const double vb = p.v_bar();
    const double kappa = p.kappa();
    const double sigma = p.sigma();
    const double rho = p.rho();
    const double sigma2 = sigma * sigma;
    const double t = k.t;
    const cplx iu = kI * k.u;
    const HFragments f = h_fragments(p, k);

    // The -t(...)rho i u / sigma terms of the second and fourth components are
    // folded into D_reduced = D - sigma rho i u t / 2.
    std::array<cplx, kNumParams> h;
    h[0] = -k.A;
    h[1] = (2.0 * kappa / sigma2) * k.D_reduced;
    h[2] = -v0 * f.dA_drho + (2.0 * kappa * vb / sigma2) * f.dlogB_drho -
           t * kappa * vb * iu / sigma;
    h[3] = v0 / (sigma * iu) * f.dA_drho + (2.0 * vb / sigma2) * k.D_reduced +
           (2.0 * kappa * vb / sigma2) * f.dlogB_dkappa;
    h[4] = -v0 * f.dA_dsigma - (4.0 * kappa * vb / (sigma2 * sigma)) * k.D_reduced +
           (2.0 * kappa * vb / sigma2) * f.dlogB_dsigma - t * kappa * vb * rho * iu / sigma2;
    return h;
}

inline std::array<cplx, kNumParams> h_vector(const HestonParams& p, cplx u, double t) {
    return h_vector(p, cf_terms(p, u, t));
}

namespace detail {

// Guard for the 1/u factors in h when a rule puts a node at (or next to) zero.
inline constexpr double kMinGradientNode = 1e-8;

// Per-node values of the two gradient integrals: [0..4] shifted (u - i), [5..9] plain (u).
inline std::array<double, 2 * kNumParams> gradient_node(const HestonParams& p,
                                                       const MarketContext& m, double t,
                                                       double log_k, double u) {
    u = std::max(u, kMinGradientNode);
    const cplx kernel = strike_kernel(u, log_k);
    const CharFnTerms ks = cf_terms(p, cplx{u, -1.0}, t);
    const CharFnTerms kp = cf_terms(p, cplx{u, 0.0}, t);
    const cplx ws = kernel * cui_char_fn(p, m, ks);
    const cplx wp = kernel * cui_char_fn(p, m, kp);
    const auto hs = h_vector(p, ks);
    const auto hp = h_vector(p, kp);
    std::array<double, 2 * kNumParams> out;
    for (std::size_t j = 0; j < kNumParams; ++j) {
        out[j] = (ws * hs[j]).real();
        out[kNumParams + j] = (wp * hp[j]).real();
    }
    return out;
}

}  // namespace detail

/// The six integrands of the combined price-and-gradient formula at real u > 0:
/// index 0 is the price integrand Re(k(u)[phi(u-i) - K phi(u)]), indices 1..5 the
/// gradient ones Re(k(u)[phi(u-i) h_j(u-i) - K phi(u) h_j(u)]), k(u) = e^{-iu ln K}/(iu).
/// One characteristic-function evaluation (at u and u - i) feeds all six.
inline std::array<double, 1 + kNumParams> price_gradient_integrands(const HestonParams& p,
                                                                   const MarketContext& m,
                                                                   const OptionSpec& opt,
                                                                   double u) {
    const double k = opt.strike;
    const double t = opt.maturity;
    u = std::max(u, detail::kMinGradientNode);
    const cplx kernel = detail::strike_kernel(u, std::log(k));
    const CharFnTerms ks = cf_terms(p, cplx{u, -1.0}, t);
    const CharFnTerms kp = cf_terms(p, cplx{u, 0.0}, t);
    const cplx ws = kernel * cui_char_fn(p, m, ks);
    const cplx wp = kernel * cui_char_fn(p, m, kp);
    const auto hs = h_vector(p, ks);
    const auto hp = h_vector(p, kp);
    std::array<double, 1 + kNumParams> out;
    out[0] = (ws - k * wp).real();
    for (std::size_t j = 0; j < kNumParams; ++j)
        out[1 + j] = (ws * hs[j] - k * wp * hp[j]).real();
    return out;
}

/// Analytical dC/dtheta via the vectorised quadrature: per node, phi and h are
/// computed once and feed all five components of both integrals.
/// Puts share the call gradient (the parity term does not depend on theta).
inline GradientVector price_gradient(const HestonParams& p, const MarketContext& m,
                                     const OptionSpec& opt,
                                     const QuadratureRule& rule = default_rule(),
                                     EvalCounter* counter = nullptr) {
    const double t = opt.maturity;
    const double k = opt.strike;
    const double log_k = std::log(k);
    const auto integrals = integrate_vectorized(
        rule, [&](double u) { return detail::gradient_node(p, m, t, log_k, u); });
    detail::count(counter, 2);
    const double scale = m.discount(t) / std::numbers::pi;
    GradientVector g;
    for (std::size_t j = 0; j < kNumParams; ++j)
        g[j] = scale * (integrals[j] - k * integrals[kNumParams + j]);
    return g;
}

inline constexpr double kDefaultFdStep = 1e-4;

/// Central differences with the same increment on every parameter.
/// Throws DomainError when a bumped parameter leaves the valid domain.
inline GradientVector fd_gradient(const HestonParams& p, const MarketContext& m,
                                  const OptionSpec& opt, double epsilon = kDefaultFdStep,
                                  const QuadratureRule& rule = default_rule(),
                                  EvalCounter* counter = nullptr) {
    if (!(epsilon > 0.0)) throw DomainError("fd_gradient requires epsilon > 0");
    GradientVector g;
    const auto theta = p.to_array();
    for (std::size_t j = 0; j < kNumParams; ++j) {
        auto up = theta;
        auto dn = theta;
        up[j] += epsilon;
        dn[j] -= epsilon;
        if (!HestonParams::is_valid(up) || !HestonParams::is_valid(dn))
            throw DomainError("fd_gradient: bumping " + std::string(kParamNames[j]) +
                              " leaves the parameter domain");
        const double cu = price(HestonParams::from_array(up), m, opt, rule, counter);
        const double cd = price(HestonParams::from_array(dn), m, opt, rule, counter);
        g[j] = (cu - cd) / (2.0 * epsilon);
    }
    return g;
}

inline Jacobian jacobian(const HestonParams& p, const QuoteChain& chain,
                         const QuadratureRule& rule = default_rule(),
                         EvalCounter* counter = nullptr) {
    Jacobian jac(5, static_cast<Eigen::Index>(chain.size()));
    for (std::size_t i = 0; i < chain.size(); ++i) {
        const auto g = price_gradient(p, chain.market, chain.quotes[i].option, rule, counter);
        for (std::size_t j = 0; j < kNumParams; ++j)
            jac(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = g[j];
    }
    return jac;
}

inline Jacobian fd_jacobian(const HestonParams& p, const QuoteChain& chain,
                            double epsilon = kDefaultFdStep,
                            const QuadratureRule& rule = default_rule(),
                            EvalCounter* counter = nullptr) {
    Jacobian jac(5, static_cast<Eigen::Index>(chain.size()));
    for (std::size_t i = 0; i < chain.size(); ++i) {
        const auto g = fd_gradient(p, chain.market, chain.quotes[i].option, epsilon, rule, counter);
        for (std::size_t j = 0; j < kNumParams; ++j)
            jac(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = g[j];
    }
    return jac;
}

/// Smallest u on a 0.5-step scan from which every price and gradient integrand
/// (both the shifted and the plain parts) stays below `tol` over [u, u + 50].
struct TruncationBound {
    double u_bar = 0.0;
    bool capped = false;  // no such u <= 200 exists; u_bar is the cap
};

inline constexpr double kTruncationScanStep = 0.5;
inline constexpr double kTruncationTail = 50.0;
inline constexpr double kTruncationCap = 200.0;

inline TruncationBound truncation_bound(const HestonParams& p, const MarketContext& m,
                                        const OptionSpec& opt, double tol = 1e-8) {
    if (!(tol > 0.0)) throw DomainError("truncation_bound requires tol > 0");
    const double t = opt.maturity;
    const double log_k = std::log(opt.strike);
    auto below = [&](double u) {
        const auto g = detail::gradient_node(p, m, t, log_k, u);
        const auto pr = integrand_block(p, m, opt, u);
        for (double v : g)
            if (!(std::abs(v) <= tol)) return false;
        return std::abs(pr[0]) <= tol && std::abs(pr[1]) <= tol;
    };
    // Scan downward from the end of the verification window so each grid
    // point is evaluated once: run counts consecutive good points ending at u.
    const double step = kTruncationScanStep;
    const auto n_points = static_cast<std::size_t>((kTruncationCap + kTruncationTail) / step);
    const auto tail_points = static_cast<std::size_t>(kTruncationTail / step);
    std::vector<bool> ok(n_points + 1);
    for (std::size_t i = 1; i <= n_points; ++i) ok[i] = below(step * static_cast<double>(i));
    // good[i]: all points in [u_i, u_i + tail] are below tol
    std::size_t run = 0;
    std::vector<bool> good(n_points + 1, false);
    for (std::size_t i = n_points; i >= 1; --i) {
        run = ok[i] ? run + 1 : 0;
        good[i] = run >= tail_points + 1;
    }
    const auto cap_index = static_cast<std::size_t>(kTruncationCap / step);
    for (std::size_t i = 1; i <= cap_index; ++i)
        if (good[i]) return {step * static_cast<double>(i), false};
    return {kTruncationCap, true};
}

}  // namespace heston
