#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "heston/errors.hpp"
#include "heston/gradient.hpp"
#include "heston/params.hpp"
#include "heston/pricer.hpp"
#include "heston/quadrature.hpp"

namespace heston {

using ParamVector = Eigen::Matrix<double, 5, 1>;
using Matrix5 = Eigen::Matrix<double, 5, 5>;

inline ParamVector to_vector(const HestonParams& p) {
    const auto a = p.to_array();
    return ParamVector{a[0], a[1], a[2], a[3], a[4]};
}

inline HestonParams to_params(const ParamVector& v) {
    return HestonParams::from_array({v[0], v[1], v[2], v[3], v[4]});
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

using Bounds = std::array<Interval, kNumParams>;

/// Parameter box used for randomised tests and the optional bounded mode,
/// in [v0, v_bar, rho, kappa, sigma] order.
inline constexpr Bounds kReasonableBounds = {{{0.05, 0.95},
                                              {0.05, 0.95},
                                              {-0.90, -0.10},
                                              {0.50, 5.00},
                                              {0.05, 0.95}}};

/// Quantity compared against eps1. SquaredNorm is the convention of the
/// levmar package (its reported error is ||e||^2); Norm compares ||r|| itself.
enum class ResidualTest { SquaredNorm, Norm };

inline std::string_view to_string(ResidualTest t) {
    return t == ResidualTest::Norm ? "norm" : "squared";
}

struct LmOptions {
    double tau = 1e-3;
    double eps1 = 1e-10;  // residual_measure(r) <= eps1
    double eps2 = 1e-10;  // ||J r||_inf <= eps2
    double eps3 = 1e-10;  // ||dtheta|| <= eps3 ||theta||
    std::size_t max_iterations = 100;
    std::optional<Bounds> bounds;
    // Keep mu and nu unchanged after an accepted step instead of the
    // gain-ratio update.
    bool strict_paper = false;
    ResidualTest residual_test = ResidualTest::SquaredNorm;
    QuadratureRule rule = default_rule();

    void validate() const {
        if (!(tau > 0.0 && eps1 > 0.0 && eps2 > 0.0 && eps3 > 0.0))
            throw DomainError("LM tolerances and tau must be positive");
        if (bounds) {
            for (const auto& b : *bounds)
                if (!(b.hi > b.lo)) throw DomainError("LM bounds must have positive width");
        }
    }
};

enum class StopReason { Residual, Gradient, Step, MaxIter };

inline std::string_view to_string(StopReason s) {
    switch (s) {
        case StopReason::Residual: return "RESIDUAL";
        case StopReason::Gradient: return "GRADIENT";
        case StopReason::Step: return "STEP";
        case StopReason::MaxIter: return "MAX_ITER";
    }
    return "?";
}

inline StopReason stop_reason_from_string(std::string_view s) {
    if (s == "RESIDUAL") return StopReason::Residual;
    if (s == "GRADIENT") return StopReason::Gradient;
    if (s == "STEP") return StopReason::Step;
    if (s == "MAX_ITER") return StopReason::MaxIter;
    throw FormatError("unknown stop reason '" + std::string(s) + "'");
}

/// One trial point of the iteration. The first entry is the initial guess.
/// `evaluated` is false for trials that were never priced (outside the hard
/// domain, or the solve that triggered the step-size stop).
struct TraceEntry {
    std::array<double, kNumParams> theta{};
    double residual_norm = std::numeric_limits<double>::quiet_NaN();
    double mu = 0.0;
    bool accepted = false;
    bool evaluated = false;
};

struct CalibrationReport {
    HestonParams theta_final{0.1, 0.1, 0.0, 1.0, 0.1};
    double initial_residual_norm = 0.0;
    double residual_norm = 0.0;
    // ||r||^2, the error measure levmar reports and tests against eps1 by default
    double squared_residual_norm = 0.0;
    // ||J r||_inf with the most recently evaluated Jacobian and the final residual
    double grad_inf_norm = 0.0;
    double last_step_norm = 0.0;
    StopReason stop_reason = StopReason::MaxIter;
    std::size_t iterations = 0;
    std::size_t n_price_evals = 0;
    std::size_t n_gradient_evals = 0;
    std::size_t n_linear_solves = 0;
    std::vector<TraceEntry> trace;
    double wall_time = 0.0;
};

struct Residuals {
    Eigen::VectorXd r;
    double f = 0.0;  // ||r||^2 / 2
};

/// r_i = model price - market price, in chain order.
inline Residuals residual_vector(const HestonParams& p, const QuoteChain& chain,
                                 const QuadratureRule& rule = default_rule()) {
    Residuals out;
    out.r.resize(static_cast<Eigen::Index>(chain.size()));
    for (std::size_t i = 0; i < chain.size(); ++i) {
        const auto& q = chain.quotes[i];
        try {
            out.r[static_cast<Eigen::Index>(i)] = price(p, chain.market, q.option, rule) -
                                                  q.market_price;
        } catch (const EvaluationError& e) {
            throw EvaluationError("pricing quote " + std::to_string(i) + ": " + e.what());
        }
    }
    out.f = 0.5 * out.r.squaredNorm();
    return out;
}

struct LmState {
    double mu = 1.0;
    double nu = 2.0;
    ParamVector theta = ParamVector::Zero();
    Eigen::VectorXd r;
    Jacobian J;
};

/// Solve (J J^T + mu I) dtheta = -J r by pivoted LDL^T.
inline ParamVector lm_step(const LmState& s) {
    if (!(s.mu > 0.0)) throw DomainError("lm_step requires mu > 0");
    const Matrix5 a = s.J * s.J.transpose() + s.mu * Matrix5::Identity();
    const ParamVector g = s.J * s.r;
    const Eigen::LDLT<Matrix5> ldlt(a);
    if (ldlt.info() != Eigen::Success) throw NoSolutionError("lm_step: factorization failed");
    const ParamVector step = ldlt.solve(-g);
    if (!step.allFinite()) throw NoSolutionError("lm_step: singular system");
    return step;
}

struct GaussNewtonHessian {
    Matrix5 H;
    double condition = 0.0;  // +inf when J is rank deficient
    bool rank_deficient = false;
};

/// H = J J^T and its 2-norm condition number (s_max / s_min)^2 from the
/// singular values of J.
inline GaussNewtonHessian gauss_newton_hessian(const Jacobian& J) {
    GaussNewtonHessian out;
    out.H = J * J.transpose();
    const Eigen::MatrixXd jm = J;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jm);
    const auto& s = svd.singularValues();
    const double smax = s.size() ? s.maxCoeff() : 0.0;
    const double smin = s.size() == 5 ? s.minCoeff() : 0.0;
    const double floor = smax * std::numeric_limits<double>::epsilon() *
                         static_cast<double>(std::max<Eigen::Index>(J.cols(), 5));
    if (!(smin > floor)) {
        out.rank_deficient = true;
        out.condition = std::numeric_limits<double>::infinity();
    } else {
        out.condition = (smax / smin) * (smax / smin);
    }
    return out;
}

namespace detail {

// Trial points are only priced inside this domain.
inline bool inside_hard_domain(const ParamVector& v) {
    constexpr double kFloor = 1e-8;
    if (!v.allFinite()) return false;
    return v[0] >= kFloor && v[1] >= kFloor && std::abs(v[2]) <= 0.999 && v[3] >= kFloor &&
           v[4] >= kFloor;
}

inline ParamVector project(const ParamVector& v, const std::optional<Bounds>& bounds) {
    if (!bounds) return v;
    ParamVector out = v;
    for (Eigen::Index j = 0; j < 5; ++j)
        out[j] = std::clamp(v[j], (*bounds)[static_cast<std::size_t>(j)].lo,
                            (*bounds)[static_cast<std::size_t>(j)].hi);
    return out;
}

inline std::array<double, kNumParams> to_array(const ParamVector& v) {
    return {v[0], v[1], v[2], v[3], v[4]};
}

}  // namespace detail

/// Levenberg-Marquardt fit of the model to the chain's prices.
///
/// Each outer iteration solves the damped normal equations, prices the trial
/// point and accepts it iff both the predicted reduction
/// dL = dtheta^T (mu dtheta - J r) and the actual reduction
/// dF = ||r_k|| - ||r_{k+1}|| are positive. Rejections raise mu by nu and
/// double nu. Accepted steps shrink mu by max(1/3, 1 - (2 rho - 1)^3) with the
/// gain ratio rho (unless strict_paper is set).
inline CalibrationReport calibrate(const QuoteChain& chain, const HestonParams& theta0,
                                   const LmOptions& opts = {}) {
    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();
    chain.validate();
    opts.validate();
    if (opts.bounds) {
        const auto a = theta0.to_array();
        for (std::size_t j = 0; j < kNumParams; ++j)
            if (a[j] < (*opts.bounds)[j].lo || a[j] > (*opts.bounds)[j].hi)
                throw DomainError("initial guess outside the bounds");
    }

    CalibrationReport rep;
    LmState s;
    s.theta = to_vector(theta0);

    Residuals res = residual_vector(theta0, chain, opts.rule);
    ++rep.n_price_evals;
    s.r = res.r;
    double r_norm = s.r.norm();
    rep.initial_residual_norm = r_norm;
    rep.trace.push_back({detail::to_array(s.theta), r_norm, 0.0, true, true});

    s.J = jacobian(theta0, chain, opts.rule);
    ++rep.n_gradient_evals;
    double grad_inf = (s.J * s.r).lpNorm<Eigen::Infinity>();

    auto finish = [&](StopReason why) {
        rep.stop_reason = why;
        rep.theta_final = to_params(s.theta);
        rep.residual_norm = r_norm;
        rep.squared_residual_norm = r_norm * r_norm;
        rep.grad_inf_norm = grad_inf;
        rep.wall_time = std::chrono::duration<double>(clock::now() - t_start).count();
        return rep;
    };

    auto residual_small = [&] {
        const double m = opts.residual_test == ResidualTest::Norm ? r_norm : r_norm * r_norm;
        return m <= opts.eps1;
    };

    if (residual_small()) return finish(StopReason::Residual);
    if (grad_inf <= opts.eps2) return finish(StopReason::Gradient);

    s.mu = opts.tau * (s.J * s.J.transpose()).diagonal().maxCoeff();
    s.nu = 2.0;
    if (!(s.mu > 0.0)) s.mu = opts.tau;

    while (rep.iterations < opts.max_iterations) {
        // inner loop: re-solve with a larger damping until a step is accepted
        for (;;) {
            if (!std::isfinite(s.mu)) return finish(StopReason::Step);
            const ParamVector step = lm_step(s);
            ++rep.n_linear_solves;
            const ParamVector trial = detail::project(s.theta + step, opts.bounds);
            const ParamVector applied = trial - s.theta;
            rep.last_step_norm = applied.norm();
            if (rep.last_step_norm <= opts.eps3 * s.theta.norm()) {
                rep.trace.push_back({detail::to_array(trial), std::numeric_limits<double>::quiet_NaN(),
                                     s.mu, false, false});
                return finish(StopReason::Step);
            }

            const ParamVector g = s.J * s.r;
            const double dL = applied.dot(s.mu * applied - g);

            bool accepted = false;
            TraceEntry entry{detail::to_array(trial), std::numeric_limits<double>::quiet_NaN(),
                             s.mu, false, false};
            if (detail::inside_hard_domain(trial)) {
                const HestonParams trial_params = to_params(trial);
                Residuals trial_res = residual_vector(trial_params, chain, opts.rule);
                ++rep.n_price_evals;
                const double trial_norm = trial_res.r.norm();
                entry.evaluated = true;
                entry.residual_norm = trial_norm;
                const double dF = r_norm - trial_norm;
                if (dL > 0.0 && dF > 0.0) {
                    accepted = true;
                    entry.accepted = true;
                    if (!opts.strict_paper) {
                        const double gain =
                            (r_norm * r_norm - trial_norm * trial_norm) / dL;
                        const double c = 2.0 * gain - 1.0;
                        s.mu *= std::max(1.0 / 3.0, 1.0 - c * c * c);
                        s.nu = 2.0;
                    }
                    s.theta = trial;
                    s.r = std::move(trial_res.r);
                    r_norm = trial_norm;
                }
            }
            rep.trace.push_back(entry);
            if (accepted) break;
            s.mu *= s.nu;
            s.nu *= 2.0;
        }
        ++rep.iterations;
        if (residual_small()) {
            grad_inf = (s.J * s.r).lpNorm<Eigen::Infinity>();
            return finish(StopReason::Residual);
        }
        s.J = jacobian(to_params(s.theta), chain, opts.rule);
        ++rep.n_gradient_evals;
        grad_inf = (s.J * s.r).lpNorm<Eigen::Infinity>();
        if (grad_inf <= opts.eps2) return finish(StopReason::Gradient);
    }
    return finish(StopReason::MaxIter);
}

}  // namespace heston
