#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "heston/errors.hpp"

namespace heston {

enum class RuleKind { GaussLegendre, Trapezoid };

inline std::string_view to_string(RuleKind k) {
    return k == RuleKind::GaussLegendre ? "gl" : "tr";
}

/// Nodes and weights for integrating over the truncated half-line (0, u_max].
///
/// Rules are immutable once built; build them once and share them.
class QuadratureRule {
public:
    QuadratureRule(RuleKind kind, double u_max, std::vector<double> nodes,
                   std::vector<double> weights, std::vector<double> ref_nodes = {},
                   std::vector<double> ref_weights = {})
        : kind_(kind),
          u_max_(u_max),
          nodes_(std::move(nodes)),
          weights_(std::move(weights)),
          ref_nodes_(std::move(ref_nodes)),
          ref_weights_(std::move(ref_weights)) {}

    [[nodiscard]] RuleKind kind() const { return kind_; }
    [[nodiscard]] double u_max() const { return u_max_; }
    [[nodiscard]] std::size_t size() const { return nodes_.size(); }
    [[nodiscard]] const std::vector<double>& nodes() const { return nodes_; }
    [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
    // Gauss-Legendre only: the rule on [-1, 1] before the affine map.
    [[nodiscard]] const std::vector<double>& reference_nodes() const { return ref_nodes_; }
    [[nodiscard]] const std::vector<double>& reference_weights() const { return ref_weights_; }

private:
    RuleKind kind_;
    double u_max_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
    std::vector<double> ref_nodes_;
    std::vector<double> ref_weights_;
};

/// N-point Gauss-Legendre rule mapped from [-1, 1] onto [0, u_max].
/// Nodes come from Newton iteration on P_N started at the Chebyshev-like guess
/// cos(pi (i - 1/4) / (N + 1/2)); only half are computed and mirrored so the
/// reference rule is exactly symmetric.
inline QuadratureRule gauss_legendre_rule(std::size_t n_nodes, double u_max) {
    if (n_nodes < 2) throw DomainError("gauss_legendre_rule needs at least 2 nodes");
    if (!(u_max > 0.0)) throw DomainError("gauss_legendre_rule needs u_max > 0");

    const std::size_t n = n_nodes;
    std::vector<double> x(n);
    std::vector<double> w(n);
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 1; i <= half; ++i) {
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) - 0.25) /
                            (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0;
            double p1 = z;
            for (std::size_t k = 2; k <= n; ++k) {
                const double kk = static_cast<double>(k);
                const double p2 = ((2.0 * kk - 1.0) * z * p1 - (kk - 1.0) * p0) / kk;
                p0 = p1;
                p1 = p2;
            }
            // P_N'(z) from P_N and P_{N-1}
            dp = static_cast<double>(n) * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) <= 1e-15) break;
        }
        // recompute the derivative at the converged root for the weight
        {
            double p0 = 1.0;
            double p1 = z;
            for (std::size_t k = 2; k <= n; ++k) {
                const double kk = static_cast<double>(k);
                const double p2 = ((2.0 * kk - 1.0) * z * p1 - (kk - 1.0) * p0) / kk;
                p0 = p1;
                p1 = p2;
            }
            dp = static_cast<double>(n) * (z * p1 - p0) / (z * z - 1.0);
        }
        const double wi = 2.0 / ((1.0 - z * z) * dp * dp);
        // ascending order: negative root first
        x[i - 1] = -z;
        x[n - i] = z;
        w[i - 1] = wi;
        w[n - i] = wi;
    }
    if (n % 2 == 1) x[half - 1] = 0.0;

    std::vector<double> nodes(n);
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) {
        nodes[i] = 0.5 * u_max * (x[i] + 1.0);
        weights[i] = 0.5 * u_max * w[i];
    }
    return {RuleKind::GaussLegendre, u_max, std::move(nodes), std::move(weights), std::move(x),
            std::move(w)};
}

// The pricing integrands have a removable singularity at 0; the trapezoid rule
// starts just above it.
inline constexpr double kTrapezoidStart = 1e-8;

/// Composite trapezoid rule on [1e-8, u_max] with n_nodes equispaced nodes.
inline QuadratureRule trapezoid_rule(std::size_t n_nodes, double u_max) {
    if (n_nodes < 2) throw DomainError("trapezoid_rule needs at least 2 nodes");
    if (!(u_max > kTrapezoidStart)) throw DomainError("trapezoid_rule needs u_max > 1e-8");
    const double h = (u_max - kTrapezoidStart) / static_cast<double>(n_nodes - 1);
    std::vector<double> nodes(n_nodes);
    std::vector<double> weights(n_nodes, h);
    for (std::size_t i = 0; i < n_nodes; ++i)
        nodes[i] = kTrapezoidStart + h * static_cast<double>(i);
    nodes.back() = u_max;
    weights.front() = 0.5 * h;
    weights.back() = 0.5 * h;
    return {RuleKind::Trapezoid, u_max, std::move(nodes), std::move(weights)};
}

inline QuadratureRule make_rule(RuleKind kind, std::size_t n_nodes, double u_max) {
    return kind == RuleKind::GaussLegendre ? gauss_legendre_rule(n_nodes, u_max)
                                           : trapezoid_rule(n_nodes, u_max);
}

inline constexpr std::size_t kDefaultNodes = 64;
inline constexpr double kDefaultUMax = 200.0;

inline const QuadratureRule& default_rule() {
    static const QuadratureRule rule = gauss_legendre_rule(kDefaultNodes, kDefaultUMax);
    return rule;
}

/// Sum_k w_k * block(u_k) componentwise. `block` is invoked exactly once per
/// node and must return a fixed-size indexable container of doubles
/// (std::array or std::vector). Non-finite values raise EvaluationError
/// naming the node.
template <class Block>
auto integrate_vectorized(const QuadratureRule& rule, Block&& block) {
    using Result = std::remove_cvref_t<std::invoke_result_t<Block&, double>>;
    const auto& u = rule.nodes();
    const auto& w = rule.weights();
    Result acc{};
    bool first = true;
    for (std::size_t k = 0; k < u.size(); ++k) {
        const Result values = block(u[k]);
        if (first) {
            acc = values;
            for (auto& a : acc) a = 0.0;
            first = false;
        }
        for (std::size_t j = 0; j < values.size(); ++j) {
            if (!std::isfinite(values[j]))
                throw EvaluationError("non-finite integrand component " + std::to_string(j) +
                                      " at node " + std::to_string(k) +
                                      " (u=" + std::to_string(u[k]) + ")");
            acc[j] += w[k] * values[j];
        }
    }
    return acc;
}

}  // namespace heston
