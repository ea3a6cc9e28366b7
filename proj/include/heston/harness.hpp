#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "heston/blackscholes.hpp"
#include "heston/calibrator.hpp"
#include "heston/errors.hpp"
#include "heston/gradient.hpp"
#include "heston/params.hpp"
#include "heston/pricer.hpp"
#include "heston/quadrature.hpp"

namespace heston {

struct SurfaceGrid {
    std::vector<int> maturities_days{30, 60, 90, 120, 150, 180, 252, 360};
    // negative deltas are puts
    std::vector<double> deltas{-0.10, -0.25, 0.50, 0.25, 0.10};

    [[nodiscard]] std::size_t size() const { return maturities_days.size() * deltas.size(); }
};

struct SurfacePoint {
    int maturity_days = 0;
    double delta = 0.0;
    double strike = 0.0;
    double price = 0.0;
    double implied_vol = 0.0;
    std::size_t fixed_point_iterations = 0;
    bool ok = false;
};

struct Surface {
    QuoteChain chain;                  // the points that resolved, in grid order
    std::vector<SurfacePoint> points;  // every grid point, flagged when unresolved
};

inline constexpr double kStrikeFixedPointTol = 1e-10;
inline constexpr std::size_t kStrikeFixedPointMaxIter = 200;

/// Resolves the strike whose spot delta, at the Heston-implied vol of that
/// same strike, equals `delta`: vol -> strike -> Heston price -> implied vol.
inline SurfacePoint resolve_delta_point(const HestonParams& p, const MarketContext& m,
                                        int maturity_days, double delta,
                                        const QuadratureRule& rule = default_rule()) {
    SurfacePoint pt;
    pt.maturity_days = maturity_days;
    pt.delta = delta;
    const double t = days_to_years(maturity_days);
    const OptionType type = delta < 0.0 ? OptionType::Put : OptionType::Call;
    double vol = std::sqrt(p.v0());
    double strike = bs::strike_from_delta(delta, vol, m.spot, m.rate, t, type);
    try {
        for (std::size_t it = 1; it <= kStrikeFixedPointMaxIter; ++it) {
            const double px = price(p, m, OptionSpec{strike, t, type}, rule);
            vol = bs::implied_vol(px, m.spot, m.rate, strike, t, type);
            if (!(vol > 0.0)) break;
            const double next = bs::strike_from_delta(delta, vol, m.spot, m.rate, t, type);
            pt.fixed_point_iterations = it;
            if (std::abs(next - strike) <= kStrikeFixedPointTol * std::max(1.0, strike)) {
                strike = next;
                pt.strike = strike;
                pt.price = price(p, m, OptionSpec{strike, t, type}, rule);
                pt.implied_vol = bs::implied_vol(pt.price, m.spot, m.rate, strike, t, type);
                pt.ok = pt.implied_vol > 0.0;
                return pt;
            }
            strike = next;
        }
    } catch (const NoSolutionError&) {
    } catch (const EvaluationError&) {
    }
    pt.strike = strike;
    pt.implied_vol = std::numeric_limits<double>::quiet_NaN();
    return pt;
}

inline Surface generate_surface(const HestonParams& theta_star, const MarketContext& m,
                                const SurfaceGrid& grid = {},
                                const QuadratureRule& rule = default_rule()) {
    Surface s{QuoteChain{m, {}}, {}};
    s.points.reserve(grid.size());
    for (int days : grid.maturities_days) {
        for (double delta : grid.deltas) {
            SurfacePoint pt = resolve_delta_point(theta_star, m, days, delta, rule);
            if (pt.ok) {
                const OptionType type = delta < 0.0 ? OptionType::Put : OptionType::Call;
                s.chain.quotes.push_back(
                    {OptionSpec{pt.strike, days_to_years(days), type}, pt.price, pt.implied_vol});
            }
            s.points.push_back(pt);
        }
    }
    return s;
}

/// Table-1 style test market: S0 = 1, r = 0.02.
inline MarketContext reference_market() { return MarketContext{1.0, 0.02}; }

inline HestonParams reference_params() {
    return HestonParams::from_table_order(3.0, 0.10, 0.25, -0.80, 0.08);
}

inline HestonParams representative_guess() {
    return HestonParams::from_table_order(1.20, 0.20, 0.30, -0.60, 0.20);
}

namespace detail {

inline std::mt19937_64 case_rng(std::uint64_t seed, std::uint64_t i, std::uint64_t j,
                                std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

inline HestonParams draw_in(std::mt19937_64& rng, const Bounds& box) {
    std::array<double, kNumParams> a{};
    for (std::size_t k = 0; k < kNumParams; ++k) {
        std::uniform_real_distribution<double> dist(box[k].lo, box[k].hi);
        a[k] = dist(rng);
    }
    return HestonParams::from_array(a);
}

}  // namespace detail

inline HestonParams draw_random_params(std::mt19937_64& rng) {
    return detail::draw_in(rng, kReasonableBounds);
}

inline HestonParams draw_random_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return draw_random_params(rng);
}

struct CaseResult {
    std::array<double, kNumParams> abs_deviation{};
    double residual_norm = 0.0;
    double squared_residual_norm = 0.0;
    std::size_t iterations = 0;
    std::size_t n_price_evals = 0;
    std::size_t n_gradient_evals = 0;
    std::size_t n_linear_solves = 0;
    double wall_time = 0.0;
    StopReason stop_reason = StopReason::MaxIter;
    bool completed = false;  // false when calibration threw
    bool success = false;
};

struct ValidationStats {
    std::size_t n_cases = 0;
    std::size_t n_success = 0;
    std::size_t n_failed_runs = 0;  // calibration raised an error
    std::array<double, kNumParams> mean_abs_deviation{};
    double mean_residual_norm = 0.0;
    double mean_squared_residual_norm = 0.0;
    double mean_iterations = 0.0;
    double mean_price_evals = 0.0;
    double mean_gradient_evals = 0.0;
    double mean_linear_solves = 0.0;
    double mean_wall_time = 0.0;
    std::array<std::size_t, 4> stop_counts{};  // indexed by StopReason

    [[nodiscard]] double success_rate() const {
        return n_cases ? static_cast<double>(n_success) / static_cast<double>(n_cases) : 0.0;
    }
};

// kappa is identified far less sharply than the other four parameters.
inline constexpr std::array<double, kNumParams> kSuccessDeviation = {1e-3, 1e-3, 1e-3, 1e-2,
                                                                     1e-3};

inline CaseResult run_case(const QuoteChain& chain, const HestonParams& theta_star,
                           const HestonParams& theta0, const LmOptions& opts) {
    CaseResult c;
    try {
        const CalibrationReport rep = calibrate(chain, theta0, opts);
        const auto fit = rep.theta_final.to_array();
        const auto ref = theta_star.to_array();
        bool close = true;
        for (std::size_t k = 0; k < kNumParams; ++k) {
            c.abs_deviation[k] = std::abs(fit[k] - ref[k]);
            close = close && c.abs_deviation[k] < kSuccessDeviation[k];
        }
        c.residual_norm = rep.residual_norm;
        c.squared_residual_norm = rep.squared_residual_norm;
        c.iterations = rep.iterations;
        c.n_price_evals = rep.n_price_evals;
        c.n_gradient_evals = rep.n_gradient_evals;
        c.n_linear_solves = rep.n_linear_solves;
        c.wall_time = rep.wall_time;
        c.stop_reason = rep.stop_reason;
        c.completed = true;
        // same residual measure as the stopping test
        const double measure = opts.residual_test == ResidualTest::Norm
                                   ? rep.residual_norm
                                   : rep.squared_residual_norm;
        c.success = close && measure <= opts.eps1 * 1e3;
    } catch (const std::exception&) {
        c.completed = false;
    }
    return c;
}

inline ValidationStats aggregate(const std::vector<CaseResult>& cases) {
    ValidationStats s;
    s.n_cases = cases.size();
    std::size_t n_done = 0;
    for (const auto& c : cases) {
        if (!c.completed) {
            ++s.n_failed_runs;
            continue;
        }
        ++n_done;
        if (c.success) ++s.n_success;
        for (std::size_t k = 0; k < kNumParams; ++k) s.mean_abs_deviation[k] += c.abs_deviation[k];
        s.mean_residual_norm += c.residual_norm;
        s.mean_squared_residual_norm += c.squared_residual_norm;
        s.mean_iterations += static_cast<double>(c.iterations);
        s.mean_price_evals += static_cast<double>(c.n_price_evals);
        s.mean_gradient_evals += static_cast<double>(c.n_gradient_evals);
        s.mean_linear_solves += static_cast<double>(c.n_linear_solves);
        s.mean_wall_time += c.wall_time;
        ++s.stop_counts[static_cast<std::size_t>(c.stop_reason)];
    }
    if (n_done) {
        const double n = static_cast<double>(n_done);
        for (auto& d : s.mean_abs_deviation) d /= n;
        s.mean_residual_norm /= n;
        s.mean_squared_residual_norm /= n;
        s.mean_iterations /= n;
        s.mean_price_evals /= n;
        s.mean_gradient_evals /= n;
        s.mean_linear_solves /= n;
        s.mean_wall_time /= n;
    }
    return s;
}

namespace detail {

// Runs fn(k) for k in [0, n) on a small worker pool.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t k = 0; k < n; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < n; k = next++) fn(k);
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

struct ValidationConfig {
    std::size_t n_optima = 20;
    std::size_t n_guesses = 20;
    std::uint64_t seed = 1;
    std::size_t threads = 0;  // 0: hardware concurrency
    bool start_at_optimum = false;
    SurfaceGrid grid{};
};

/// Random optima from the reasonable box, a synthetic surface for each, and
/// random initial guesses from the same box. Per-case RNG streams are keyed on
/// (seed, i, j) so the worker count never changes the result.
inline ValidationStats run_validation(const ValidationConfig& cfg, const LmOptions& opts = {}) {
    if (cfg.n_optima == 0 || cfg.n_guesses == 0)
        throw DomainError("run_validation needs at least one optimum and one guess");
    const MarketContext m = reference_market();

    std::vector<HestonParams> optima;
    std::vector<QuoteChain> chains(cfg.n_optima, QuoteChain{m, {}});
    optima.reserve(cfg.n_optima);
    for (std::size_t i = 0; i < cfg.n_optima; ++i) {
        auto rng = detail::case_rng(cfg.seed, i, 0, 0);
        optima.push_back(draw_random_params(rng));
    }
    detail::parallel_for(cfg.n_optima, cfg.threads, [&](std::size_t i) {
        chains[i] = generate_surface(optima[i], m, cfg.grid, opts.rule).chain;
    });

    const std::size_t n = cfg.n_optima * cfg.n_guesses;
    std::vector<CaseResult> results(n);
    detail::parallel_for(n, cfg.threads, [&](std::size_t k) {
        const std::size_t i = k / cfg.n_guesses;
        const std::size_t j = k % cfg.n_guesses;
        HestonParams theta0 = optima[i];
        if (!cfg.start_at_optimum) {
            auto rng = detail::case_rng(cfg.seed, i, j, 1);
            theta0 = draw_random_params(rng);
        }
        if (chains[i].quotes.empty()) return;  // completed = false
        results[k] = run_case(chains[i], optima[i], theta0, opts);
    });
    return aggregate(results);
}

struct RealisticCase {
    std::string name;
    HestonParams params;
    std::string description;
};

inline std::vector<RealisticCase> realistic_cases() {
    return {
        {"I", HestonParams::from_table_order(0.5, 0.04, 1.0, -0.9, 0.04),
         "slow mean reversion, high vol-of-vol, strong negative correlation"},
        {"II", HestonParams::from_table_order(0.3, 0.04, 0.9, -0.5, 0.04),
         "slow mean reversion, moderate correlation"},
        {"III", HestonParams::from_table_order(1.0, 0.09, 1.0, -0.3, 0.09),
         "faster mean reversion, weak correlation, higher variance level"},
    };
}

inline constexpr double kPerturbation = 0.10;

/// Each component drawn uniformly in +-10% of the optimum.
inline HestonParams perturb(const HestonParams& theta_star, std::mt19937_64& rng,
                            double rel = kPerturbation) {
    auto a = theta_star.to_array();
    std::uniform_real_distribution<double> dist(-rel, rel);
    for (auto& x : a) x *= 1.0 + dist(rng);
    return HestonParams::from_array(a);
}

inline ValidationStats run_realistic_case(const RealisticCase& c, std::size_t n_starts,
                                          std::uint64_t seed, const LmOptions& opts = {},
                                          std::size_t threads = 0) {
    const MarketContext m = reference_market();
    const QuoteChain chain = generate_surface(c.params, m, {}, opts.rule).chain;
    std::vector<CaseResult> results(n_starts);
    detail::parallel_for(n_starts, threads, [&](std::size_t k) {
        auto rng = detail::case_rng(seed, k, 0, 2);
        results[k] = run_case(chain, c.params, perturb(c.params, rng), opts);
    });
    return aggregate(results);
}

// ---- figure data -----------------------------------------------------------

struct ContourPoint {
    double x = 0.0;
    double y = 0.0;
    double residual_norm = std::numeric_limits<double>::quiet_NaN();  // NaN when unpriceable
};

struct ContourDump {
    Param px = Param::Kappa;
    Param py = Param::VBar;
    std::size_t resolution = 0;
    std::vector<ContourPoint> grid;  // row-major, x fastest
    std::vector<ContourPoint> path;  // calibration iterates projected on (px, py)
};

inline constexpr std::size_t kContourResolution = 50;
inline constexpr double kContourHalfWidth = 0.5;

/// ||r|| over a resolution x resolution grid spanning theta* (1 +- half_width)
/// in the two chosen parameters, the other three held at theta*.
inline ContourDump dump_contour(const HestonParams& theta_star, Param px, Param py,
                                const QuoteChain& chain,
                                std::size_t resolution = kContourResolution,
                                double half_width = kContourHalfWidth,
                                const QuadratureRule& rule = default_rule(),
                                const CalibrationReport* report = nullptr) {
    if (px == py) throw DomainError("dump_contour needs two distinct parameters");
    if (resolution < 10) throw DomainError("dump_contour needs at least a 10x10 grid");
    if (!(half_width > 0.0)) throw DomainError("dump_contour half-width must be positive");
    const auto base = theta_star.to_array();
    const auto ix = static_cast<std::size_t>(px);
    const auto iy = static_cast<std::size_t>(py);
    auto axis = [&](std::size_t idx, std::size_t k) {
        const double lo = base[idx] * (1.0 - half_width);
        const double hi = base[idx] * (1.0 + half_width);
        return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(resolution - 1);
    };
    ContourDump out{px, py, resolution, {}, {}};
    out.grid.resize(resolution * resolution);
    for (std::size_t row = 0; row < resolution; ++row) {
        for (std::size_t col = 0; col < resolution; ++col) {
            ContourPoint& cp = out.grid[row * resolution + col];
            auto a = base;
            a[ix] = cp.x = axis(ix, col);
            a[iy] = cp.y = axis(iy, row);
            if (!HestonParams::is_valid(a)) continue;
            try {
                cp.residual_norm = residual_vector(HestonParams::from_array(a), chain, rule).r.norm();
            } catch (const std::exception&) {
            }
        }
    }
    if (report) {
        for (const auto& e : report->trace)
            if (e.accepted) out.path.push_back({e.theta[ix], e.theta[iy], e.residual_norm});
    }
    return out;
}

struct IntegrandTrace {
    int maturity_days = 0;
    std::vector<double> u;
    std::vector<std::array<double, 1 + kNumParams>> values;  // price, then d/dtheta
    TruncationBound bound;
};

inline constexpr double kIntegrandTraceStep = 0.5;
inline constexpr double kIntegrandTraceMax = 250.0;

inline std::vector<IntegrandTrace> dump_integrand_convergence(const HestonParams& p,
                                                              const MarketContext& m,
                                                              double strike,
                                                              const std::vector<int>& days,
                                                              double tol = 1e-8) {
    std::vector<IntegrandTrace> out;
    for (int d : days) {
        const OptionSpec opt{strike, days_to_years(d), OptionType::Call};
        IntegrandTrace tr;
        tr.maturity_days = d;
        for (double u = kIntegrandTraceStep; u <= kIntegrandTraceMax + 1e-12;
             u += kIntegrandTraceStep) {
            tr.u.push_back(u);
            tr.values.push_back(price_gradient_integrands(p, m, opt, u));
        }
        tr.bound = truncation_bound(p, m, opt, tol);
        out.push_back(std::move(tr));
    }
    return out;
}

struct QuadratureErrorRow {
    std::size_t n_nodes = 0;
    double mean = 0.0;
    double max = 0.0;
    double min = 0.0;
};

inline constexpr std::size_t kReferenceNodes = 1000;

/// eps(N) = |C_N - C_Nmax| per option of the chain, same rule kind and
/// truncation, summarised per N.
inline std::vector<QuadratureErrorRow> quadrature_error_study(const HestonParams& p,
                                                              const QuoteChain& chain,
                                                              RuleKind kind,
                                                              const std::vector<std::size_t>& ns,
                                                              std::size_t n_max = kReferenceNodes,
                                                              double u_max = kDefaultUMax) {
    const QuadratureRule ref_rule = make_rule(kind, n_max, u_max);
    std::vector<double> ref;
    ref.reserve(chain.size());
    for (const auto& q : chain.quotes) ref.push_back(price(p, chain.market, q.option, ref_rule));

    std::vector<QuadratureErrorRow> rows;
    for (std::size_t n : ns) {
        const QuadratureRule rule = make_rule(kind, n, u_max);
        QuadratureErrorRow row{n, 0.0, 0.0, std::numeric_limits<double>::infinity()};
        for (std::size_t i = 0; i < chain.size(); ++i) {
            const double e = std::abs(price(p, chain.market, chain.quotes[i].option, rule) - ref[i]);
            row.mean += e;
            row.max = std::max(row.max, e);
            row.min = std::min(row.min, e);
        }
        row.mean /= static_cast<double>(chain.size());
        rows.push_back(row);
    }
    return rows;
}

}  // namespace heston
