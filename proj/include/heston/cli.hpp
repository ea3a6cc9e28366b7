#pragma once

// Command-line front end. Requires CLI11 and nlohmann/json (vendor/).

#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "heston/blackscholes.hpp"
#include "heston/calibrator.hpp"
#include "heston/charfn.hpp"
#include "heston/errors.hpp"
#include "heston/gradient.hpp"
#include "heston/harness.hpp"
#include "heston/io.hpp"
#include "heston/params.hpp"
#include "heston/pricer.hpp"
#include "heston/quadrature.hpp"

namespace heston::cli {

enum ExitCode : int {
    kOk = 0,
    kCheckFailed = 1,
    kUsage = 2,
    kFormat = 3,
    kDomain = 4,
    kNoConvergence = 5,
};

inline constexpr double kGradcheckTol = 1e-4;

namespace detail {

struct Common {
    std::size_t nodes = kDefaultNodes;
    double umax = kDefaultUMax;
    std::string rule = "gl";
    double tol = 1e-10;
    std::size_t max_iter = 100;
    std::uint64_t seed = 1;
    std::string bounds = "off";
    bool strict_paper = false;
    std::string rep = "cui";
    std::string residual_test = "squared";
    std::size_t threads = 0;

    [[nodiscard]] QuadratureRule make() const {
        if (rule != "gl" && rule != "tr") throw CLI::ValidationError("--rule", "must be gl or tr");
        return make_rule(rule == "gl" ? RuleKind::GaussLegendre : RuleKind::Trapezoid, nodes, umax);
    }

    [[nodiscard]] LmOptions lm() const {
        LmOptions o;
        o.eps1 = o.eps2 = o.eps3 = tol;
        o.max_iterations = max_iter;
        o.strict_paper = strict_paper;
        o.rule = make();
        if (bounds == "on")
            o.bounds = kReasonableBounds;
        else if (bounds != "off")
            throw CLI::ValidationError("--bounds", "must be on or off");
        if (residual_test == "norm")
            o.residual_test = ResidualTest::Norm;
        else if (residual_test != "squared")
            throw CLI::ValidationError("--residual-test", "must be squared or norm");
        return o;
    }
};

inline void emit(const std::string& text, const std::string& path, std::ostream& out) {
    if (path.empty() || path == "-")
        out << text;
    else
        io::write_text(path, text);
}

inline Param param_from_name(const std::string& s) {
    for (std::size_t k = 0; k < kNumParams; ++k)
        if (kParamNames[k] == s) return static_cast<Param>(k);
    throw CLI::ValidationError("--pair", "unknown parameter '" + s + "'");
}

inline io::ParamsDoc params_or_default(const std::string& path) {
    if (path.empty()) return {reference_params(), reference_market()};
    return io::read_params_file(path);
}

inline MarketContext market_of(const io::ParamsDoc& d) {
    return d.market ? *d.market : reference_market();
}

inline QuoteChain chain_or_surface(const std::string& chain_path, const io::ParamsDoc& pd,
                                   const QuadratureRule& rule) {
    if (!chain_path.empty()) return io::to_quote_chain(io::read_chain_file(chain_path));
    return generate_surface(pd.params, market_of(pd), {}, rule).chain;
}

}  // namespace detail

/// Parses argv and runs one subcommand. Returns the process exit status.
inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
    CLI::App app{"Heston model pricing, gradients and Levenberg-Marquardt calibration"};
    app.require_subcommand(1);
    app.fallthrough();
    detail::Common c;
    app.add_option("--nodes", c.nodes, "quadrature nodes")->capture_default_str();
    app.add_option("--umax", c.umax, "integration truncation bound")->capture_default_str();
    app.add_option("--rule", c.rule, "quadrature rule: gl or tr")->capture_default_str();
    app.add_option("--tol", c.tol, "LM tolerances eps1 = eps2 = eps3")->capture_default_str();
    app.add_option("--max-iter", c.max_iter, "LM iteration limit")->capture_default_str();
    app.add_option("--seed", c.seed, "random seed")->capture_default_str();
    app.add_option("--bounds", c.bounds, "project iterates onto the reasonable box: on|off")
        ->capture_default_str();
    app.add_flag("--strict-paper-lm", c.strict_paper,
                 "keep mu unchanged after accepted steps");
    app.add_option("--rep", c.rep, "characteristic function: cui|schoutens|heston|delbano")
        ->capture_default_str();
    app.add_option("--residual-test", c.residual_test,
                   "quantity tested against eps1: squared (||r||^2) or norm (||r||)")
        ->capture_default_str();
    app.add_option("--threads", c.threads, "worker threads for validate (0: all cores)");

    std::string params_path, chain_path, out_path, trace_path, fitted_path, guess_path;

    auto* price_cmd = app.add_subcommand("price", "price a chain or a single option");
    double strike = 0.0;
    double days = 0.0;
    std::string type_str = "CALL";
    price_cmd->add_option("--params", params_path, "parameter file (JSON)");
    price_cmd->add_option("--chain", chain_path, "chain file (CSV)");
    price_cmd->add_option("--strike", strike, "single option strike");
    price_cmd->add_option("--days", days, "single option maturity in trading days");
    price_cmd->add_option("--type", type_str, "CALL or PUT")->capture_default_str();
    price_cmd->add_option("--out", out_path, "output CSV (default stdout)");

    auto* grad_cmd = app.add_subcommand("gradcheck", "analytic gradient against central differences");
    double fd_eps = kDefaultFdStep;
    grad_cmd->add_option("--params", params_path, "parameter file (default: reference set)");
    grad_cmd->add_option("--chain", chain_path, "chain file (default: generated surface)");
    grad_cmd->add_option("--eps", fd_eps, "finite-difference increment")->capture_default_str();
    grad_cmd->add_option("--out", out_path, "output CSV (default stdout)");

    auto* cal_cmd = app.add_subcommand("calibrate", "fit the model to a chain");
    cal_cmd->add_option("--chain", chain_path, "chain file (CSV)")->required();
    cal_cmd->add_option("--guess", guess_path, "initial parameters (JSON)")->required();
    cal_cmd->add_option("--out", out_path, "report (JSON, default stdout)");
    cal_cmd->add_option("--trace", trace_path, "per-trial trace (CSV)");
    cal_cmd->add_option("--fitted", fitted_path, "fitted parameters (JSON)");

    auto* val_cmd = app.add_subcommand("validate", "randomised validation campaign");
    ValidationConfig vcfg;
    bool full = false;
    val_cmd->add_option("--optima", vcfg.n_optima, "random optima")->capture_default_str();
    val_cmd->add_option("--guesses", vcfg.n_guesses, "initial guesses per optimum")
        ->capture_default_str();
    val_cmd->add_flag("--full", full, "100 x 100 cases");
    val_cmd->add_option("--out", out_path, "statistics (JSON, default stdout)");

    auto* surf_cmd = app.add_subcommand("surface", "synthetic delta-grid surface from parameters");
    std::string quote_kind = "price";
    surf_cmd->add_option("--params", params_path, "parameter file (default: reference set)");
    surf_cmd->add_option("--quote", quote_kind, "price (strike rows) or vol (delta rows)")
        ->capture_default_str();
    surf_cmd->add_option("--out", out_path, "chain file (default stdout)");

    auto* cont_cmd = app.add_subcommand("dump-contour", "||r|| over a two-parameter grid");
    std::string pair = "kappa,v_bar";
    std::size_t resolution = kContourResolution;
    double half_width = kContourHalfWidth;
    cont_cmd->add_option("--params", params_path, "optimum (default: reference set)");
    cont_cmd->add_option("--chain", chain_path, "chain (default: surface of the optimum)");
    cont_cmd->add_option("--pair", pair, "two parameter names")->capture_default_str();
    cont_cmd->add_option("--resolution", resolution, "grid points per axis")->capture_default_str();
    cont_cmd->add_option("--half-width", half_width, "relative half-width")->capture_default_str();
    cont_cmd->add_option("--guess", guess_path, "overlay the path of a calibration from here");
    cont_cmd->add_option("--out", out_path, "output CSV (default stdout)");

    auto* integ_cmd = app.add_subcommand("dump-integrand", "integrand traces and truncation bounds");
    double integ_strike = 1.1;
    std::vector<int> integ_days{30, 60, 90, 120, 150, 180, 252, 360};
    double integ_tol = 1e-8;
    integ_cmd->add_option("--params", params_path, "parameters (default: reference set)");
    integ_cmd->add_option("--strike", integ_strike, "strike")->capture_default_str();
    integ_cmd->add_option("--days", integ_days, "maturities in trading days")->delimiter(',');
    integ_cmd->add_option("--tol", integ_tol, "integrand threshold")->capture_default_str();
    integ_cmd->add_option("--out", out_path, "integrand CSV (default stdout)");
    integ_cmd->add_option("--bounds-out", trace_path, "truncation bound CSV");

    auto* qerr_cmd = app.add_subcommand("dump-quaderr", "quadrature error against N = 1000");
    qerr_cmd->add_option("--params", params_path, "parameters (default: reference set)");
    qerr_cmd->add_option("--chain", chain_path, "chain (default: surface of the parameters)");
    qerr_cmd->add_option("--out", out_path, "output CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kUsage;
    }

    try {
        if (*price_cmd) {
            const auto pd = io::read_params_file(params_path.empty()
                                                     ? throw CLI::RequiredError("--params")
                                                     : params_path);
            const QuadratureRule rule = c.make();
            if (c.rep != "cui" && c.rep != "schoutens" && c.rep != "heston" && c.rep != "delbano")
                throw CLI::ValidationError("--rep", "must be cui, schoutens, heston or delbano");
            const Representation rep = representation_from_string(c.rep);
            std::ostringstream s;
            s << "maturity_days,strike,option_type,price,implied_vol\n";
            auto line = [&](const MarketContext& m, const OptionSpec& o) {
                const double px = price_with(rep, pd.params, m, o, rule);
                double iv = std::numeric_limits<double>::quiet_NaN();
                try {
                    iv = bs::implied_vol(px, m.spot, m.rate, o.strike, o.maturity, o.type);
                } catch (const NoSolutionError&) {
                }
                s << io::fmt(o.maturity * kTradingDaysPerYear) << ',' << io::fmt(o.strike) << ','
                  << to_string(o.type) << ',' << io::fmt(px) << ',' << io::fmt(iv) << "\n";
            };
            if (!chain_path.empty()) {
                const auto chain = io::to_quote_chain(io::read_chain_file(chain_path));
                for (const auto& q : chain.quotes) line(chain.market, q.option);
            } else {
                if (!(strike > 0.0) || !(days > 0.0))
                    throw CLI::ValidationError("price", "give --chain or --strike and --days");
                if (type_str != "CALL" && type_str != "PUT")
                    throw CLI::ValidationError("--type", "must be CALL or PUT");
                line(detail::market_of(pd),
                     OptionSpec{strike, days_to_years(days),
                                type_str == "CALL" ? OptionType::Call : OptionType::Put});
            }
            detail::emit(s.str(), out_path, out);
            return kOk;
        }

        if (*grad_cmd) {
            const auto pd = detail::params_or_default(params_path);
            const QuadratureRule rule = c.make();
            const QuoteChain chain = detail::chain_or_surface(chain_path, pd, rule);
            std::ostringstream s;
            s << "quote,parameter,analytic,finite_difference,relative_error\n";
            double worst = 0.0;
            for (std::size_t i = 0; i < chain.size(); ++i) {
                const auto& o = chain.quotes[i].option;
                const auto g = price_gradient(pd.params, chain.market, o, rule);
                const auto f = fd_gradient(pd.params, chain.market, o, fd_eps, rule);
                for (std::size_t k = 0; k < kNumParams; ++k) {
                    const double rel = std::abs(g[k] - f[k]) / std::max(std::abs(f[k]), 1e-12);
                    worst = std::max(worst, rel);
                    s << i << ',' << kParamNames[k] << ',' << io::fmt(g[k]) << ','
                      << io::fmt(f[k]) << ',' << io::fmt(rel) << "\n";
                }
            }
            detail::emit(s.str(), out_path, out);
            const bool pass = worst < kGradcheckTol;
            err << (pass ? "PASS" : "FAIL") << " max relative error " << io::fmt(worst) << "\n";
            return pass ? kOk : kCheckFailed;
        }

        if (*cal_cmd) {
            const QuoteChain chain = io::to_quote_chain(io::read_chain_file(chain_path));
            const auto guess = io::read_params_file(guess_path);
            const CalibrationReport rep = calibrate(chain, guess.params, c.lm());
            detail::emit(io::report_to_json(rep).dump(2) + "\n", out_path, out);
            if (!trace_path.empty()) io::write_text(trace_path, io::format_trace(rep));
            if (!fitted_path.empty())
                io::write_text(fitted_path,
                               io::params_to_json(rep.theta_final, chain.market).dump(2) + "\n");
            return rep.stop_reason == StopReason::MaxIter ? kNoConvergence : kOk;
        }

        if (*val_cmd) {
            if (full) vcfg.n_optima = vcfg.n_guesses = 100;
            vcfg.seed = c.seed;
            vcfg.threads = c.threads;
            const ValidationStats st = run_validation(vcfg, c.lm());
            detail::emit(io::stats_to_json(st).dump(2) + "\n", out_path, out);
            return kOk;
        }

        if (*surf_cmd) {
            const auto pd = detail::params_or_default(params_path);
            if (quote_kind != "price" && quote_kind != "vol")
                throw CLI::ValidationError("--quote", "must be price or vol");
            const Surface s = generate_surface(pd.params, detail::market_of(pd), {}, c.make());
            for (const auto& p : s.points)
                if (!p.ok)
                    err << "warning: grid point " << p.maturity_days << " days, delta "
                        << p.delta << " did not resolve\n";
            detail::emit(io::format_chain(io::surface_to_chain_doc(
                             s, quote_kind == "price" ? io::QuoteKind::Price : io::QuoteKind::Vol)),
                         out_path, out);
            return kOk;
        }

        if (*cont_cmd) {
            const auto pd = detail::params_or_default(params_path);
            const QuadratureRule rule = c.make();
            const QuoteChain chain = detail::chain_or_surface(chain_path, pd, rule);
            const auto comma = pair.find(',');
            if (comma == std::string::npos)
                throw CLI::ValidationError("--pair", "expected two names separated by a comma");
            const Param px = detail::param_from_name(pair.substr(0, comma));
            const Param py = detail::param_from_name(pair.substr(comma + 1));
            std::optional<CalibrationReport> rep;
            if (!guess_path.empty())
                rep = calibrate(chain, io::read_params_file(guess_path).params, c.lm());
            const ContourDump d = dump_contour(pd.params, px, py, chain, resolution, half_width,
                                               rule, rep ? &*rep : nullptr);
            detail::emit(io::format_contour(d), out_path, out);
            return kOk;
        }

        if (*integ_cmd) {
            const auto pd = detail::params_or_default(params_path);
            const auto traces = dump_integrand_convergence(pd.params, detail::market_of(pd),
                                                           integ_strike, integ_days, integ_tol);
            detail::emit(io::format_integrands(traces), out_path, out);
            if (!trace_path.empty()) io::write_text(trace_path, io::format_truncation(traces));
            return kOk;
        }

        if (*qerr_cmd) {
            const auto pd = detail::params_or_default(params_path);
            const QuoteChain chain = detail::chain_or_surface(chain_path, pd, default_rule());
            std::vector<std::size_t> ns;
            for (std::size_t n = 10; n <= 100; n += 10) ns.push_back(n);
            std::vector<std::pair<RuleKind, std::vector<QuadratureErrorRow>>> studies;
            for (RuleKind k : {RuleKind::GaussLegendre, RuleKind::Trapezoid})
                studies.emplace_back(k, quadrature_error_study(pd.params, chain, k, ns,
                                                               kReferenceNodes, c.umax));
            detail::emit(io::format_quadrature_errors(studies), out_path, out);
            return kOk;
        }
    } catch (const CLI::Error& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << "\n";
        return kFormat;
    } catch (const DomainError& e) {
        err << "domain error: " << e.what() << "\n";
        return kDomain;
    } catch (const std::exception& e) {
        err << "numeric error: " << e.what() << "\n";
        return kDomain;
    }
    return kUsage;
}

}  // namespace heston::cli
