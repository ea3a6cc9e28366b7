#pragma once

// File formats used by the command-line tool. Requires nlohmann/json
// (vendor/json.hpp) on the include path.

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "heston/blackscholes.hpp"
#include "heston/calibrator.hpp"
#include "heston/errors.hpp"
#include "heston/harness.hpp"
#include "heston/params.hpp"
#include "heston/pricer.hpp"

namespace heston::io {

using json = nlohmann::json;

// %.17g: enough digits for any double to read back bit-identical.
inline std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline double parse_double(std::string_view s, std::string_view what) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    const std::string str(s);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(str.c_str(), &end);
    if (str.empty() || end != str.c_str() + str.size() || errno == ERANGE)
        throw FormatError("cannot parse " + std::string(what) + " from '" + str + "'");
    return v;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write '" + path + "'");
    out << text;
}

// ---- parameters -----------------------------------------------------------

struct ParamsDoc {
    HestonParams params;
    std::optional<MarketContext> market;
};

inline ParamsDoc params_from_json(const json& j) {
    if (!j.is_object()) throw FormatError("parameter document must be a JSON object");
    auto num = [&](const char* key) {
        if (!j.contains(key)) throw FormatError(std::string("parameter document lacks '") + key + "'");
        if (!j.at(key).is_number())
            throw FormatError(std::string("parameter '") + key + "' must be a number");
        return j.at(key).get<double>();
    };
    ParamsDoc doc{HestonParams::from_table_order(num("kappa"), num("v_bar"), num("sigma"),
                                                 num("rho"), num("v0")),
                  std::nullopt};
    if (j.contains("spot") || j.contains("rate")) {
        const double spot = j.contains("spot") ? num("spot") : 1.0;
        const double rate = j.contains("rate") ? num("rate") : 0.0;
        doc.market = MarketContext{spot, rate};
    }
    return doc;
}

inline json params_to_json(const HestonParams& p,
                           const std::optional<MarketContext>& m = std::nullopt) {
    json j = {{"kappa", p.kappa()}, {"v_bar", p.v_bar()}, {"sigma", p.sigma()},
              {"rho", p.rho()},     {"v0", p.v0()}};
    if (m) {
        j["spot"] = m->spot;
        j["rate"] = m->rate;
    }
    return j;
}

inline ParamsDoc parse_params(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed parameter document: ") + e.what());
    }
    return params_from_json(j);
}

inline ParamsDoc read_params_file(const std::string& path) { return parse_params(read_text(path)); }

// ---- option chains --------------------------------------------------------

enum class QuoteKind { Price, Vol };

inline std::string_view to_string(QuoteKind k) { return k == QuoteKind::Price ? "PRICE" : "VOL"; }

struct ChainRow {
    int maturity_days = 0;
    std::optional<double> strike;
    std::optional<double> delta;
    OptionType type = OptionType::Call;
    QuoteKind kind = QuoteKind::Price;
    double quote = 0.0;
};

struct ChainDoc {
    MarketContext market;
    std::vector<ChainRow> rows;
};

inline constexpr std::string_view kChainHeader =
    "maturity_days,strike,delta,option_type,quote_kind,quote";

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

}  // namespace detail

/// Reads a chain: `# spot = x` and `# rate = y` comment lines, then the
/// header row, then one row per quote. Exactly one of strike and delta is
/// given per row.
inline ChainDoc parse_chain(std::istream& in) {
    std::optional<double> spot;
    std::optional<double> rate;
    std::vector<ChainRow> rows;
    bool header_seen = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const std::string where = "chain line " + std::to_string(lineno);
        if (t.front() == '#') {
            const auto eq = t.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = detail::trim(t.substr(1, eq - 1));
            const std::string val = detail::trim(t.substr(eq + 1));
            if (key == "spot") spot = parse_double(val, where + " spot");
            if (key == "rate") rate = parse_double(val, where + " rate");
            continue;
        }
        if (!header_seen) {
            std::string h;
            for (char c : t)
                if (c != ' ') h += c;
            if (h != kChainHeader)
                throw FormatError(where + ": expected header '" + std::string(kChainHeader) + "'");
            header_seen = true;
            continue;
        }
        const auto f = detail::split_csv(t);
        if (f.size() != 6) throw FormatError(where + ": expected 6 fields");
        ChainRow row;
        const double days = parse_double(f[0], where + " maturity_days");
        if (!(days >= 1.0) || days != std::floor(days))
            throw FormatError(where + ": maturity_days must be a positive integer");
        row.maturity_days = static_cast<int>(days);
        const std::string sk = detail::trim(f[1]);
        const std::string dl = detail::trim(f[2]);
        if (sk.empty() == dl.empty())
            throw FormatError(where + ": exactly one of strike and delta must be given");
        if (!sk.empty()) row.strike = parse_double(sk, where + " strike");
        if (!dl.empty()) row.delta = parse_double(dl, where + " delta");
        const std::string ty = detail::trim(f[3]);
        if (ty == "CALL")
            row.type = OptionType::Call;
        else if (ty == "PUT")
            row.type = OptionType::Put;
        else
            throw FormatError(where + ": option_type must be CALL or PUT");
        const std::string kd = detail::trim(f[4]);
        if (kd == "PRICE")
            row.kind = QuoteKind::Price;
        else if (kd == "VOL")
            row.kind = QuoteKind::Vol;
        else
            throw FormatError(where + ": quote_kind must be PRICE or VOL");
        row.quote = parse_double(f[5], where + " quote");
        if (!(row.quote >= 0.0) || !std::isfinite(row.quote))
            throw FormatError(where + ": quote must be a finite number >= 0");
        rows.push_back(row);
    }
    if (!header_seen) throw FormatError("chain has no header row");
    if (!spot || !rate) throw FormatError("chain must declare '# spot = ...' and '# rate = ...'");
    try {
        return ChainDoc{MarketContext{*spot, *rate}, std::move(rows)};
    } catch (const DomainError& e) {
        throw FormatError(std::string("chain market context: ") + e.what());
    }
}

inline ChainDoc read_chain_file(const std::string& path) {
    std::istringstream in(read_text(path));
    return parse_chain(in);
}

inline std::string format_chain(const ChainDoc& doc) {
    std::ostringstream out;
    out << "# spot = " << fmt(doc.market.spot) << "\n";
    out << "# rate = " << fmt(doc.market.rate) << "\n";
    out << kChainHeader << "\n";
    for (const auto& r : doc.rows) {
        out << r.maturity_days << ',' << (r.strike ? fmt(*r.strike) : "") << ','
            << (r.delta ? fmt(*r.delta) : "") << ',' << to_string(r.type) << ','
            << to_string(r.kind) << ',' << fmt(r.quote) << "\n";
    }
    return out.str();
}

namespace detail {

// Strike of a delta-quoted price: K = strike_from_delta(delta, iv(price, K)).
inline double strike_for_delta_price(const ChainRow& r, const MarketContext& m, double t) {
    double vol = 0.2;
    double strike = bs::strike_from_delta(*r.delta, vol, m.spot, m.rate, t, r.type);
    for (std::size_t it = 0; it < kStrikeFixedPointMaxIter; ++it) {
        vol = bs::implied_vol(r.quote, m.spot, m.rate, strike, t, r.type);
        if (!(vol > 0.0)) break;
        const double next = bs::strike_from_delta(*r.delta, vol, m.spot, m.rate, t, r.type);
        if (std::abs(next - strike) <= kStrikeFixedPointTol * std::max(1.0, strike)) return next;
        strike = next;
    }
    throw NoSolutionError("no strike consistent with the quoted delta and price");
}

}  // namespace detail

/// Resolves every row to a (strike, maturity, type, price, vol) quote.
inline QuoteChain to_quote_chain(const ChainDoc& doc) {
    QuoteChain chain{doc.market, {}};
    const MarketContext& m = doc.market;
    for (std::size_t i = 0; i < doc.rows.size(); ++i) {
        const ChainRow& r = doc.rows[i];
        try {
            const double t = days_to_years(r.maturity_days);
            double strike = 0.0;
            double px = 0.0;
            double vol = 0.0;
            if (r.kind == QuoteKind::Vol) {
                vol = r.quote;
                if (!(vol > 0.0)) throw DomainError("quoted vol must be positive");
                strike = r.strike ? *r.strike
                                  : bs::strike_from_delta(*r.delta, vol, m.spot, m.rate, t, r.type);
                px = bs::bs_price(m.spot, m.rate, strike, t, vol, r.type);
            } else {
                px = r.quote;
                strike = r.strike ? *r.strike : detail::strike_for_delta_price(r, m, t);
                try {
                    vol = bs::implied_vol(px, m.spot, m.rate, strike, t, r.type);
                } catch (const NoSolutionError&) {
                    vol = 0.0;
                }
            }
            chain.quotes.push_back({OptionSpec{strike, t, r.type}, px, vol});
        } catch (const std::exception& e) {
            throw DomainError("chain row " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    chain.validate();
    return chain;
}

/// Strike-quoted PRICE rows (default) or delta-quoted VOL rows for a surface.
inline ChainDoc surface_to_chain_doc(const Surface& s, QuoteKind kind) {
    ChainDoc doc{s.chain.market, {}};
    for (const auto& p : s.points) {
        if (!p.ok) continue;
        ChainRow r;
        r.maturity_days = p.maturity_days;
        r.type = p.delta < 0.0 ? OptionType::Put : OptionType::Call;
        r.kind = kind;
        if (kind == QuoteKind::Price) {
            r.strike = p.strike;
            r.quote = p.price;
        } else {
            r.delta = p.delta;
            r.quote = p.implied_vol;
        }
        doc.rows.push_back(r);
    }
    return doc;
}

/// Strike-quoted PRICE rows for an already resolved chain.
inline ChainDoc chain_to_doc(const QuoteChain& c) {
    ChainDoc doc{c.market, {}};
    for (const auto& q : c.quotes) {
        ChainRow r;
        r.maturity_days = static_cast<int>(std::lround(q.option.maturity * kTradingDaysPerYear));
        r.strike = q.option.strike;
        r.type = q.option.type;
        r.kind = QuoteKind::Price;
        r.quote = q.market_price;
        doc.rows.push_back(r);
    }
    return doc;
}

// ---- reports --------------------------------------------------------------

inline json report_to_json(const CalibrationReport& r) {
    json theta = params_to_json(r.theta_final);
    return {{"theta_final", theta},
            {"stop_reason", std::string(to_string(r.stop_reason))},
            {"initial_residual_norm", r.initial_residual_norm},
            {"residual_norm", r.residual_norm},
            {"squared_residual_norm", r.squared_residual_norm},
            {"grad_inf_norm", r.grad_inf_norm},
            {"last_step_norm", r.last_step_norm},
            {"iterations", r.iterations},
            {"n_price_evals", r.n_price_evals},
            {"n_gradient_evals", r.n_gradient_evals},
            {"n_linear_solves", r.n_linear_solves},
            {"trace_length", r.trace.size()},
            {"wall_time", r.wall_time}};
}

/// Inverse of report_to_json; the trace travels separately as CSV.
inline CalibrationReport report_from_json(const json& j) {
    try {
        CalibrationReport r;
        r.theta_final = params_from_json(j.at("theta_final")).params;
        r.stop_reason = stop_reason_from_string(j.at("stop_reason").get<std::string>());
        r.initial_residual_norm = j.at("initial_residual_norm").get<double>();
        r.residual_norm = j.at("residual_norm").get<double>();
        r.squared_residual_norm = j.at("squared_residual_norm").get<double>();
        r.grad_inf_norm = j.at("grad_inf_norm").get<double>();
        r.last_step_norm = j.at("last_step_norm").get<double>();
        r.iterations = j.at("iterations").get<std::size_t>();
        r.n_price_evals = j.at("n_price_evals").get<std::size_t>();
        r.n_gradient_evals = j.at("n_gradient_evals").get<std::size_t>();
        r.n_linear_solves = j.at("n_linear_solves").get<std::size_t>();
        r.wall_time = j.at("wall_time").get<double>();
        r.trace.resize(j.at("trace_length").get<std::size_t>());
        return r;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed report: ") + e.what());
    }
}

inline constexpr std::string_view kTraceHeader =
    "step,v0,v_bar,rho,kappa,sigma,residual_norm,mu,accepted,evaluated";

inline std::string format_trace(const CalibrationReport& r) {
    std::ostringstream out;
    out << kTraceHeader << "\n";
    for (std::size_t k = 0; k < r.trace.size(); ++k) {
        const auto& e = r.trace[k];
        out << k;
        for (double x : e.theta) out << ',' << fmt(x);
        out << ',' << fmt(e.residual_norm) << ',' << fmt(e.mu) << ',' << (e.accepted ? 1 : 0)
            << ',' << (e.evaluated ? 1 : 0) << "\n";
    }
    return out.str();
}

inline json stats_to_json(const ValidationStats& s) {
    json dev = json::object();
    for (std::size_t k = 0; k < kNumParams; ++k)
        dev[std::string(kParamNames[k])] = s.mean_abs_deviation[k];
    json stops = json::object();
    for (std::size_t k = 0; k < s.stop_counts.size(); ++k)
        stops[std::string(to_string(static_cast<StopReason>(k)))] = s.stop_counts[k];
    return {{"n_cases", s.n_cases},
            {"n_success", s.n_success},
            {"n_failed_runs", s.n_failed_runs},
            {"success_rate", s.success_rate()},
            {"mean_abs_deviation", dev},
            {"mean_residual_norm", s.mean_residual_norm},
            {"mean_squared_residual_norm", s.mean_squared_residual_norm},
            {"mean_iterations", s.mean_iterations},
            {"mean_price_evals", s.mean_price_evals},
            {"mean_gradient_evals", s.mean_gradient_evals},
            {"mean_linear_solves", s.mean_linear_solves},
            {"mean_wall_time", s.mean_wall_time},
            {"stop_counts", stops}};
}

inline ValidationStats stats_from_json(const json& j) {
    try {
        ValidationStats s;
        s.n_cases = j.at("n_cases").get<std::size_t>();
        s.n_success = j.at("n_success").get<std::size_t>();
        s.n_failed_runs = j.at("n_failed_runs").get<std::size_t>();
        for (std::size_t k = 0; k < kNumParams; ++k)
            s.mean_abs_deviation[k] =
                j.at("mean_abs_deviation").at(std::string(kParamNames[k])).get<double>();
        s.mean_residual_norm = j.at("mean_residual_norm").get<double>();
        s.mean_squared_residual_norm = j.at("mean_squared_residual_norm").get<double>();
        s.mean_iterations = j.at("mean_iterations").get<double>();
        s.mean_price_evals = j.at("mean_price_evals").get<double>();
        s.mean_gradient_evals = j.at("mean_gradient_evals").get<double>();
        s.mean_linear_solves = j.at("mean_linear_solves").get<double>();
        s.mean_wall_time = j.at("mean_wall_time").get<double>();
        for (std::size_t k = 0; k < s.stop_counts.size(); ++k)
            s.stop_counts[k] = j.at("stop_counts")
                                   .at(std::string(to_string(static_cast<StopReason>(k))))
                                   .get<std::size_t>();
        return s;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed validation document: ") + e.what());
    }
}

// ---- figure tables --------------------------------------------------------

inline std::string format_contour(const ContourDump& c) {
    const std::string x(kParamNames[static_cast<std::size_t>(c.px)]);
    const std::string y(kParamNames[static_cast<std::size_t>(c.py)]);
    std::ostringstream out;
    out << "kind," << x << ',' << y << ",residual_norm\n";
    for (const auto& p : c.grid)
        out << "grid," << fmt(p.x) << ',' << fmt(p.y) << ',' << fmt(p.residual_norm) << "\n";
    for (const auto& p : c.path)
        out << "path," << fmt(p.x) << ',' << fmt(p.y) << ',' << fmt(p.residual_norm) << "\n";
    return out.str();
}

inline std::string format_integrands(const std::vector<IntegrandTrace>& traces) {
    std::ostringstream out;
    out << "maturity_days,u,price,d_v0,d_v_bar,d_rho,d_kappa,d_sigma\n";
    for (const auto& t : traces)
        for (std::size_t k = 0; k < t.u.size(); ++k) {
            out << t.maturity_days << ',' << fmt(t.u[k]);
            for (double v : t.values[k]) out << ',' << fmt(v);
            out << "\n";
        }
    return out.str();
}

inline std::string format_truncation(const std::vector<IntegrandTrace>& traces) {
    std::ostringstream out;
    out << "maturity_days,maturity_years,u_bar,capped\n";
    for (const auto& t : traces)
        out << t.maturity_days << ',' << fmt(days_to_years(t.maturity_days)) << ','
            << fmt(t.bound.u_bar) << ',' << (t.bound.capped ? 1 : 0) << "\n";
    return out.str();
}

inline std::string format_quadrature_errors(
    const std::vector<std::pair<RuleKind, std::vector<QuadratureErrorRow>>>& studies) {
    std::ostringstream out;
    out << "rule,n_nodes,mean_error,max_error,min_error\n";
    for (const auto& [kind, rows] : studies)
        for (const auto& r : rows)
            out << (kind == RuleKind::GaussLegendre ? "gl" : "tr") << ',' << r.n_nodes << ','
                << fmt(r.mean) << ',' << fmt(r.max) << ',' << fmt(r.min) << "\n";
    return out.str();
}

}  // namespace heston::io
