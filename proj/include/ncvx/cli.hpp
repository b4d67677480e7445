#ifndef NCVX_CLI_HPP
#define NCVX_CLI_HPP

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ncvx/gallery/registry.hpp"
#include "ncvx/solver.hpp"

namespace ncvx::cli {

using gallery::Example;
using gallery::Registry;

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int check_failed = 1;
inline constexpr int not_converged = 2;
inline constexpr int numerical = 3;
inline constexpr int config = 4;
} // namespace exit_code

inline int exit_code_for(Termination t)
{
    switch (t) {
    case Termination::Converged: return exit_code::ok;
    case Termination::MaxIter:
    case Termination::LineSearchFailed:
    case Termination::StationaryInfeasible: return exit_code::not_converged;
    case Termination::NumericalError: return exit_code::numerical;
    }
    return exit_code::numerical;
}

// ---------------------------------------------------------------------------
// Solver options from flat keys

inline const std::vector<std::string>& solver_keys()
{
    static const std::vector<std::string> keys = {
        "opt_tol",       "viol_ineq_tol",      "viol_eq_tol",  "max_iter",
        "mu0",           "steering_c_v",       "steering_c_mu", "steering_max_trials",
        "wolfe_c1",      "wolfe_c2",           "linesearch_max_bisections", "gradient_cache_size",
        "stationarity_radius", "limited_memory_pairs", "curvature", "seed",
        "qp_tol",        "qp_max_iter"};
    return keys;
}

inline SolverOptions solver_options_from_map(const ConfigMap& map)
{
    ConfigReader r(map);
    SolverOptions o;
    auto int_key = [&](const std::string& k, int def) {
        const std::int64_t v = r.integer(k, def);
        require_config(v >= std::numeric_limits<int>::min() && v <= std::numeric_limits<int>::max(), k,
                       "out of range");
        return static_cast<int>(v);
    };
    o.opt_tol = r.real("opt_tol", o.opt_tol);
    o.viol_ineq_tol = r.real("viol_ineq_tol", o.viol_ineq_tol);
    o.viol_eq_tol = r.real("viol_eq_tol", o.viol_eq_tol);
    o.max_iter = int_key("max_iter", o.max_iter);
    o.mu0 = r.real("mu0", o.mu0);
    o.steering_c_v = r.real("steering_c_v", o.steering_c_v);
    o.steering_c_mu = r.real("steering_c_mu", o.steering_c_mu);
    o.steering_max_trials = int_key("steering_max_trials", o.steering_max_trials);
    o.wolfe_c1 = r.real("wolfe_c1", o.wolfe_c1);
    o.wolfe_c2 = r.real("wolfe_c2", o.wolfe_c2);
    o.linesearch_max_bisections = int_key("linesearch_max_bisections", o.linesearch_max_bisections);
    o.gradient_cache_size = int_key("gradient_cache_size", o.gradient_cache_size);
    o.stationarity_radius = r.real("stationarity_radius", o.stationarity_radius);
    o.limited_memory_pairs = int_key("limited_memory_pairs", o.limited_memory_pairs);
    const std::string curv = r.text("curvature", std::string(to_string(o.curvature)));
    if (curv == "penalty") o.curvature = CurvaturePairs::Penalty;
    else if (curv == "lagrangian") o.curvature = CurvaturePairs::Lagrangian;
    else throw ConfigError("curvature", "expected penalty or lagrangian, got '" + curv + "'");
    o.seed = r.unsigned_integer("seed", o.seed);
    o.qp.tol = r.real("qp_tol", o.qp.tol);
    o.qp.max_iter = int_key("qp_max_iter", o.qp.max_iter);
    r.reject_unknown();

    require_config(o.opt_tol > 0.0, "opt_tol", "must be positive");
    require_config(o.viol_ineq_tol > 0.0, "viol_ineq_tol", "must be positive");
    require_config(o.viol_eq_tol > 0.0, "viol_eq_tol", "must be positive");
    require_config(o.max_iter >= 0, "max_iter", "must be non-negative");
    require_config(o.mu0 > 0.0, "mu0", "must be positive");
    require_config(o.steering_c_v > 0.0 && o.steering_c_v < 1.0, "steering_c_v", "must lie in (0, 1)");
    require_config(o.steering_c_mu > 0.0 && o.steering_c_mu < 1.0, "steering_c_mu", "must lie in (0, 1)");
    require_config(o.steering_max_trials >= 0, "steering_max_trials", "must be non-negative");
    require_config(o.wolfe_c1 > 0.0 && o.wolfe_c1 < 1.0, "wolfe_c1", "must lie in (0, 1)");
    require_config(o.wolfe_c2 > o.wolfe_c1 && o.wolfe_c2 < 1.0, "wolfe_c2", "must lie in (wolfe_c1, 1)");
    require_config(o.linesearch_max_bisections > 0, "linesearch_max_bisections", "must be positive");
    require_config(o.gradient_cache_size >= 0, "gradient_cache_size", "must be non-negative");
    require_config(o.stationarity_radius > 0.0, "stationarity_radius", "must be positive");
    require_config(o.limited_memory_pairs >= 0, "limited_memory_pairs", "must be non-negative");
    require_config(o.qp.tol > 0.0, "qp_tol", "must be positive");
    require_config(o.qp.max_iter > 0, "qp_max_iter", "must be positive");
    return o;
}

// ---------------------------------------------------------------------------
// Run configuration: config file plus flag overrides

struct RunConfig
{
    std::string example;
    ConfigMap example_cfg;
    ConfigMap solver_cfg;
    std::optional<std::uint64_t> seed;
    std::string format = "json-lines";
    std::string out;
    std::string summary;
};

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline void set_key(RunConfig& rc, const std::string& key, const std::string& value)
{
    auto parse_seed = [&](const std::string& v) {
        ConfigMap m{{"seed", v}};
        ConfigReader r(m);
        return r.unsigned_integer("seed", 0);
    };
    if (key == "example") rc.example = value;
    else if (key == "seed") rc.seed = parse_seed(value);
    else if (key == "format") rc.format = value;
    else if (key == "out") rc.out = value;
    else if (key == "summary") rc.summary = value;
    else if (key.starts_with("example.") && key.size() > 8) rc.example_cfg[key.substr(8)] = value;
    else if (key.starts_with("solver.") && key.size() > 7) rc.solver_cfg[key.substr(7)] = value;
    else throw ConfigError(key, "unknown key");
}

/// `key = value` lines; `#` starts a comment.
inline void read_config_text(RunConfig& rc, std::istream& in)
{
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno), "expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno), "missing key");
        set_key(rc, key, trim(line.substr(eq + 1)));
    }
}

inline void read_config_file(RunConfig& rc, const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path + "'");
    read_config_text(rc, in);
}

/// Maps a dynamic flag (without the dashes) onto a config key.
inline std::string flag_to_key(const std::string& flag, const Example* ex)
{
    auto norm = [](std::string s) {
        for (char& c : s)
            if (c == '-') c = '_';
        return s;
    };
    if (flag.starts_with("example-")) return "example." + norm(flag.substr(8));
    if (flag.starts_with("solver-")) return "solver." + norm(flag.substr(7));
    const std::string k = norm(flag);
    if (ex && ex->defaults.contains(k)) return "example." + k;
    for (const std::string& s : solver_keys())
        if (s == k) return "solver." + k;
    throw ConfigError(flag, "unknown flag --" + flag);
}

/// Turns leftover `--key value` / `--key=value` arguments into pairs.
inline std::vector<std::pair<std::string, std::string>> split_extras(const std::vector<std::string>& extras)
{
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& a = extras[i];
        if (!a.starts_with("--") || a.size() < 3) throw ConfigError(a, "unexpected argument '" + a + "'");
        const std::string body = a.substr(2);
        if (const auto eq = body.find('='); eq != std::string::npos) {
            out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
        } else {
            if (i + 1 >= extras.size()) throw ConfigError(body, "flag --" + body + " needs a value");
            out.emplace_back(body, extras[++i]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output

inline std::string fmt_num(double v) { return std::isfinite(v) ? format_double(v) : "null"; }

inline const char* const kLogFields[] = {"iter", "mu", "phi", "f", "viol_ineq", "viol_eq", "stationarity", "step",
                                         "qp_status"};

inline void write_log(std::ostream& os, const std::vector<IterationRecord>& log, const std::string& format)
{
    if (format == "csv") {
        for (std::size_t i = 0; i < std::size(kLogFields); ++i) os << (i ? "," : "") << kLogFields[i];
        os << '\n';
        for (const IterationRecord& r : log)
            os << r.iter << ',' << fmt_num(r.mu) << ',' << fmt_num(r.phi) << ',' << fmt_num(r.f) << ','
               << fmt_num(r.viol_ineq) << ',' << fmt_num(r.viol_eq) << ',' << fmt_num(r.stationarity) << ','
               << fmt_num(r.step) << ',' << to_string(r.qp_status) << '\n';
        return;
    }
    for (const IterationRecord& r : log)
        os << "{\"iter\":" << r.iter << ",\"mu\":" << fmt_num(r.mu) << ",\"phi\":" << fmt_num(r.phi)
           << ",\"f\":" << fmt_num(r.f) << ",\"viol_ineq\":" << fmt_num(r.viol_ineq)
           << ",\"viol_eq\":" << fmt_num(r.viol_eq) << ",\"stationarity\":" << fmt_num(r.stationarity)
           << ",\"step\":" << fmt_num(r.step) << ",\"qp_status\":\"" << to_string(r.qp_status) << "\"}\n";
}

inline void write_summary(std::ostream& os, const std::string& example, const Solution& s, std::uint64_t seed)
{
    os << "{\"example\":\"" << example << "\",\"termination\":\"" << to_string(s.termination)
       << "\",\"iterations\":" << s.iterations << ",\"f\":" << fmt_num(s.f)
       << ",\"final_f\":" << fmt_num(s.final_f)
       << ",\"max_violation\":" << fmt_num(s.max_violation) << ",\"stationarity\":" << fmt_num(s.stationarity)
       << ",\"final_mu\":" << fmt_num(s.final_mu) << ",\"wall_time\":" << fmt_num(s.wall_time)
       << ",\"seed\":" << seed << "}\n";
}

inline void write_table(std::ostream& os, const std::string& example, const Solution& s, std::uint64_t seed)
{
    auto row = [&](const char* k, const std::string& v) { os << std::left << std::setw(15) << k << v << '\n'; };
    auto num = [](double v) {
        std::ostringstream ss;
        ss << std::setprecision(6) << v;
        return ss.str();
    };
    row("example", example);
    row("termination", std::string(to_string(s.termination)));
    row("iterations", std::to_string(s.iterations));
    row("f", num(s.f));
    row("final_f", num(s.final_f));
    row("max_violation", num(s.max_violation));
    row("stationarity", num(s.stationarity));
    row("final_mu", num(s.final_mu));
    row("wall_time_s", num(s.wall_time));
    row("seed", std::to_string(seed));
    if (!s.message.empty()) row("message", s.message);
}

// ---------------------------------------------------------------------------
// Verbs

struct Hooks
{
    /// Applied to every evaluation inside `check` before gradients are compared.
    std::function<void(EvalRecord&)> tamper;
};

inline int cmd_list(const Registry& reg, std::ostream& out)
{
    std::size_t width = 0;
    for (const Example& e : reg) width = std::max(width, e.name.size());
    for (const Example& e : reg) out << std::left << std::setw(static_cast<int>(width + 2)) << e.name << e.description << '\n';
    return exit_code::ok;
}

/// Resolved example and solver settings for one run.
struct Resolved
{
    const Example* example = nullptr;
    ConfigMap example_cfg;
    ConfigMap solver_cfg;
};

inline Resolved resolve(const Registry& reg, const RunConfig& rc)
{
    Resolved r;
    if (rc.example.empty()) throw ConfigError("example", "no example given");
    r.example = gallery::find_example(reg, rc.example);
    if (!r.example) throw ConfigError("example", "unknown example '" + rc.example + "'");
    r.solver_cfg = r.example->solver_defaults;
    if (rc.seed) {
        r.solver_cfg["seed"] = std::to_string(*rc.seed);
        if (r.example->defaults.contains("seed")) r.example_cfg["seed"] = std::to_string(*rc.seed);
    }
    for (const auto& [k, v] : rc.example_cfg) r.example_cfg[k] = v;
    for (const auto& [k, v] : rc.solver_cfg) r.solver_cfg[k] = v;
    return r;
}

inline int cmd_run(const Registry& reg, const RunConfig& rc, std::ostream& out, std::ostream& err)
{
    Resolved r;
    std::optional<gallery::Instance> inst;
    SolverOptions opts;
    try {
        if (rc.format != "json-lines" && rc.format != "csv")
            throw ConfigError("format", "expected json-lines or csv, got '" + rc.format + "'");
        r = resolve(reg, rc);
        inst.emplace(r.example->build(r.example_cfg));
        opts = solver_options_from_map(r.solver_cfg);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return exit_code::config;
    }
    if (inst->start) opts.x0 = inst->start;

    const Solution sol = solve(inst->problem, opts);

    if (rc.out.empty()) {
        write_log(out, sol.log, rc.format);
    } else {
        std::ofstream f(rc.out, std::ios::binary);
        if (!f) {
            err << "config error: out: cannot open '" << rc.out << "'\n";
            return exit_code::config;
        }
        write_log(f, sol.log, rc.format);
    }
    if (!rc.summary.empty()) {
        std::ofstream f(rc.summary, std::ios::binary);
        if (!f) {
            err << "config error: summary: cannot open '" << rc.summary << "'\n";
            return exit_code::config;
        }
        write_summary(f, r.example->name, sol, opts.seed);
    }
    write_table(err, r.example->name, sol, opts.seed);
    return exit_code_for(sol.termination);
}

namespace detail {

// Central differences of one scalar component, skipping coordinates where
// the one-sided slopes disagree (a kink within reach of the step).
inline std::vector<std::string> compare_gradients(const ProblemDefinition& p, const Vector& x, const EvalRecord& rec,
                                                  double h = 1e-6, double tol = 1e-5)
{
    std::vector<std::string> bad;
    const EvalRecord base = p.evaluate(x);
    const Eigen::Index n = x.size();
    std::vector<EvalRecord> plus, minus;
    for (Eigen::Index i = 0; i < n; ++i) {
        Vector xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        plus.push_back(p.evaluate(xp));
        minus.push_back(p.evaluate(xm));
    }
    auto check_row = [&](const std::string& what, auto value, const Vector& grad) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double fp = value(plus[i]), fm = value(minus[i]), f0 = value(base);
            const double fwd = (fp - f0) / h, bwd = (f0 - fm) / h;
            if (std::abs(fwd - bwd) > 1e-3 * std::max(1.0, std::abs(fwd) + std::abs(bwd))) continue;
            const double fd = (fp - fm) / (2.0 * h);
            if (std::abs(grad[i] - fd) > tol * std::max(1.0, std::abs(fd))) {
                bad.push_back(what + " d/dx" + std::to_string(i) + ": analytic " + format_double(grad[i]) +
                              " vs finite difference " + format_double(fd));
                return;
            }
        }
    };
    check_row("f", [](const EvalRecord& e) { return e.f; }, rec.grad_f);
    for (Eigen::Index j = 0; j < rec.ci.size(); ++j)
        check_row("ci[" + std::to_string(j) + "]", [j](const EvalRecord& e) { return e.ci[j]; },
                  Vector(rec.ci_jac.row(j).transpose()));
    for (Eigen::Index j = 0; j < rec.ce.size(); ++j)
        check_row("ce[" + std::to_string(j) + "]", [j](const EvalRecord& e) { return e.ce[j]; },
                  Vector(rec.ce_jac.row(j).transpose()));
    return bad;
}

} // namespace detail

/// Validates configs, evaluates known feasible points and spot-checks
/// gradients at 10 random points per example.
inline int cmd_check(const Registry& reg, const std::vector<RunConfig>& targets, std::ostream& out,
                     std::ostream& err, const Hooks& hooks = {})
{
    std::vector<std::string> failures;
    for (const RunConfig& rc : targets) {
        const std::string name = rc.example;
        try {
            const Resolved r = resolve(reg, rc);
            const gallery::Instance inst = r.example->build(r.example_cfg);
            solver_options_from_map(r.solver_cfg);
            const ProblemDefinition& p = inst.problem;
            const auto n = static_cast<Eigen::Index>(p.dimension());

            if (inst.feasible_point) {
                const EvalRecord e = p.evaluate(*inst.feasible_point);
                const double v = e.viol_ineq() + e.viol_eq();
                if (v > 1e-12) failures.push_back(name + ": feasible point has violation " + format_double(v));
                else out << "ok    " << name << ": feasible point violation " << format_double(v) << '\n';
            } else {
                out << "skip  " << name << ": no known feasible point\n";
            }

            Vector base = inst.start ? *inst.start : inst.feasible_point ? *inst.feasible_point : Vector::Zero(n);
            Rng rng(20240601);
            int mismatched = 0;
            for (int k = 0; k < 10; ++k) {
                Vector x = base;
                for (Eigen::Index i = 0; i < n; ++i) x[i] += 0.1 * rng.normal();
                EvalRecord rec = p.evaluate(x);
                if (hooks.tamper) hooks.tamper(rec);
                const auto bad = detail::compare_gradients(p, x, rec);
                if (!bad.empty()) {
                    ++mismatched;
                    failures.push_back(name + ": point " + std::to_string(k) + ": " + bad.front());
                }
            }
            if (mismatched == 0) out << "ok    " << name << ": gradients match finite differences at 10 points\n";
        } catch (const ConfigError& e) {
            failures.push_back(name + ": config error: " + e.what());
        } catch (const std::exception& e) {
            failures.push_back(name + ": " + e.what());
        }
    }
    for (const std::string& f : failures) err << "FAIL  " << f << '\n';
    return failures.empty() ? exit_code::ok : exit_code::check_failed;
}

// ---------------------------------------------------------------------------
// Entry point

inline int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                const Registry& reg = gallery::default_registry(), const Hooks& hooks = {})
{
    CLI::App app{"BFGS-SQP solver for nonsmooth constrained problems"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    auto* list = app.add_subcommand("list", "list registered examples");

    std::string example, config_path, format, out_path, summary_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_iter;
    std::optional<double> opt_tol;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("example", example, "example name");
        sub->add_option("--config", config_path, "config file (key = value lines)");
        sub->add_option("--seed", seed, "dataset and solver seed");
        sub->add_option("--max-iter", max_iter, "solver iteration budget");
        sub->add_option("--opt-tol", opt_tol, "stationarity tolerance");
        sub->allow_extras();
    };
    auto* run = app.add_subcommand("run", "solve one example and write its iterate log");
    add_common(run);
    run->add_option("--format", format, "log format")->check(CLI::IsMember({"json-lines", "csv"}));
    run->add_option("--out", out_path, "log file (default: standard output)");
    run->add_option("--summary", summary_path, "summary file (JSON)");
    auto* check = app.add_subcommand("check", "validate configs, feasible points and gradients");
    add_common(check);

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_code::ok : exit_code::config;
    }

    if (list->parsed()) return cmd_list(reg, out);

    CLI::App* sub = run->parsed() ? run : check;
    const bool checking = sub == check;
    auto build_rc = [&]() {
        RunConfig rc;
        if (!config_path.empty()) read_config_file(rc, config_path);
        if (!example.empty()) rc.example = example;
        const Example* ex = gallery::find_example(reg, rc.example);
        for (const auto& [flag, value] : split_extras(sub->remaining())) set_key(rc, flag_to_key(flag, ex), value);
        if (seed) rc.seed = *seed;
        if (max_iter) rc.solver_cfg["max_iter"] = std::to_string(*max_iter);
        if (opt_tol) rc.solver_cfg["opt_tol"] = format_double(*opt_tol);
        if (!format.empty()) rc.format = format;
        if (!out_path.empty()) rc.out = out_path;
        if (!summary_path.empty()) rc.summary = summary_path;
        return rc;
    };

    if (!checking) {
        RunConfig rc;
        try {
            rc = build_rc();
        } catch (const ConfigError& e) {
            err << "config error: " << e.what() << '\n';
            return exit_code::config;
        }
        return cmd_run(reg, rc, out, err);
    }

    std::vector<RunConfig> targets;
    try {
        RunConfig rc = build_rc();
        if (rc.example.empty()) {
            for (const Example& e : reg) {
                RunConfig t = rc;
                t.example = e.name;
                targets.push_back(std::move(t));
            }
        } else {
            targets.push_back(std::move(rc));
        }
    } catch (const ConfigError& e) {
        err << "FAIL  config error: " << e.what() << '\n';
        return exit_code::check_failed;
    }
    return cmd_check(reg, targets, out, err, hooks);
}

} // namespace ncvx::cli

#endif // NCVX_CLI_HPP
