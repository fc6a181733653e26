#include "cbve/cli.hpp"

#include "cbve/log.hpp"
#include "cbve/simulator.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace cbve
{
namespace
{

// Runs fn with the --out file when one was given, otherwise with `out`.
template <class F>
int with_output(const CommandOptions& opts, std::ostream& out, F&& fn)
{
    if (opts.out_path.empty())
        return fn(out);
    std::ofstream file(opts.out_path);
    if (!file)
        throw ConfigError("cannot open output file '" + opts.out_path + "'");
    return fn(file);
}

Environment general_view(const RunConfig& cfg)
{
    return cfg.special ? special_to_general(cfg.sf) : cfg.env;
}

std::size_t refine_factor(const ResolvedParams& p)
{
    if (p.refine < 1)
        throw DomainError("refinement factor must be at least 1");
    return p.refine;
}

struct VerifyLine
{
    std::ostream& out;
    bool all_pass = true;

    void operator()(const std::string& name, bool pass, const std::string& detail)
    {
        out << (pass ? "PASS " : "FAIL ") << name << ' ' << detail << '\n';
        all_pass = all_pass && pass;
    }
};

std::string fmt(const char* label, double value, const char* bound_label, double bound)
{
    std::ostringstream os;
    os << std::setprecision(6) << label << '=' << value << ' ' << bound_label << '=' << bound;
    return os.str();
}

} // namespace

Pair parse_pair(const std::string& text)
{
    std::istringstream in(text);
    Pair p{};
    char comma = 0;
    if (!(in >> p[0] >> comma >> p[1]) || comma != ',' || !(in >> std::ws).eof())
        throw ConfigError("expected a pair 'a,b', found '" + text + "'");
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]))
        throw ConfigError("pair entries must be finite: '" + text + "'");
    return p;
}

ResolvedParams resolve(const RunConfig& cfg, const CommandOptions& opts)
{
    const auto& o = opts.overrides;
    const auto& r = cfg.run;
    ResolvedParams p;
    p.t = o.t.value_or(r.t.value_or(cfg.horizon));
    p.lambda = o.lambda.value_or(r.lambda.value_or(Pair{1.0, 1.0}));
    p.x0 = o.x0.value_or(r.x0.value_or(Pair{1.0, 1.0}));
    p.paths = o.paths.value_or(r.paths.value_or(10000));
    p.seed = o.seed.value_or(r.seed.value_or(1));
    p.refine = o.refine.value_or(r.refine.value_or(1));
    return p;
}

int report_failure(const std::exception& e, std::ostream& err)
{
    int code = exit_numerical;
    const char* kind = "numerical failure";
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e))
    {
        code = exit_config;
        kind = "configuration error";
    }
    else if (dynamic_cast<const AdmissibilityError*>(&e) || dynamic_cast<const ContractViolation*>(&e))
    {
        code = exit_admissibility;
        kind = "admissibility failure";
    }
    err << "cbve: " << kind << ": " << e.what() << '\n';
    return code;
}

int cmd_validate(const RunConfig& cfg, std::ostream& out)
{
    out << std::setprecision(17);
    if (cfg.special)
    {
        const auto violations = special_form_violations(cfg.sf);
        out << "form: special\n";
        for (const auto& v : violations)
            out << "violation: " << v << '\n';
        out << (violations.empty() ? "ok\n" : "not admissible\n");
        return violations.empty() ? exit_ok : exit_admissibility;
    }
    const auto report = validate(cfg.env);
    out << "form: general\n";
    out << "moment: " << report.moment[0] << ' ' << report.moment[1] << '\n';
    out << "delta_max: " << report.delta_max[0] << ' ' << report.delta_max[1] << '\n';
    for (const auto& b : report.bottlenecks)
        out << "bottleneck: time " << b.time << " type " << b.type + 1 << '\n';
    for (const auto& m : report.messages)
        out << "violation: " << m << '\n';
    out << (report.ok ? "ok\n" : "not admissible\n");
    return report.ok ? exit_ok : exit_admissibility;
}

int cmd_solve(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out)
{
    const auto p = resolve(cfg, opts);
    const std::size_t k = refine_factor(p);
    const CumulantSolution sol = cfg.special
                                     ? solve_special_picard(cfg.sf.with_grid(refine(cfg.sf.grid, k)), p.t, p.lambda)
                                     : solve_general(cfg.env.with_grid(refine(cfg.env.grid, k)), p.t, p.lambda);
    log(LogLevel::info, "solve: method ", to_string(sol.method), ", ", sol.grid.cells(), " cells, ",
        sol.clamp_events, " clamps");
    return with_output(opts, out, [&](std::ostream& os) {
        os << std::setprecision(17) << "r,v1,v2\n";
        for (std::size_t n = 0; n < sol.grid.size(); ++n)
            os << sol.grid[n] << ',' << sol.v[n][0] << ',' << sol.v[n][1] << '\n';
        return exit_ok;
    });
}

int cmd_moments(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out)
{
    const auto p = resolve(cfg, opts);
    const std::size_t k = refine_factor(p);
    const Environment env = general_view(cfg);
    const auto sol = solve_moment(env.with_grid(refine(env.grid, k)), p.t, p.lambda);
    return with_output(opts, out, [&](std::ostream& os) {
        os << std::setprecision(17) << "r,pi1,pi2\n";
        for (std::size_t n = 0; n < sol.grid.size(); ++n)
            os << sol.grid[n] << ',' << sol.pi[n][0] << ',' << sol.pi[n][1] << '\n';
        return exit_ok;
    });
}

namespace
{

int verify_to(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out)
{
    const auto p = resolve(cfg, opts);
    const std::size_t k = refine_factor(p);
    VerifyLine line{out};

    if (cfg.special)
    {
        const auto violations = special_form_violations(cfg.sf);
        line("admissible", violations.empty(), "violations=" + std::to_string(violations.size()));
        if (!violations.empty())
            return exit_verification;
    }
    else
    {
        const auto report = validate(cfg.env);
        line("admissible", report.ok, "violations=" + std::to_string(report.messages.size()));
        if (!report.ok)
            return exit_verification;
    }

    const Environment env0 = general_view(cfg);
    const Environment env = env0.with_grid(refine(env0.grid, k));
    const double t = p.t;

    // Off-node split points so that each sub-solve runs on its own grid.
    const double flow = check_flow(env, 0.3137 * t, 0.6171 * t, t, p.lambda);
    line("flow", flow <= 1e-5, fmt("residual", flow, "tol", 1e-5));

    const auto v = solve_general(env, t, p.lambda);
    double worst = -INFINITY;
    const std::size_t K = v.terminal_index();
    for (std::size_t n = 0; n <= K; ++n)
        for (std::size_t i = 0; i < 2; ++i)
            worst = std::max(worst, v.v[n][i] - upper_bound_U(env, i, v.grid[n], t, p.lambda));
    line("upper_bound", worst <= 0, fmt("max(v-U)", worst, "tol", 0.0));

    const Pair lam_abs{std::abs(p.lambda[0]), std::abs(p.lambda[1])};
    const Pair fd_coarse = finite_diff_check(env, t, lam_abs, 1e-2);
    const Pair fd_fine = finite_diff_check(env, t, lam_abs, 1e-3);
    const double coarse = std::max(fd_coarse[0], fd_coarse[1]);
    const double fine = std::max(fd_fine[0], fd_fine[1]);
    line("moment_identity", fine <= 0.2 * coarse + 1e-9, fmt("residual(1e-3)", fine, "residual(1e-2)", coarse));

    if (cfg.special)
    {
        const SpecialForm sf = cfg.sf.with_grid(refine(cfg.sf.grid, k));
        SolverOptions picard_opts;
        picard_opts.record_iterates = true;
        const auto u = solve_special_picard(sf, t, p.lambda, picard_opts);
        const double bound = 2 * norm(p.lambda) * std::exp(special_estimate_rho(sf, t)) + 1e-9;
        double top = 0;
        for (const auto& it : u.iterates)
            for (const auto& x : it)
                top = std::max({top, x[0], x[1]});
        line("picard_bound", top <= bound, fmt("max_iterate", top, "bound", bound));

        SolverOptions euler;
        euler.cell_fixed_point_iters = 1;
        const auto g = solve_general(special_to_general(sf), t, p.lambda, euler);
        double gap = 0;
        for (std::size_t n = 0; n < u.grid.size(); ++n)
            gap = std::max(gap, max_abs_diff(u.v[n], g.v[n]));
        line("special_vs_general", gap <= 1e-8, fmt("gap", gap, "tol", 1e-8));

        const SeedSpec seed{p.seed};
        const auto lap = mc_laplace(cfg.sf, p.x0, t, lam_abs, p.paths, seed);
        line("mc_laplace", std::abs(lap.z_score) <= 3,
             fmt("z", lap.z_score, "estimate", lap.estimate) + " " + fmt("target", lap.target, "se", lap.std_error));
        const auto mean = mc_mean(cfg.sf, p.x0, t, p.lambda, p.paths, seed);
        line("mc_mean", std::abs(mean.z_score) <= 3,
             fmt("z", mean.z_score, "estimate", mean.estimate) + " " + fmt("target", mean.target, "se", mean.std_error));
    }
    return line.all_pass ? exit_ok : exit_verification;
}

} // namespace

int cmd_verify(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out)
{
    return with_output(opts, out, [&](std::ostream& os) { return verify_to(cfg, opts, os); });
}

int cmd_simulate(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out)
{
    if (!cfg.special)
        throw ConfigError("form: simulate needs a special-form config");
    auto p = resolve(cfg, opts);
    if (!opts.overrides.paths && !cfg.run.paths)
        p.paths = 10;
    const PathSimulator sim(cfg.sf, p.t);
    const SeedSpec seed{p.seed};
    return with_output(opts, out, [&](std::ostream& os) {
        for (std::size_t n = 0; n < p.paths; ++n)
            write_path_csv(os, n, p.x0, sim.run(p.x0, seed.path_seed(n)), n == 0);
        return exit_ok;
    });
}

int cmd_approx(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out)
{
    if (cfg.special)
        throw ConfigError("form: approx needs a general config");
    const auto p = resolve(cfg, opts);
    const std::size_t k = refine_factor(p);
    const Environment env = cfg.env.with_grid(refine(cfg.env.grid, k));
    const auto v = solve_general(env, p.t, p.lambda);
    const std::size_t K = v.terminal_index();
    return with_output(opts, out, [&](std::ostream& os) {
        os << std::setprecision(17) << "n,gap\n";
        for (int n = 1; n <= 32; n *= 2)
        {
            const auto vn = solve_general(special_to_general(build_phi_n(env, n)), p.t, p.lambda);
            double gap = 0;
            for (std::size_t m = 0; m <= K; ++m)
                gap = std::max(gap, max_abs_diff(vn.v[m], v.v[m]));
            os << n << ',' << gap << '\n';
        }
        return exit_ok;
    });
}

} // namespace cbve
