// cbve: command-line front end.

#include "cbve/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace
{

struct Flags
{
    std::string config;
    std::optional<double> t;
    std::string lambda;
    std::string x0;
    std::optional<std::size_t> paths;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> refine;
    std::string out;
};

void add_flags(CLI::App* sub, Flags& f, bool with_x0)
{
    sub->add_option("--config", f.config, "JSON config file")->required();
    sub->add_option("--t", f.t, "terminal time (default: horizon)");
    sub->add_option("--lambda", f.lambda, "terminal argument a,b");
    if (with_x0)
    {
        sub->add_option("--x0", f.x0, "initial state a,b");
        sub->add_option("--paths", f.paths, "number of simulated paths");
        sub->add_option("--seed", f.seed, "master seed");
    }
    sub->add_option("--refine", f.refine, "grid refinement factor");
    sub->add_option("--out", f.out, "output file (default: stdout)");
}

cbve::CommandOptions to_options(const Flags& f)
{
    cbve::CommandOptions opts;
    opts.overrides.t = f.t;
    if (!f.lambda.empty())
        opts.overrides.lambda = cbve::parse_pair(f.lambda);
    if (!f.x0.empty())
        opts.overrides.x0 = cbve::parse_pair(f.x0);
    opts.overrides.paths = f.paths;
    opts.overrides.seed = f.seed;
    opts.overrides.refine = f.refine;
    opts.out_path = f.out;
    return opts;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cumulant semigroups of two-type branching processes in varying environments"};
    app.require_subcommand(1);

    Flags flags;
    auto* validate = app.add_subcommand("validate", "check admissibility and list bottlenecks");
    validate->add_option("--config", flags.config, "JSON config file")->required();
    auto* solve = app.add_subcommand("solve", "CSV of r, v1, v2");
    add_flags(solve, flags, false);
    auto* moments = app.add_subcommand("moments", "CSV of r, pi1, pi2");
    add_flags(moments, flags, false);
    auto* verify = app.add_subcommand("verify", "run the checks relevant to the config");
    add_flags(verify, flags, true);
    auto* simulate = app.add_subcommand("simulate", "path CSV for a special-form config");
    add_flags(simulate, flags, true);
    auto* approx = app.add_subcommand("approx", "sup-gap table of the finite-activity ladder");
    add_flags(approx, flags, false);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : cbve::exit_config;
    }

    try
    {
        const auto cfg = cbve::load_config(flags.config);
        if (validate->parsed())
            return cbve::cmd_validate(cfg, std::cout);
        const auto opts = to_options(flags);
        if (solve->parsed())
            return cbve::cmd_solve(cfg, opts, std::cout);
        if (moments->parsed())
            return cbve::cmd_moments(cfg, opts, std::cout);
        if (verify->parsed())
            return cbve::cmd_verify(cfg, opts, std::cout);
        if (simulate->parsed())
            return cbve::cmd_simulate(cfg, opts, std::cout);
        return cbve::cmd_approx(cfg, opts, std::cout);
    }
    catch (const std::exception& e)
    {
        return cbve::report_failure(e, std::cerr);
    }
}
