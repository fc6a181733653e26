#pragma once

// Command implementations behind the cbve executable. Each command writes its
// report or CSV to `out`, diagnostics to `err`, and returns the exit code.

#include "cbve/config.hpp"

#include <exception>
#include <iosfwd>
#include <string>

namespace cbve
{

enum ExitCode : int
{
    exit_ok = 0,
    exit_config = 2,
    exit_admissibility = 3,
    exit_numerical = 4,
    exit_verification = 5,
};

// Command-line overrides; unset fields fall back to the config's run section.
struct CommandOptions
{
    RunParams overrides;
    std::string out_path; // empty: write to the given stream
};

// Resolved parameters with defaults: t = horizon, lambda = (1, 1), x0 = (1, 1),
// paths = 10000, seed = 1, refine = 1.
struct ResolvedParams
{
    double t;
    Pair lambda;
    Pair x0;
    std::size_t paths;
    std::uint64_t seed;
    std::size_t refine;
};

ResolvedParams resolve(const RunConfig& cfg, const CommandOptions& opts);

// Maps an exception to the documented exit code and prints it to err.
int report_failure(const std::exception& e, std::ostream& err);

int cmd_validate(const RunConfig& cfg, std::ostream& out);
int cmd_solve(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out);
int cmd_moments(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out);
int cmd_verify(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out);
int cmd_simulate(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out);
int cmd_approx(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out);

// Parses "a,b".
Pair parse_pair(const std::string& text);

} // namespace cbve
