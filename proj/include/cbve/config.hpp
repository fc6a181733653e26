#pragma once

// JSON configuration files.
//
//   horizon, grid_cells            base uniform grid (aligned to every breakpoint)
//   form                           "general" (default) or "special"
//   b11 b22 b12 b21                {density: [[t0,t1,v],...], atoms: [[t,mass],...]}
//   c1 c2                          {density: [[t0,t1,v],...]}
//   m1 m2                          {kernel: [[t0,t1,[[z1,z2,w],...]],...],
//                                   atoms: [[t,[[z1,z2,w],...]],...]}
//   gamma11 gamma22 gamma12 gamma21, mu1 mu2   the special-form counterparts
//   run                            optional defaults for command parameters:
//                                  {t, lambda: [a,b], x0: [a,b], paths, seed, refine}

#include "cbve/environment.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace cbve
{

struct RunParams
{
    std::optional<double> t;
    std::optional<Pair> lambda;
    std::optional<Pair> x0;
    std::optional<std::size_t> paths;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> refine;

    bool operator==(const RunParams&) const = default;
};

struct RunConfig
{
    double horizon = 1;
    std::size_t grid_cells = 1;
    bool special = false;
    Environment env = Environment::zero(1, 1);
    SpecialForm sf = SpecialForm::zero(1, 1);
    RunParams run;

    const TimeGrid& grid() const noexcept { return special ? sf.grid : env.grid; }

    bool operator==(const RunConfig&) const = default;
};

// Throws ConfigError naming the offending field ("b11.density[2][1]") or the
// line and column of a syntax error.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical JSON: every measure key present, parts in normalized order.
std::string emit_config(const RunConfig& cfg);

RunConfig make_config(const Environment& env, std::size_t grid_cells);
RunConfig make_config(const SpecialForm& sf, std::size_t grid_cells);

} // namespace cbve
