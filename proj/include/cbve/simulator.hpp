#pragma once

// Exact forward simulation of the finite-activity process and Monte-Carlo
// checks of the Laplace-transform and mean identities.

#include "cbve/moments.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

namespace cbve
{

enum class EventKind
{
    deterministic_atom,
    branch_jump,
};

const char* to_string(EventKind k);

struct PathEvent
{
    double time;
    EventKind kind;
    std::size_t type_source; // 1 or 2 for jumps, 0 for deterministic atoms
    Pair delta;              // state increment
    Pair state;              // state after the event
};

struct PathResult
{
    Pair state;
    std::vector<PathEvent> events;
};

// Path k uses an mt19937_64 seeded with splitmix64(master_seed + (k + 1) * 0x9E3779B97F4A7C15).
struct SeedSpec
{
    std::uint64_t master_seed = 0;

    std::uint64_t path_seed(std::uint64_t path_index) const noexcept;
};

struct MCEstimate
{
    std::size_t n_paths = 0;
    double estimate = 0;
    double std_error = 0;
    double target = 0;
    // Size of the extrapolation correction of the reference target, floored at
    // the rounding level of the reference sweep; used for the score when
    // std_error = 0.
    double target_error = 0;
    double z_score = 0;
};

struct MCOptions
{
    bool parallel = true;
    // Minimum number of cells of the reference grid used for the target.
    std::size_t reference_cells = 20000;
};

// Per-segment tables prepared once per (sf, t) and shared by all paths.
class PathSimulator
{
public:
    PathSimulator(const SpecialForm& sf, double t);

    PathResult run(const Pair& x0, std::uint64_t seed, bool record_events = true) const;

    double horizon() const noexcept { return t_; }

    struct PointTable
    {
        std::vector<SpatialPoint> points;
        std::vector<double> cumulative;
        double total = 0;
    };

    struct Segment
    {
        double t0;
        double t1;
        // dX/ds = M X with M = [[m00, m01], [m10, m11]]
        double m00, m01, m10, m11;
        double growth; // max(0, largest column sum of M)
        std::array<PointTable, 2> kernel;
    };

    struct AtomStep
    {
        double time;
        Pair diag;     // Delta gamma_ii
        Pair incoming; // Delta gamma_ji feeding type i
        std::array<PointTable, 2> jumps;
    };

private:
    double t_;
    std::vector<Segment> segments_;
    std::vector<std::optional<AtomStep>> atoms_; // atom at the right end of each segment
};

PathResult simulate_path(const SpecialForm& sf, const Pair& x0, double t, std::uint64_t seed);

MCEstimate mc_laplace(const SpecialForm& sf,
                      const Pair& x0,
                      double t,
                      const Pair& lambda,
                      std::size_t n_paths,
                      const SeedSpec& seed,
                      const MCOptions& opts = {});

MCEstimate mc_mean(const SpecialForm& sf,
                   const Pair& x0,
                   double t,
                   const Pair& lambda,
                   std::size_t n_paths,
                   const SeedSpec& seed,
                   const MCOptions& opts = {});

// Sample of f(X_t) over paths 0..n-1, in path order.
std::vector<double> sample_paths(const PathSimulator& sim,
                                 const Pair& x0,
                                 std::size_t n_paths,
                                 const SeedSpec& seed,
                                 const std::function<double(const Pair&)>& f,
                                 bool parallel);

// Mean and standard error with compensated summation in index order.
std::pair<double, double> mean_and_std_error(const std::vector<double>& values);

void write_path_csv(std::ostream& os, std::size_t path_id, const Pair& x0, const PathResult& path, bool header);

} // namespace cbve
