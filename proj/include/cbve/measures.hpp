#pragma once

// Cadlag bounded-variation functions on a finite horizon, represented by the
// Stieltjes measures they induce: a piecewise-constant density plus a finite
// list of time atoms. Integrals follow the right-closed convention
// int_r^t = int_{(r,t]}.

#include "cbve/types.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace cbve
{

//---------------------------------------------------------------------------//
// TimeGrid
//---------------------------------------------------------------------------//

class TimeGrid
{
public:
    // Strictly increasing, nodes.front() == 0, at least two nodes.
    explicit TimeGrid(std::vector<double> nodes);

    static TimeGrid uniform(double horizon, std::size_t cells);

    // Adds nodes, snapping any that lie within tolerance() of an existing node
    // onto the added value so user-specified times are represented exactly.
    TimeGrid with_nodes(std::span<const double> extra) const;

    // Nodes strictly below t (up to tolerance) followed by t itself.
    TimeGrid truncated(double t) const;

    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t cells() const noexcept { return nodes_.size() - 1; }
    double horizon() const noexcept { return nodes_.back(); }
    double operator[](std::size_t k) const noexcept { return nodes_[k]; }
    double width(std::size_t cell) const noexcept { return nodes_[cell + 1] - nodes_[cell]; }
    std::span<const double> nodes() const noexcept { return nodes_; }

    // Absolute tolerance for deciding whether a time is a node.
    double tolerance() const noexcept;

    std::optional<std::size_t> find(double t) const;
    // Like find() but throws DomainError when t is not a node.
    std::size_t index_of(double t) const;

    bool operator==(const TimeGrid&) const = default;

private:
    std::vector<double> nodes_;
};

TimeGrid refine(const TimeGrid& grid, std::size_t factor);

//---------------------------------------------------------------------------//
// StieltjesMeasure
//---------------------------------------------------------------------------//

enum class Monotonicity
{
    none,
    nondecreasing,
};

struct DensityPiece
{
    double t0;
    double t1;
    double value; // mass per unit time on [t0, t1)

    bool operator==(const DensityPiece&) const = default;
};

struct Atom
{
    double time;
    double mass;

    bool operator==(const Atom&) const = default;
};

class StieltjesMeasure
{
public:
    // The zero measure on (0, horizon].
    explicit StieltjesMeasure(double horizon = 1.0);

    // Overlapping pieces add; equal-time atoms merge; zero parts are dropped.
    StieltjesMeasure(double horizon,
                     std::vector<DensityPiece> density,
                     std::vector<Atom> atoms,
                     Monotonicity monotonicity = Monotonicity::none);

    double horizon() const noexcept { return horizon_; }
    const std::vector<DensityPiece>& pieces() const noexcept { return pieces_; }
    const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    Monotonicity monotonicity() const noexcept { return monotonicity_; }

    bool is_zero() const noexcept { return pieces_.empty() && atoms_.empty(); }
    bool is_nonnegative() const noexcept;

    // Density on the piece containing t (pieces are half-open [t0, t1)).
    double density_at(double t) const;
    // Mass of the atom at t (0 when there is none); `tol` absorbs rounding.
    double atom_at(double t, double tol = 0.0) const;

    // Exact mass of the density part over [a, b].
    double density_mass(double a, double b) const;

    // Piece endpoints and atom times, sorted and deduplicated.
    std::vector<double> breakpoints() const;

    StieltjesMeasure continuous_part() const;
    StieltjesMeasure atomic_part() const;
    // |density| and |atom mass|: the total-variation measure.
    StieltjesMeasure variation() const;
    StieltjesMeasure scaled(double factor) const;
    StieltjesMeasure with_monotonicity(Monotonicity m) const;

    friend StieltjesMeasure operator+(const StieltjesMeasure& a, const StieltjesMeasure& b);
    friend StieltjesMeasure operator-(const StieltjesMeasure& a, const StieltjesMeasure& b);

    bool operator==(const StieltjesMeasure&) const = default;

private:
    double horizon_;
    std::vector<DensityPiece> pieces_;
    std::vector<Atom> atoms_;
    Monotonicity monotonicity_ = Monotonicity::none;
};

// beta(t) = measure((0, t]); beta(0) = 0.
double cumulative(const StieltjesMeasure& measure, double t);

// |measure|((0, t]).
double total_variation(const StieltjesMeasure& measure, double t);

// int_{(r,t]} f(s) measure(ds) for f given at the grid nodes. The density part
// on each cell uses the endpoint rule; atoms are evaluated exactly at f(atom).
double integrate_grid_function(const StieltjesMeasure& measure,
                               const TimeGrid& grid,
                               std::span<const double> f,
                               double r,
                               double t,
                               EndpointRule rule = EndpointRule::right);

// Exact density mass of every grid cell.
std::vector<double> cell_masses(const StieltjesMeasure& measure, const TimeGrid& grid);

// Atom masses indexed by grid node; throws ContractViolation if an atom is not a node.
std::vector<double> node_atoms(const StieltjesMeasure& measure, const TimeGrid& grid);

//---------------------------------------------------------------------------//
// Jump measures with finite discrete spatial support
//---------------------------------------------------------------------------//

struct SpatialPoint
{
    double z1;
    double z2;
    double weight;

    Pair z() const noexcept { return {z1, z2}; }
    bool operator==(const SpatialPoint&) const = default;
};

class DiscreteSpatialMeasure
{
public:
    DiscreteSpatialMeasure() = default;
    // Points must lie in R_+^2 minus the origin with finite positive weight.
    // Coincident points merge.
    explicit DiscreteSpatialMeasure(std::vector<SpatialPoint> points);

    const std::vector<SpatialPoint>& points() const noexcept { return points_; }
    bool empty() const noexcept { return points_.empty(); }
    double total_weight() const noexcept;

    // sum_p fn(z_p) w_p
    double integrate(const std::function<double(const Pair&)>& fn) const;

    DiscreteSpatialMeasure scaled(double factor) const;

    bool operator==(const DiscreteSpatialMeasure&) const = default;

private:
    std::vector<SpatialPoint> points_;
};

struct KernelPiece
{
    double t0;
    double t1;
    DiscreteSpatialMeasure rate; // weights per unit time on [t0, t1)

    bool operator==(const KernelPiece&) const = default;
};

struct JumpAtom
{
    double time;
    DiscreteSpatialMeasure mass;

    bool operator==(const JumpAtom&) const = default;
};

class JumpMeasure
{
public:
    explicit JumpMeasure(double horizon = 1.0);
    // Overlapping pieces superpose; equal-time atoms merge; empty parts are dropped.
    JumpMeasure(double horizon, std::vector<KernelPiece> kernel, std::vector<JumpAtom> atoms);

    double horizon() const noexcept { return horizon_; }
    const std::vector<KernelPiece>& kernel() const noexcept { return kernel_; }
    const std::vector<JumpAtom>& atoms() const noexcept { return atoms_; }
    bool is_zero() const noexcept { return kernel_.empty() && atoms_.empty(); }

    // Rate kernel on the piece containing t, or nullptr.
    const DiscreteSpatialMeasure* kernel_at(double t) const;
    // Atom at t (within tol), or nullptr.
    const DiscreteSpatialMeasure* atom_at(double t, double tol = 0.0) const;

    std::vector<double> breakpoints() const;

    // Time measure of int fn(z) m(ds, dz): density per piece plus atoms.
    StieltjesMeasure moment_measure(const std::function<double(const Pair&)>& fn) const;

    // Rewrites every point (z, w) -> fn(z, w); points with zero weight are dropped.
    JumpMeasure mapped(const std::function<SpatialPoint(const SpatialPoint&)>& fn) const;

    friend JumpMeasure operator+(const JumpMeasure& a, const JumpMeasure& b);

    bool operator==(const JumpMeasure&) const = default;

private:
    double horizon_;
    std::vector<KernelPiece> kernel_;
    std::vector<JumpAtom> atoms_;
};

// Kernel mass of every grid cell: each point weighted by rate times overlap.
std::vector<std::vector<SpatialPoint>> cell_kernel_masses(const JumpMeasure& measure,
                                                          const TimeGrid& grid);

// Time-atom points indexed by grid node (empty when none); throws
// ContractViolation if an atom is not a node.
std::vector<std::vector<SpatialPoint>> node_jump_atoms(const JumpMeasure& measure,
                                                       const TimeGrid& grid);

} // namespace cbve
