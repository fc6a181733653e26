#include "cbve/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace cbve
{
namespace
{

double time_tolerance(double horizon)
{
    return 1e-12 * std::max(1.0, std::abs(horizon));
}

void require_horizon(double horizon)
{
    if (!(std::isfinite(horizon) && horizon > 0))
        throw DomainError("horizon must be finite and positive");
}

void require_same_horizon(double a, double b)
{
    if (a != b)
        throw ContractViolation("measures live on different horizons");
}

// Sorted, deduplicated endpoints of a set of [t0, t1) intervals.
template <class Piece>
std::vector<double> elementary_edges(const std::vector<Piece>& pieces)
{
    std::vector<double> edges;
    edges.reserve(2 * pieces.size());
    for (const auto& p : pieces)
    {
        edges.push_back(p.t0);
        edges.push_back(p.t1);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

template <class Piece>
void check_piece_bounds(const Piece& p, double horizon)
{
    const double tol = time_tolerance(horizon);
    if (!(std::isfinite(p.t0) && std::isfinite(p.t1)) || p.t0 < -tol || p.t1 > horizon + tol
        || !(p.t0 < p.t1))
    {
        std::ostringstream os;
        os << "density piece [" << p.t0 << ", " << p.t1 << ") is not a nonempty subinterval of [0, "
           << horizon << "]";
        throw DomainError(os.str());
    }
}

void check_atom_time(double time, double horizon)
{
    const double tol = time_tolerance(horizon);
    if (!std::isfinite(time) || time <= 0 || time > horizon + tol)
    {
        std::ostringstream os;
        os << "atom time " << time << " outside (0, " << horizon << "]";
        throw DomainError(os.str());
    }
}

} // namespace

//---------------------------------------------------------------------------//
// TimeGrid
//---------------------------------------------------------------------------//

TimeGrid::TimeGrid(std::vector<double> nodes) : nodes_(std::move(nodes))
{
    if (nodes_.size() < 2)
        throw DomainError("time grid needs at least two nodes");
    if (nodes_.front() != 0.0)
        throw DomainError("time grid must start at 0");
    for (std::size_t k = 0; k < nodes_.size(); ++k)
    {
        if (!std::isfinite(nodes_[k]))
            throw DomainError("time grid nodes must be finite");
        if (k > 0 && !(nodes_[k] > nodes_[k - 1]))
            throw DomainError("time grid nodes must be strictly increasing");
    }
}

TimeGrid TimeGrid::uniform(double horizon, std::size_t cells)
{
    require_horizon(horizon);
    if (cells == 0)
        throw DomainError("uniform grid needs at least one cell");
    std::vector<double> nodes(cells + 1);
    for (std::size_t k = 0; k <= cells; ++k)
        nodes[k] = (static_cast<double>(k) * horizon) / static_cast<double>(cells);
    nodes.back() = horizon;
    return TimeGrid(std::move(nodes));
}

double TimeGrid::tolerance() const noexcept
{
    return time_tolerance(horizon());
}

std::optional<std::size_t> TimeGrid::find(double t) const
{
    const double tol = tolerance();
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), t - tol);
    if (it != nodes_.end() && std::abs(*it - t) <= tol)
        return static_cast<std::size_t>(it - nodes_.begin());
    return std::nullopt;
}

std::size_t TimeGrid::index_of(double t) const
{
    if (auto k = find(t))
        return *k;
    std::ostringstream os;
    os << "time " << t << " is not a grid node";
    throw DomainError(os.str());
}

TimeGrid TimeGrid::with_nodes(std::span<const double> extra) const
{
    const double tol = tolerance();
    std::vector<double> nodes = nodes_;
    for (double e : extra)
    {
        if (!std::isfinite(e) || e < -tol || e > horizon() + tol)
        {
            std::ostringstream os;
            os << "time " << e << " outside [0, " << horizon() << "]";
            throw DomainError(os.str());
        }
        if (std::abs(e) <= tol)
            continue;
        auto it = std::lower_bound(nodes.begin(), nodes.end(), e - tol);
        if (it != nodes.end() && std::abs(*it - e) <= tol)
            *it = e;
        else
            nodes.insert(it, e);
    }
    // Snapping may reorder values within tolerance; dedupe what is left.
    std::sort(nodes.begin(), nodes.end());
    std::vector<double> out;
    out.reserve(nodes.size());
    for (double x : nodes)
        if (out.empty() || x - out.back() > tol)
            out.push_back(x);
    out.front() = 0.0;
    return TimeGrid(std::move(out));
}

TimeGrid TimeGrid::truncated(double t) const
{
    const double tol = tolerance();
    if (!std::isfinite(t) || t < -tol || t > horizon() + tol)
    {
        std::ostringstream os;
        os << "time " << t << " outside [0, " << horizon() << "]";
        throw DomainError(os.str());
    }
    if (t <= tol)
        throw DomainError("truncation point must be positive");
    std::vector<double> nodes;
    for (double x : nodes_)
    {
        if (x < t - tol)
            nodes.push_back(x);
        else
            break;
    }
    nodes.push_back(t);
    return TimeGrid(std::move(nodes));
}

TimeGrid refine(const TimeGrid& grid, std::size_t factor)
{
    if (factor == 0)
        throw DomainError("refinement factor must be positive");
    if (factor == 1)
        return grid;
    std::vector<double> nodes;
    nodes.reserve(grid.cells() * factor + 1);
    for (std::size_t k = 0; k < grid.cells(); ++k)
    {
        const double a = grid[k];
        const double h = grid.width(k);
        nodes.push_back(a);
        for (std::size_t j = 1; j < factor; ++j)
            nodes.push_back(a + h * static_cast<double>(j) / static_cast<double>(factor));
    }
    nodes.push_back(grid.horizon());
    return TimeGrid(std::move(nodes));
}

//---------------------------------------------------------------------------//
// StieltjesMeasure
//---------------------------------------------------------------------------//

StieltjesMeasure::StieltjesMeasure(double horizon) : horizon_(horizon)
{
    require_horizon(horizon);
}

StieltjesMeasure::StieltjesMeasure(double horizon,
                                   std::vector<DensityPiece> density,
                                   std::vector<Atom> atoms,
                                   Monotonicity monotonicity)
    : horizon_(horizon), monotonicity_(monotonicity)
{
    require_horizon(horizon);
    for (const auto& p : density)
    {
        check_piece_bounds(p, horizon);
        if (!std::isfinite(p.value))
            throw DomainError("density values must be finite");
    }

    const auto edges = elementary_edges(density);
    for (std::size_t k = 0; k + 1 < edges.size(); ++k)
    {
        const double a = edges[k];
        const double b = edges[k + 1];
        double value = 0;
        for (const auto& p : density)
            if (p.t0 <= a && p.t1 >= b)
                value += p.value;
        if (value == 0)
            continue;
        if (!pieces_.empty() && pieces_.back().t1 == a && pieces_.back().value == value)
            pieces_.back().t1 = b;
        else
            pieces_.push_back({a, b, value});
    }

    for (const auto& atom : atoms)
    {
        check_atom_time(atom.time, horizon);
        if (!std::isfinite(atom.mass))
            throw DomainError("atom masses must be finite");
    }
    std::stable_sort(atoms.begin(), atoms.end(),
                     [](const Atom& x, const Atom& y) { return x.time < y.time; });
    for (const auto& atom : atoms)
    {
        if (!atoms_.empty() && atoms_.back().time == atom.time)
            atoms_.back().mass += atom.mass;
        else
            atoms_.push_back(atom);
    }
    std::erase_if(atoms_, [](const Atom& a) { return a.mass == 0; });

    if (monotonicity_ == Monotonicity::nondecreasing && !is_nonnegative())
        throw ContractViolation("nondecreasing measure has negative density or atom mass");
}

bool StieltjesMeasure::is_nonnegative() const noexcept
{
    return std::all_of(pieces_.begin(), pieces_.end(), [](const auto& p) { return p.value >= 0; })
        && std::all_of(atoms_.begin(), atoms_.end(), [](const auto& a) { return a.mass >= 0; });
}

double StieltjesMeasure::density_at(double t) const
{
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                               [](double x, const DensityPiece& p) { return x < p.t1; });
    if (it != pieces_.end() && it->t0 <= t)
        return it->value;
    return 0;
}

double StieltjesMeasure::atom_at(double t, double tol) const
{
    auto it = std::lower_bound(atoms_.begin(), atoms_.end(), t - tol,
                               [](const Atom& a, double x) { return a.time < x; });
    if (it != atoms_.end() && std::abs(it->time - t) <= tol)
        return it->mass;
    return 0;
}

double StieltjesMeasure::density_mass(double a, double b) const
{
    double mass = 0;
    if (!(b > a))
        return mass;
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), a,
                               [](double x, const DensityPiece& p) { return x < p.t1; });
    for (; it != pieces_.end() && it->t0 < b; ++it)
    {
        const double lo = std::max(a, it->t0);
        const double hi = std::min(b, it->t1);
        if (hi > lo)
            mass += it->value * (hi - lo);
    }
    return mass;
}

std::vector<double> StieltjesMeasure::breakpoints() const
{
    std::vector<double> out = elementary_edges(pieces_);
    for (const auto& a : atoms_)
        out.push_back(a.time);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

StieltjesMeasure StieltjesMeasure::continuous_part() const
{
    return StieltjesMeasure(horizon_, pieces_, {}, monotonicity_);
}

StieltjesMeasure StieltjesMeasure::atomic_part() const
{
    return StieltjesMeasure(horizon_, {}, atoms_, monotonicity_);
}

StieltjesMeasure StieltjesMeasure::variation() const
{
    auto pieces = pieces_;
    auto atoms = atoms_;
    for (auto& p : pieces)
        p.value = std::abs(p.value);
    for (auto& a : atoms)
        a.mass = std::abs(a.mass);
    return StieltjesMeasure(horizon_, std::move(pieces), std::move(atoms),
                            Monotonicity::nondecreasing);
}

StieltjesMeasure StieltjesMeasure::scaled(double factor) const
{
    auto pieces = pieces_;
    auto atoms = atoms_;
    for (auto& p : pieces)
        p.value *= factor;
    for (auto& a : atoms)
        a.mass *= factor;
    const auto mono = factor >= 0 ? monotonicity_ : Monotonicity::none;
    return StieltjesMeasure(horizon_, std::move(pieces), std::move(atoms), mono);
}

StieltjesMeasure StieltjesMeasure::with_monotonicity(Monotonicity m) const
{
    return StieltjesMeasure(horizon_, pieces_, atoms_, m);
}

StieltjesMeasure operator+(const StieltjesMeasure& a, const StieltjesMeasure& b)
{
    require_same_horizon(a.horizon_, b.horizon_);
    auto pieces = a.pieces_;
    pieces.insert(pieces.end(), b.pieces_.begin(), b.pieces_.end());
    auto atoms = a.atoms_;
    atoms.insert(atoms.end(), b.atoms_.begin(), b.atoms_.end());
    const bool mono = a.monotonicity_ == Monotonicity::nondecreasing
                   && b.monotonicity_ == Monotonicity::nondecreasing;
    return StieltjesMeasure(a.horizon_, std::move(pieces), std::move(atoms),
                            mono ? Monotonicity::nondecreasing : Monotonicity::none);
}

StieltjesMeasure operator-(const StieltjesMeasure& a, const StieltjesMeasure& b)
{
    return a.with_monotonicity(Monotonicity::none) + b.scaled(-1.0);
}

//---------------------------------------------------------------------------//

namespace
{
void require_time_in_horizon(const StieltjesMeasure& measure, double t)
{
    const double tol = time_tolerance(measure.horizon());
    if (!std::isfinite(t) || t < -tol || t > measure.horizon() + tol)
    {
        std::ostringstream os;
        os << "time " << t << " outside [0, " << measure.horizon() << "]";
        throw DomainError(os.str());
    }
}
} // namespace

double cumulative(const StieltjesMeasure& measure, double t)
{
    require_time_in_horizon(measure, t);
    double value = measure.density_mass(0.0, t);
    for (const auto& a : measure.atoms())
    {
        if (a.time > t)
            break;
        value += a.mass;
    }
    return value;
}

double total_variation(const StieltjesMeasure& measure, double t)
{
    require_time_in_horizon(measure, t);
    double value = 0;
    for (const auto& p : measure.pieces())
    {
        const double hi = std::min(t, p.t1);
        if (hi > p.t0)
            value += std::abs(p.value) * (hi - p.t0);
    }
    for (const auto& a : measure.atoms())
    {
        if (a.time > t)
            break;
        value += std::abs(a.mass);
    }
    return value;
}

std::vector<double> cell_masses(const StieltjesMeasure& measure, const TimeGrid& grid)
{
    std::vector<double> masses(grid.cells(), 0.0);
    const auto& pieces = measure.pieces();
    std::size_t p = 0;
    for (std::size_t k = 0; k < grid.cells(); ++k)
    {
        const double a = grid[k];
        const double b = grid[k + 1];
        while (p < pieces.size() && pieces[p].t1 <= a)
            ++p;
        double mass = 0;
        for (std::size_t q = p; q < pieces.size() && pieces[q].t0 < b; ++q)
        {
            const double lo = std::max(a, pieces[q].t0);
            const double hi = std::min(b, pieces[q].t1);
            if (hi > lo)
                mass += pieces[q].value * (hi - lo);
        }
        masses[k] = mass;
    }
    return masses;
}

std::vector<double> node_atoms(const StieltjesMeasure& measure, const TimeGrid& grid)
{
    std::vector<double> atoms(grid.size(), 0.0);
    for (const auto& a : measure.atoms())
    {
        if (a.time > grid.horizon() + grid.tolerance())
            break;
        auto k = grid.find(a.time);
        if (!k)
        {
            std::ostringstream os;
            os << "atom at " << a.time << " is not a grid node";
            throw ContractViolation(os.str());
        }
        atoms[*k] += a.mass;
    }
    return atoms;
}

double integrate_grid_function(const StieltjesMeasure& measure,
                               const TimeGrid& grid,
                               std::span<const double> f,
                               double r,
                               double t,
                               EndpointRule rule)
{
    if (f.size() != grid.size())
        throw ContractViolation("grid function size does not match the grid");
    if (r > t)
        throw DomainError("integration interval (r, t] needs r <= t");
    const std::size_t ir = grid.index_of(r);
    const std::size_t it = grid.index_of(t);
    for (std::size_t k = ir; k <= it; ++k)
        if (!std::isfinite(f[k]))
            throw ContractViolation("grid function undefined at node " + std::to_string(k));

    const auto atoms = node_atoms(measure, grid);
    double value = 0;
    for (std::size_t k = ir; k < it; ++k)
    {
        const double mass = measure.density_mass(grid[k], grid[k + 1]);
        const double sample = rule == EndpointRule::right ? f[k + 1] : 0.5 * (f[k] + f[k + 1]);
        value += mass * sample + atoms[k + 1] * f[k + 1];
    }
    return value;
}

//---------------------------------------------------------------------------//
// Spatial and jump measures
//---------------------------------------------------------------------------//

DiscreteSpatialMeasure::DiscreteSpatialMeasure(std::vector<SpatialPoint> points)
{
    for (const auto& p : points)
    {
        if (!(std::isfinite(p.z1) && std::isfinite(p.z2) && p.z1 >= 0 && p.z2 >= 0))
            throw DomainError("jump sizes must be finite and nonnegative");
        if (p.z1 == 0 && p.z2 == 0)
            throw DomainError("jump measure has a point at the origin");
        if (!(std::isfinite(p.weight) && p.weight > 0))
            throw DomainError("jump weights must be finite and positive");
    }
    std::sort(points.begin(), points.end(), [](const SpatialPoint& a, const SpatialPoint& b) {
        return a.z1 < b.z1 || (a.z1 == b.z1 && a.z2 < b.z2);
    });
    for (const auto& p : points)
    {
        if (!points_.empty() && points_.back().z1 == p.z1 && points_.back().z2 == p.z2)
            points_.back().weight += p.weight;
        else
            points_.push_back(p);
    }
}

double DiscreteSpatialMeasure::total_weight() const noexcept
{
    double w = 0;
    for (const auto& p : points_)
        w += p.weight;
    return w;
}

double DiscreteSpatialMeasure::integrate(const std::function<double(const Pair&)>& fn) const
{
    double s = 0;
    for (const auto& p : points_)
        s += fn(p.z()) * p.weight;
    return s;
}

DiscreteSpatialMeasure DiscreteSpatialMeasure::scaled(double factor) const
{
    if (factor < 0 || !std::isfinite(factor))
        throw DomainError("spatial measures can only be scaled by a finite nonnegative factor");
    if (factor == 0)
        return {};
    auto pts = points_;
    for (auto& p : pts)
        p.weight *= factor;
    return DiscreteSpatialMeasure(std::move(pts));
}

JumpMeasure::JumpMeasure(double horizon) : horizon_(horizon)
{
    require_horizon(horizon);
}

JumpMeasure::JumpMeasure(double horizon, std::vector<KernelPiece> kernel, std::vector<JumpAtom> atoms)
    : horizon_(horizon)
{
    require_horizon(horizon);
    for (const auto& p : kernel)
        check_piece_bounds(p, horizon);

    const auto edges = elementary_edges(kernel);
    for (std::size_t k = 0; k + 1 < edges.size(); ++k)
    {
        const double a = edges[k];
        const double b = edges[k + 1];
        std::vector<SpatialPoint> pts;
        for (const auto& p : kernel)
            if (p.t0 <= a && p.t1 >= b)
                pts.insert(pts.end(), p.rate.points().begin(), p.rate.points().end());
        if (pts.empty())
            continue;
        DiscreteSpatialMeasure rate(std::move(pts));
        if (!kernel_.empty() && kernel_.back().t1 == a && kernel_.back().rate == rate)
            kernel_.back().t1 = b;
        else
            kernel_.push_back({a, b, std::move(rate)});
    }

    for (const auto& atom : atoms)
        check_atom_time(atom.time, horizon);
    std::stable_sort(atoms.begin(), atoms.end(),
                     [](const JumpAtom& x, const JumpAtom& y) { return x.time < y.time; });
    for (auto& atom : atoms)
    {
        if (atom.mass.empty())
            continue;
        if (!atoms_.empty() && atoms_.back().time == atom.time)
        {
            auto pts = atoms_.back().mass.points();
            pts.insert(pts.end(), atom.mass.points().begin(), atom.mass.points().end());
            atoms_.back().mass = DiscreteSpatialMeasure(std::move(pts));
        }
        else
        {
            atoms_.push_back(std::move(atom));
        }
    }
}

const DiscreteSpatialMeasure* JumpMeasure::kernel_at(double t) const
{
    auto it = std::upper_bound(kernel_.begin(), kernel_.end(), t,
                               [](double x, const KernelPiece& p) { return x < p.t1; });
    if (it != kernel_.end() && it->t0 <= t)
        return &it->rate;
    return nullptr;
}

const DiscreteSpatialMeasure* JumpMeasure::atom_at(double t, double tol) const
{
    auto it = std::lower_bound(atoms_.begin(), atoms_.end(), t - tol,
                               [](const JumpAtom& a, double x) { return a.time < x; });
    if (it != atoms_.end() && std::abs(it->time - t) <= tol)
        return &it->mass;
    return nullptr;
}

std::vector<double> JumpMeasure::breakpoints() const
{
    std::vector<double> out = elementary_edges(kernel_);
    for (const auto& a : atoms_)
        out.push_back(a.time);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

StieltjesMeasure JumpMeasure::moment_measure(const std::function<double(const Pair&)>& fn) const
{
    std::vector<DensityPiece> pieces;
    pieces.reserve(kernel_.size());
    for (const auto& p : kernel_)
        pieces.push_back({p.t0, p.t1, p.rate.integrate(fn)});
    std::vector<Atom> atoms;
    atoms.reserve(atoms_.size());
    for (const auto& a : atoms_)
        atoms.push_back({a.time, a.mass.integrate(fn)});
    return StieltjesMeasure(horizon_, std::move(pieces), std::move(atoms));
}

JumpMeasure JumpMeasure::mapped(const std::function<SpatialPoint(const SpatialPoint&)>& fn) const
{
    auto map_measure = [&](const DiscreteSpatialMeasure& m) {
        std::vector<SpatialPoint> pts;
        for (const auto& p : m.points())
        {
            auto q = fn(p);
            if (q.weight != 0)
                pts.push_back(q);
        }
        return DiscreteSpatialMeasure(std::move(pts));
    };
    std::vector<KernelPiece> kernel;
    for (const auto& p : kernel_)
        kernel.push_back({p.t0, p.t1, map_measure(p.rate)});
    std::vector<JumpAtom> atoms;
    for (const auto& a : atoms_)
        atoms.push_back({a.time, map_measure(a.mass)});
    return JumpMeasure(horizon_, std::move(kernel), std::move(atoms));
}

JumpMeasure operator+(const JumpMeasure& a, const JumpMeasure& b)
{
    require_same_horizon(a.horizon_, b.horizon_);
    auto kernel = a.kernel_;
    kernel.insert(kernel.end(), b.kernel_.begin(), b.kernel_.end());
    auto atoms = a.atoms_;
    atoms.insert(atoms.end(), b.atoms_.begin(), b.atoms_.end());
    return JumpMeasure(a.horizon_, std::move(kernel), std::move(atoms));
}

std::vector<std::vector<SpatialPoint>> cell_kernel_masses(const JumpMeasure& measure,
                                                          const TimeGrid& grid)
{
    std::vector<std::vector<SpatialPoint>> cells(grid.cells());
    const auto& kernel = measure.kernel();
    std::size_t p = 0;
    for (std::size_t k = 0; k < grid.cells(); ++k)
    {
        const double a = grid[k];
        const double b = grid[k + 1];
        while (p < kernel.size() && kernel[p].t1 <= a)
            ++p;
        for (std::size_t q = p; q < kernel.size() && kernel[q].t0 < b; ++q)
        {
            const double len = std::min(b, kernel[q].t1) - std::max(a, kernel[q].t0);
            if (!(len > 0))
                continue;
            for (const auto& pt : kernel[q].rate.points())
                cells[k].push_back({pt.z1, pt.z2, pt.weight * len});
        }
        if (cells[k].size() > 1)
            cells[k] = DiscreteSpatialMeasure(std::move(cells[k])).points();
    }
    return cells;
}

std::vector<std::vector<SpatialPoint>> node_jump_atoms(const JumpMeasure& measure,
                                                       const TimeGrid& grid)
{
    std::vector<std::vector<SpatialPoint>> nodes(grid.size());
    for (const auto& a : measure.atoms())
    {
        auto k = grid.find(a.time);
        if (!k)
        {
            std::ostringstream os;
            os << "jump atom at " << a.time << " is not a grid node";
            throw ContractViolation(os.str());
        }
        nodes[*k] = a.mass.points();
    }
    return nodes;
}

} // namespace cbve
