#include "cbve/mechanism.hpp"

#include <algorithm>
#include <cmath>

namespace cbve
{
namespace
{

// e^{-x} - 1 + x
double k_of(double x)
{
    if (std::abs(x) < 1e-3)
    {
        const double x2 = x * x;
        return x2 * (0.5 - x / 6.0 + x2 / 24.0 - x2 * x / 120.0 + x2 * x2 / 720.0);
    }
    return std::expm1(-x) + x;
}

void require_nonnegative(const Pair& p, const char* what)
{
    if (!(p[0] >= 0 && p[1] >= 0))
        throw DomainError(std::string(what) + " must be componentwise nonnegative");
}

std::pair<std::size_t, std::size_t> interval_nodes(const TimeGrid& grid, double r, double t)
{
    if (r > t)
        throw DomainError("interval (r, t] needs r <= t");
    return {grid.index_of(r), grid.index_of(t)};
}

// Sum over the cells and node atoms of (r, t]; cell_at(cell, sample_node).
template <class CellFn, class AtomFn>
double accumulate_interval(const TimeGrid& grid,
                           double r,
                           double t,
                           EndpointRule rule,
                           CellFn&& cell_at,
                           AtomFn&& atom_at)
{
    const auto [ir, it] = interval_nodes(grid, r, t);
    double total = 0;
    for (std::size_t k = ir; k < it; ++k)
    {
        if (rule == EndpointRule::right)
            total += cell_at(k, k + 1);
        else
            total += 0.5 * (cell_at(k, k) + cell_at(k, k + 1));
        total += atom_at(k + 1);
    }
    return total;
}

double moment_weight(const Pair& z, std::size_t i)
{
    const double zi = z[i];
    return (norm(z) > 1.0 ? zi : zi * zi) + z[other(i)];
}

} // namespace

double kernel_Ki(std::size_t i, const Pair& lambda, const Pair& z)
{
    require_type_index(i);
    return kernel_K(lambda, z) - lambda[other(i)] * z[other(i)];
}

double kernel_K(const Pair& lambda, const Pair& z)
{
    return k_of(dot(lambda, z));
}

double kernel_special(const Pair& lambda, const Pair& z)
{
    return -std::expm1(-dot(lambda, z));
}

VectorFunction::VectorFunction(TimeGrid g, std::vector<Pair> v) : grid(std::move(g)), values(std::move(v))
{
    if (values.size() != grid.size())
        throw ContractViolation("vector function needs one value per grid node");
    for (const auto& p : values)
    {
        if (!(std::isfinite(p[0]) && std::isfinite(p[1])))
            throw DomainError("vector function values must be finite");
        require_nonnegative(p, "vector function");
    }
}

VectorFunction VectorFunction::constant(TimeGrid g, const Pair& value)
{
    const std::size_t n = g.size();
    return VectorFunction(std::move(g), std::vector<Pair>(n, value));
}

//---------------------------------------------------------------------------//

Pair GeneralCoefficients::phi(const Pair& v) const
{
    Pair out{};
    for (std::size_t i = 0; i < 2; ++i)
    {
        const std::size_t j = other(i);
        double s = drift[i] * v[i] - cross[i] * v[j] + quad[i] * v[i] * v[i];
        for (const auto& p : jumps[i])
            s += p.weight * kernel_K(v, p.z());
        out[i] = s;
    }
    return out;
}

Pair GeneralCoefficients::linear(const Pair& v) const
{
    return {drift[0] * v[0] - cross[0] * v[1], drift[1] * v[1] - cross[1] * v[0]};
}

bool GeneralCoefficients::empty() const noexcept
{
    return drift == Pair{} && cross == Pair{} && quad == Pair{} && jumps[0].empty()
        && jumps[1].empty();
}

DiscreteMechanism discretize(const Environment& env, const TimeGrid& grid)
{
    if (grid.horizon() != env.horizon())
        throw ContractViolation("discretization grid must cover the environment horizon");
    DiscreteMechanism dm{grid, std::vector<GeneralCoefficients>(grid.cells()),
                         std::vector<GeneralCoefficients>(grid.size())};
    for (std::size_t i = 0; i < 2; ++i)
    {
        const auto cross_measure = bbar(env, i);
        const auto drift_cells = cell_masses(env.b[i][i], grid);
        const auto cross_cells = cell_masses(cross_measure, grid);
        const auto quad_cells = cell_masses(env.c[i], grid);
        auto jump_cells = cell_kernel_masses(env.m[i], grid);
        for (std::size_t k = 0; k < grid.cells(); ++k)
        {
            auto& c = dm.cells[k];
            c.drift[i] = drift_cells[k];
            c.cross[i] = cross_cells[k];
            c.quad[i] = quad_cells[k];
            c.jumps[i] = std::move(jump_cells[k]);
        }

        const auto drift_atoms = node_atoms(env.b[i][i], grid);
        const auto cross_atoms = node_atoms(cross_measure, grid);
        const auto quad_atoms = node_atoms(env.c[i], grid);
        auto jump_atoms = node_jump_atoms(env.m[i], grid);
        for (std::size_t k = 0; k < grid.size(); ++k)
        {
            auto& a = dm.atoms[k];
            a.drift[i] = drift_atoms[k];
            a.cross[i] = cross_atoms[k];
            a.quad[i] = quad_atoms[k];
            a.jumps[i] = std::move(jump_atoms[k]);
        }
    }
    return dm;
}

//---------------------------------------------------------------------------//

Pair Stage::increment(const Pair& v) const
{
    Pair out = offdiag_increment(v);
    out[0] += diag[0] * v[0];
    out[1] += diag[1] * v[1];
    return out;
}

Pair Stage::offdiag_increment(const Pair& v) const
{
    Pair out{};
    for (std::size_t i = 0; i < 2; ++i)
    {
        double s = cross[i] * v[other(i)];
        for (const auto& p : jumps[i])
            s += p.weight * kernel_special(v, p.z());
        out[i] = s;
    }
    return out;
}

StageSequence special_stages(const SpecialForm& sf, const TimeGrid& grid)
{
    if (grid.horizon() != sf.horizon())
        throw ContractViolation("discretization grid must cover the special form horizon");
    StageSequence seq{grid, std::vector<Stage>(2 * grid.cells() + 1)};
    for (std::size_t i = 0; i < 2; ++i)
    {
        const std::size_t j = other(i);
        const auto diag_cells = cell_masses(sf.gamma[i][i], grid);
        const auto cross_cells = cell_masses(sf.gamma[i][j], grid);
        auto jump_cells = cell_kernel_masses(sf.mu[i], grid);
        const auto diag_atoms = node_atoms(sf.gamma[i][i], grid);
        const auto cross_atoms = node_atoms(sf.gamma[i][j], grid);
        auto jump_atoms = node_jump_atoms(sf.mu[i], grid);
        for (std::size_t m = 1; m < grid.size(); ++m)
        {
            auto& cell = seq.stages[2 * m - 1];
            cell.diag[i] = diag_cells[m - 1];
            cell.cross[i] = cross_cells[m - 1];
            cell.jumps[i] = std::move(jump_cells[m - 1]);

            auto& atom = seq.stages[2 * m];
            atom.diag[i] = diag_atoms[m];
            atom.cross[i] = cross_atoms[m];
            atom.jumps[i] = std::move(jump_atoms[m]);
        }
    }
    return seq;
}

//---------------------------------------------------------------------------//

double phi_eval(const Environment& env,
                std::size_t i,
                const VectorFunction& f,
                double r,
                double t,
                EndpointRule rule)
{
    require_type_index(i);
    require_valid(env);
    const auto dm = discretize(env, f.grid);
    return accumulate_interval(
        f.grid, r, t, rule,
        [&](std::size_t cell, std::size_t sample) { return dm.cells[cell].phi(f.values[sample])[i]; },
        [&](std::size_t node) { return dm.atoms[node].phi(f.values[node])[i]; });
}

double phi_atom(const Environment& env, std::size_t i, const Pair& lambda, double s)
{
    require_type_index(i);
    const std::size_t j = other(i);
    const double tol = env.grid.tolerance();
    const double node = env.grid[env.grid.index_of(s)];
    double value = env.b[i][i].atom_at(node, tol) * lambda[i]
                 - bbar(env, i).atom_at(node, tol) * lambda[j]
                 + env.c[i].atom_at(node, tol) * lambda[i] * lambda[i];
    if (const auto* atom = env.m[i].atom_at(node, tol))
        value += atom->integrate([&](const Pair& z) { return kernel_K(lambda, z); });
    return value;
}

double special_phi_eval(const SpecialForm& sf,
                        std::size_t i,
                        const VectorFunction& f,
                        double r,
                        double t,
                        EndpointRule rule)
{
    require_type_index(i);
    require_valid(sf);
    const auto seq = special_stages(sf, f.grid);
    return accumulate_interval(
        f.grid, r, t, rule,
        [&](std::size_t cell, std::size_t sample) {
            return -seq.stages[2 * cell + 1].increment(f.values[sample])[i];
        },
        [&](std::size_t node) { return -seq.stages[2 * node].increment(f.values[node])[i]; });
}

double phi_n_eval(const Environment& env,
                  std::size_t i,
                  const VectorFunction& f,
                  double r,
                  double t,
                  int n,
                  EndpointRule rule)
{
    const auto sf = build_phi_n(env.with_grid(f.grid), n);
    return special_phi_eval(sf, i, f, r, t, rule);
}

LipschitzConstants lipschitz_constants(const Environment& env,
                                       const VectorFunction& f,
                                       const VectorFunction& g,
                                       double t)
{
    if (!(f.grid == g.grid))
        throw ContractViolation("f and g must share a grid");
    const std::size_t it = f.grid.index_of(t);
    double sup = 0;
    for (std::size_t k = 0; k <= it; ++k)
        sup = std::max(sup, f.values[k][0] + f.values[k][1] + g.values[k][0] + g.values[k][1]);

    StieltjesMeasure c2 = env.c[0] + env.c[1] + env.b[0][0].variation() + env.b[1][1].variation()
                        + env.b[0][1] + env.b[1][0];
    for (std::size_t i = 0; i < 2; ++i)
        c2 = c2 + env.m[i].moment_measure([i](const Pair& z) { return 2.0 * moment_weight(z, i); });
    return {sup + 1.0, c2};
}

double lipschitz_integral(const LipschitzConstants& constants,
                          const VectorFunction& f,
                          const VectorFunction& g,
                          double r,
                          double t,
                          EndpointRule rule)
{
    if (!(f.grid == g.grid))
        throw ContractViolation("f and g must share a grid");
    std::vector<double> gap(f.grid.size());
    for (std::size_t k = 0; k < gap.size(); ++k)
        gap[k] = max_abs_diff(f.values[k], g.values[k]);
    return integrate_grid_function(constants.c2, f.grid, gap, r, t, rule);
}

} // namespace cbve
