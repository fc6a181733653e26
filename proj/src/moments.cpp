#include "cbve/moments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cbve
{
namespace
{

TimeGrid grid_with_time(const TimeGrid& base, double t)
{
    const double tol = base.tolerance();
    if (!std::isfinite(t) || t < -tol || t > base.horizon() + tol)
    {
        std::ostringstream os;
        os << "t = " << t << " outside [0, " << base.horizon() << "]";
        throw DomainError(os.str());
    }
    if (base.find(t))
        return base;
    const double extra[] = {t};
    return base.with_nodes(extra);
}

struct AxisSolution
{
    std::vector<Pair> pi;
    std::vector<Pair> pi_left;
};

AxisSolution solve_axis(const DiscreteMechanism& dm, std::size_t K, const Pair& lambda, int passes)
{
    const std::size_t n = dm.grid.size();
    AxisSolution out{std::vector<Pair>(n, lambda), std::vector<Pair>(n, lambda)};
    for (std::size_t m = K; m >= 1; --m)
    {
        Pair right = out.pi[m];
        const Pair jump = dm.atoms[m].linear(right);
        right = {right[0] - jump[0], right[1] - jump[1]};
        out.pi_left[m] = right;

        const auto& cell = dm.cells[m - 1];
        const Pair g_right = cell.linear(right);
        Pair left{right[0] - g_right[0], right[1] - g_right[1]};
        for (int pass = 2; pass <= passes; ++pass)
        {
            const Pair g_left = cell.linear(left);
            left = {right[0] - 0.5 * (g_right[0] + g_left[0]), right[1] - 0.5 * (g_right[1] + g_left[1])};
        }
        if (!(std::isfinite(left[0]) && std::isfinite(left[1])))
            throw OverflowError("non-finite moment value");
        out.pi[m - 1] = left;
    }
    out.pi_left[0] = out.pi[0];
    return out;
}

double sign_of(double x)
{
    return x < 0 ? -1.0 : 1.0;
}

} // namespace

Pair MomentSolution::at(double r) const
{
    const double tol = grid.tolerance();
    if (!std::isfinite(r) || r < -tol || r > grid.horizon() + tol)
        throw DomainError("r outside [0, T]");
    if (auto k = grid.find(r))
        return pi[*k];
    const auto nodes = grid.nodes();
    const auto it = std::upper_bound(nodes.begin(), nodes.end(), r);
    return pi_left[static_cast<std::size_t>(it - nodes.begin())];
}

MomentSolution solve_moment(const Environment& env, double t, const Pair& lambda, const SolverOptions& opts)
{
    opts.check();
    if (!(std::isfinite(lambda[0]) && std::isfinite(lambda[1])))
        throw DomainError("lambda must be finite");
    require_valid(env);

    MomentSolution sol;
    sol.lambda = lambda;
    sol.grid = grid_with_time(env.grid, t);
    const std::size_t K = sol.grid.index_of(t);
    sol.t = sol.grid[K];
    const auto dm = discretize(env, sol.grid);

    const auto first = solve_axis(dm, K, {std::abs(lambda[0]), 0.0}, opts.cell_fixed_point_iters);
    const auto second = solve_axis(dm, K, {0.0, std::abs(lambda[1])}, opts.cell_fixed_point_iters);
    const double s1 = sign_of(lambda[0]);
    const double s2 = sign_of(lambda[1]);

    sol.pi.resize(sol.grid.size());
    sol.pi_left.resize(sol.grid.size());
    for (std::size_t k = 0; k < sol.grid.size(); ++k)
    {
        for (std::size_t i = 0; i < 2; ++i)
        {
            sol.pi[k][i] = s1 * first.pi[k][i] + s2 * second.pi[k][i];
            sol.pi_left[k][i] = s1 * first.pi_left[k][i] + s2 * second.pi_left[k][i];
        }
    }
    for (std::size_t k = K; k < sol.grid.size(); ++k)
    {
        sol.pi[k] = lambda;
        if (k > K)
            sol.pi_left[k] = lambda;
    }
    return sol;
}

Pair finite_diff_check(const Environment& env, double t, const Pair& lambda, double h, const SolverOptions& opts)
{
    if (!(h > 0 && h <= 0.1))
        throw DomainError("finite difference step must lie in (0, 0.1]");
    const auto v = solve_general(env, t, {h * lambda[0], h * lambda[1]}, opts);
    const auto pi = solve_moment(env, t, lambda, opts);
    const std::size_t K = v.grid.index_of(t);
    Pair residual{};
    for (std::size_t k = 0; k <= K; ++k)
        for (std::size_t i = 0; i < 2; ++i)
            residual[i] = std::max(residual[i], std::abs(v.v[k][i] / h - pi.pi[k][i]));
    return residual;
}

double mean_of_transition(const Environment& env,
                          double r,
                          double t,
                          const Pair& x,
                          const Pair& lambda,
                          const SolverOptions& opts)
{
    if (!(x[0] >= 0 && x[1] >= 0 && std::isfinite(x[0]) && std::isfinite(x[1])))
        throw DomainError("initial state must be finite and nonnegative");
    if (r > t)
        throw DomainError("mean_of_transition needs r <= t");
    return dot(x, solve_moment(env, t, lambda, opts).at(r));
}

} // namespace cbve
