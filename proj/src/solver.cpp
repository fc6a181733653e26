#include "cbve/solver.hpp"

#include "cbve/log.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cbve
{
namespace
{

void require_lambda(const Pair& lambda)
{
    for (double x : lambda)
        if (!(std::isfinite(x) && x >= 0))
            throw DomainError("lambda must be finite and componentwise nonnegative");
}

void require_time(const TimeGrid& grid, double t, const char* name)
{
    const double tol = grid.tolerance();
    if (!std::isfinite(t) || t < -tol || t > grid.horizon() + tol)
    {
        std::ostringstream os;
        os << name << " = " << t << " outside [0, " << grid.horizon() << "]";
        throw DomainError(os.str());
    }
}

TimeGrid grid_with_time(const TimeGrid& base, double t)
{
    require_time(base, t, "t");
    if (base.find(t))
        return base;
    const double extra[] = {t};
    return base.with_nodes(extra);
}

// Clamps small negative components to zero; rejects large ones and non-finite values.
void enforce_nonnegative(Pair& v, double tol, std::size_t& clamps, double where)
{
    for (double& x : v)
    {
        if (!std::isfinite(x))
        {
            std::ostringstream os;
            os << "non-finite cumulant value near r = " << where;
            throw OverflowError(os.str());
        }
        if (x < 0)
        {
            if (x < -tol)
            {
                std::ostringstream os;
                os.precision(17);
                os << "cumulant value " << x << " near r = " << where
                   << " is negative beyond tolerance; refine the grid";
                throw DiscretizationError(os.str());
            }
            x = 0;
            ++clamps;
        }
    }
}

Pair positive_part(const Pair& v)
{
    return {std::max(0.0, v[0]), std::max(0.0, v[1])};
}

Pair scale_by_exp(const Pair& v, const Pair& exponent)
{
    return {v[0] * std::exp(exponent[0]), v[1] * std::exp(exponent[1])};
}

Pair zeta_at(const std::array<StieltjesMeasure, 2>& zeta, double s)
{
    return {cumulative(zeta[0], s), cumulative(zeta[1], s)};
}

Pair zeta_before(const std::array<StieltjesMeasure, 2>& zeta, double s, double tol)
{
    return {cumulative(zeta[0], s) - zeta[0].atom_at(s, tol),
            cumulative(zeta[1], s) - zeta[1].atom_at(s, tol)};
}

// Prefix sums of per-stage increments: zeta at every position.
std::vector<Pair> positions_from_increments(const std::vector<Pair>& increments)
{
    std::vector<Pair> zeta(increments.size(), Pair{});
    for (std::size_t q = 1; q < increments.size(); ++q)
        for (std::size_t i = 0; i < 2; ++i)
            zeta[q][i] = zeta[q - 1][i] + increments[q][i];
    return zeta;
}

// Fills nodes at and after the terminal index with lambda.
void fill_after_terminal(CumulantSolution& sol, std::size_t K)
{
    for (std::size_t k = K + 1; k < sol.grid.size(); ++k)
    {
        sol.v[k] = sol.lambda;
        sol.v_left[k] = sol.lambda;
    }
    sol.v[K] = sol.lambda;
}

// phi-integrals of the smooth exponent pieces of the Gronwall bound:
//   phi1(x) = int_0^1 e^{xs} ds,  psi(x) = int_0^1 s e^{xs} ds.
double phi1(double x)
{
    if (std::abs(x) < 1e-8)
        return 1.0 + 0.5 * x;
    return std::expm1(x) / x;
}

double psi(double x)
{
    if (std::abs(x) < 1e-2)
    {
        double term = 1.0;
        double sum = 0;
        for (int k = 0; k <= 6; ++k)
        {
            sum += term / static_cast<double>(k + 2);
            term *= x / static_cast<double>(k + 1);
        }
        return sum;
    }
    return (std::expm1(x) * (x - 1.0) + x) / (x * x);
}

} // namespace

const char* to_string(SolveMethod m)
{
    switch (m)
    {
    case SolveMethod::general_backward:
        return "general_backward";
    case SolveMethod::special_picard:
        return "special_picard";
    case SolveMethod::stage_sweep:
        return "stage_sweep";
    }
    return "unknown";
}

void SolverOptions::check() const
{
    if (!(picard_tol > 0) || picard_max_iter < 1 || cell_fixed_point_iters < 1 || !(negativity_tol >= 0))
        throw DomainError("solver options must be positive");
}

Pair CumulantSolution::at(double r) const
{
    require_time(grid, r, "r");
    if (auto k = grid.find(r))
        return v[*k];
    const auto nodes = grid.nodes();
    const auto it = std::upper_bound(nodes.begin(), nodes.end(), r);
    return v_left[static_cast<std::size_t>(it - nodes.begin())];
}

std::size_t CumulantSolution::terminal_index() const
{
    return grid.index_of(t);
}

//---------------------------------------------------------------------------//
// General backward sweep
//---------------------------------------------------------------------------//

CumulantSolution solve_general(const Environment& env, double t, const Pair& lambda, const SolverOptions& opts)
{
    opts.check();
    require_lambda(lambda);
    require_valid(env);

    CumulantSolution sol;
    sol.t = t;
    sol.lambda = lambda;
    sol.grid = grid_with_time(env.grid, t);
    sol.method = SolveMethod::general_backward;
    const auto dm = discretize(env, sol.grid);
    const std::size_t K = sol.grid.index_of(t);
    sol.t = sol.grid[K];
    sol.v.assign(sol.grid.size(), lambda);
    sol.v_left.assign(sol.grid.size(), lambda);
    fill_after_terminal(sol, K);

    const double tol = opts.negativity_tol;
    for (std::size_t m = K; m >= 1; --m)
    {
        const double where = sol.grid[m];
        Pair right = sol.v[m];
        const Pair jump = dm.atoms[m].phi(right);
        right = {right[0] - jump[0], right[1] - jump[1]};
        enforce_nonnegative(right, tol, sol.clamp_events, where);
        sol.v_left[m] = right;

        const auto& cell = dm.cells[m - 1];
        const Pair g_right = cell.phi(right);
        Pair left{right[0] - g_right[0], right[1] - g_right[1]};
        for (int pass = 2; pass <= opts.cell_fixed_point_iters; ++pass)
        {
            const Pair g_left = cell.phi(positive_part(left));
            left = {right[0] - 0.5 * (g_right[0] + g_left[0]), right[1] - 0.5 * (g_right[1] + g_left[1])};
        }
        enforce_nonnegative(left, tol, sol.clamp_events, sol.grid[m - 1]);
        sol.v[m - 1] = left;
    }
    sol.v_left[0] = sol.v[0];
    sol.iterations_used = opts.cell_fixed_point_iters;
    if (sol.clamp_events > 0)
        log(LogLevel::debug, "solve_general: clamped ", sol.clamp_events, " small negative values");
    return sol;
}

//---------------------------------------------------------------------------//
// Stage sweep and Picard iteration
//---------------------------------------------------------------------------//

CumulantSolution sweep_stages(const StageSequence& seq, double t, const Pair& lambda, const SolverOptions& opts)
{
    opts.check();
    require_lambda(lambda);
    CumulantSolution sol;
    sol.lambda = lambda;
    sol.grid = seq.grid;
    sol.method = SolveMethod::stage_sweep;
    const std::size_t K = sol.grid.index_of(t);
    sol.t = sol.grid[K];
    sol.v.assign(sol.grid.size(), lambda);
    sol.v_left.assign(sol.grid.size(), lambda);
    fill_after_terminal(sol, K);

    Pair p = lambda;
    for (std::size_t q = 2 * K; q >= 1; --q)
    {
        const Pair inc = seq.stages[q].increment(p);
        p = {p[0] + inc[0], p[1] + inc[1]};
        enforce_nonnegative(p, opts.negativity_tol, sol.clamp_events, sol.grid[q / 2]);
        if (q % 2 == 0)
            sol.v_left[q / 2] = p;
        else
            sol.v[(q - 1) / 2] = p;
    }
    sol.v_left[0] = sol.v[0];
    sol.iterations_used = 1;
    return sol;
}

StageSequence h_transform_stages(const StageSequence& seq, const std::vector<Pair>& zeta_increments)
{
    if (zeta_increments.size() != seq.stages.size())
        throw ContractViolation("one zeta increment per stage is required");
    const auto zeta = positions_from_increments(zeta_increments);
    StageSequence out{seq.grid, std::vector<Stage>(seq.stages.size())};
    for (std::size_t q = 1; q < seq.stages.size(); ++q)
    {
        const Stage& s = seq.stages[q];
        Stage& o = out.stages[q];
        for (std::size_t i = 0; i < 2; ++i)
        {
            const std::size_t j = other(i);
            const double dz = zeta_increments[q][i];
            o.diag[i] = std::expm1(-dz) + std::exp(-dz) * s.diag[i];
            o.cross[i] = std::exp(zeta[q - 1][i] - zeta[q][j]) * s.cross[i];
            const double wscale = std::exp(zeta[q - 1][i]);
            const Pair zscale{std::exp(-zeta[q][0]), std::exp(-zeta[q][1])};
            o.jumps[i].reserve(s.jumps[i].size());
            for (const auto& p : s.jumps[i])
                o.jumps[i].push_back({p.z1 * zscale[0], p.z2 * zscale[1], p.weight * wscale});
        }
    }
    return out;
}

CumulantSolution solve_special_picard(const SpecialForm& sf, double t, const Pair& lambda, const SolverOptions& opts)
{
    opts.check();
    require_lambda(lambda);
    require_valid(sf);

    const TimeGrid grid = grid_with_time(sf.grid, t);
    const auto seq = special_stages(sf, grid);
    const std::size_t K = grid.index_of(t);
    const std::size_t Q = 2 * K;

    // Rescaling that removes the diagonal: Delta zeta = log(1 + diag).
    std::vector<Pair> increments(seq.stages.size(), Pair{});
    for (std::size_t q = 1; q < seq.stages.size(); ++q)
    {
        for (std::size_t i = 0; i < 2; ++i)
        {
            const double d = seq.stages[q].diag[i];
            if (!(d > -1.0))
            {
                std::ostringstream os;
                os << "diagonal mass " << d << " near r = " << grid[q / 2]
                   << " is not above -1; refine the grid";
                throw DiscretizationError(os.str());
            }
            increments[q][i] = std::log1p(d);
        }
    }
    auto transformed = h_transform_stages(seq, increments);
    for (auto& s : transformed.stages)
        s.diag = Pair{};
    const auto zeta = positions_from_increments(increments);

    const Pair terminal = scale_by_exp(lambda, zeta[Q]);
    std::vector<Pair> V(Q + 1, terminal);
    std::vector<Pair> next(Q + 1);
    std::vector<Pair> F(Q + 1, Pair{});

    CumulantSolution sol;
    sol.t = grid[K];
    sol.lambda = lambda;
    sol.grid = grid;
    sol.method = SolveMethod::special_picard;
    sol.v.assign(grid.size(), lambda);
    sol.v_left.assign(grid.size(), lambda);

    auto to_original_nodes = [&](const std::vector<Pair>& W) {
        std::vector<Pair> nodes(grid.size(), lambda);
        for (std::size_t m = 0; m <= K; ++m)
            nodes[m] = scale_by_exp(W[2 * m], {-zeta[2 * m][0], -zeta[2 * m][1]});
        return nodes;
    };
    if (opts.record_iterates)
        sol.iterates.push_back(to_original_nodes(V));

    bool converged = Q == 0;
    double change = 0;
    int k = 0;
    while (!converged && k < opts.picard_max_iter)
    {
        ++k;
        const auto count = static_cast<std::ptrdiff_t>(Q);
#pragma omp parallel for schedule(static) if (opts.parallel)
        for (std::ptrdiff_t q = 1; q <= count; ++q)
            F[q] = transformed.stages[q].offdiag_increment(V[q]);

        next[Q] = terminal;
        for (std::size_t p = Q; p-- > 0;)
            next[p] = {next[p + 1][0] + F[p + 1][0], next[p + 1][1] + F[p + 1][1]};

        change = 0;
        double scale = 1.0;
        for (std::size_t p = 0; p <= Q; ++p)
        {
            if (!(std::isfinite(next[p][0]) && std::isfinite(next[p][1])))
                throw OverflowError("Picard iterate is not finite");
            change = std::max(change, max_abs_diff(next[p], V[p]));
            scale = std::max({scale, std::abs(next[p][0]), std::abs(next[p][1])});
        }
        std::swap(V, next);
        if (opts.record_iterates)
            sol.iterates.push_back(to_original_nodes(V));
        converged = change <= opts.picard_tol * scale;
        log(LogLevel::debug, "picard iteration ", k, " change ", change);
    }
    if (!converged)
    {
        std::ostringstream os;
        os << "Picard iteration did not converge in " << opts.picard_max_iter
           << " iterations (last change " << change << ")";
        throw NonConvergenceError(os.str(), change, k);
    }

    for (std::size_t m = 0; m <= K; ++m)
    {
        sol.v[m] = scale_by_exp(V[2 * m], {-zeta[2 * m][0], -zeta[2 * m][1]});
        if (m > 0)
            sol.v_left[m] = scale_by_exp(V[2 * m - 1], {-zeta[2 * m - 1][0], -zeta[2 * m - 1][1]});
    }
    fill_after_terminal(sol, K);
    sol.v_left[0] = sol.v[0];
    sol.iterations_used = k;
    sol.max_residual = change;
    return sol;
}

//---------------------------------------------------------------------------//
// h-transform
//---------------------------------------------------------------------------//

HTransform h_transform_params(const SpecialForm& sf, const StieltjesMeasure& zeta1, const StieltjesMeasure& zeta2)
{
    require_valid(sf);
    const double T = sf.horizon();
    if (zeta1.horizon() != T || zeta2.horizon() != T)
        throw ContractViolation("zeta must live on the horizon of the special form");

    HTransform out{{zeta1.with_monotonicity(Monotonicity::none), zeta2.with_monotonicity(Monotonicity::none)},
                   {StieltjesMeasure(T), StieltjesMeasure(T)},
                   {StieltjesMeasure(T), StieltjesMeasure(T)},
                   StageSequence{sf.grid, {}}};

    std::vector<double> pts = zeta1.breakpoints();
    const auto more = zeta2.breakpoints();
    pts.insert(pts.end(), more.begin(), more.end());
    const TimeGrid grid = sf.grid.with_nodes(pts);
    const double tol = grid.tolerance();

    for (std::size_t i = 0; i < 2; ++i)
    {
        const auto& z = out.zeta[i];
        std::vector<Atom> eta_atoms;
        for (const auto& a : z.atoms())
            eta_atoms.push_back({a.time, -std::expm1(-a.mass)});
        out.eta[i] = StieltjesMeasure(T, z.pieces(), eta_atoms);

        const auto& g = sf.gamma[i][i];
        std::vector<Atom> scaled_atoms;
        for (const auto& a : g.atoms())
            scaled_atoms.push_back({a.time, std::exp(-z.atom_at(a.time, tol)) * a.mass});
        out.drift[i] = StieltjesMeasure(T, g.pieces(), scaled_atoms) - out.eta[i];
    }

    const auto seq = special_stages(sf, grid);
    std::vector<Pair> increments(seq.stages.size(), Pair{});
    for (std::size_t i = 0; i < 2; ++i)
    {
        const auto cells = cell_masses(out.zeta[i], grid);
        const auto atoms = node_atoms(out.zeta[i], grid);
        for (std::size_t m = 1; m < grid.size(); ++m)
        {
            increments[2 * m - 1][i] = cells[m - 1];
            increments[2 * m][i] = atoms[m];
        }
    }
    out.stages = h_transform_stages(seq, increments);
    return out;
}

CumulantSolution h_transform_solution(const CumulantSolution& u,
                                      const StieltjesMeasure& zeta1,
                                      const StieltjesMeasure& zeta2,
                                      const Pair& lambda)
{
    require_lambda(lambda);
    const std::array<StieltjesMeasure, 2> zeta{zeta1, zeta2};
    const Pair zt = zeta_at(zeta, u.t);
    const Pair expected{std::exp(-zt[0]) * lambda[0], std::exp(-zt[1]) * lambda[1]};
    const double scale = std::max({1.0, expected[0], expected[1]});
    if (max_abs_diff(expected, u.lambda) > 1e-12 * scale)
        throw ContractViolation("solution was not computed for the terminal argument e^{-zeta(t)} lambda");

    CumulantSolution v = u;
    v.lambda = lambda;
    v.iterates.clear();
    const double tol = u.grid.tolerance();
    const std::size_t K = u.grid.index_of(u.t);
    for (std::size_t k = 0; k <= K; ++k)
    {
        const double s = u.grid[k];
        v.v[k] = scale_by_exp(u.v[k], zeta_at(zeta, s));
        v.v_left[k] = k == 0 ? v.v[0] : scale_by_exp(u.v_left[k], zeta_before(zeta, s, tol));
    }
    fill_after_terminal(v, K);
    return v;
}

//---------------------------------------------------------------------------//
// Bounds
//---------------------------------------------------------------------------//

double GrowthFunction::operator()(double s) const
{
    return initial + cumulative(increments, s);
}

GrowthFunction GrowthFunction::constant(double horizon, double value)
{
    return {value, StieltjesMeasure(horizon)};
}

Pair gronwall_bound(const std::array<std::array<StieltjesMeasure, 2>, 2>& beta,
                    const std::array<GrowthFunction, 2>& a,
                    double t)
{
    const double T = beta[0][0].horizon();
    std::vector<double> nodes{0.0, t};
    for (const auto& row : beta)
    {
        for (const auto& b : row)
        {
            if (b.horizon() != T)
                throw ContractViolation("beta measures must share a horizon");
            if (!b.is_nonnegative())
                throw ContractViolation("beta measures must be nondecreasing");
            const auto bp = b.breakpoints();
            nodes.insert(nodes.end(), bp.begin(), bp.end());
        }
    }
    for (const auto& f : a)
    {
        if (!(f.initial >= 0) || !f.increments.is_nonnegative())
            throw ContractViolation("a must be nonnegative and nondecreasing");
        const auto bp = f.increments.breakpoints();
        nodes.insert(nodes.end(), bp.begin(), bp.end());
    }
    if (!std::isfinite(t) || t < 0 || t > T * (1 + 1e-12))
        throw DomainError("gronwall_bound: t outside [0, T]");
    std::erase_if(nodes, [t](double x) { return x > t; });
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

    Pair bound{};
    for (std::size_t i = 0; i < 2; ++i)
    {
        const std::size_t j = other(i);
        const auto& bij = beta[i][j];
        const auto& bji = beta[j][i];
        const auto& bjj = beta[j][j];

        // d_i(t) = a_i(t) + int_(0,t] a_j e^{beta_jj} dbeta_ij
        double d = a[i](t);
        for (std::size_t k = 0; k + 1 < nodes.size(); ++k)
        {
            const double r0 = nodes[k];
            const double r1 = nodes[k + 1];
            const double h = r1 - r0;
            const double mid = 0.5 * (r0 + r1);
            const double x = bjj.density_at(mid) * h;
            const double e0 = std::exp(cumulative(bjj, r0));
            d += bij.density_at(mid) * e0
               * (a[j](r0) * h * phi1(x) + a[j].increments.density_at(mid) * h * h * psi(x));
            d += a[j](r1) * std::exp(cumulative(bjj, r1)) * bij.atom_at(r1);
        }

        // int_(0,t] I(s) dbeta_ji(s) with I(s) = int_(s,t] e^{beta_jj} dbeta_ij
        double inner = 0;
        double outer = 0;
        for (std::size_t k = nodes.size() - 1; k >= 1; --k)
        {
            const double r0 = nodes[k - 1];
            const double r1 = nodes[k];
            const double h = r1 - r0;
            const double mid = 0.5 * (r0 + r1);
            outer += inner * bji.atom_at(r1);
            inner += std::exp(cumulative(bjj, r1)) * bij.atom_at(r1);
            const double x = bjj.density_at(mid) * h;
            const double e0 = std::exp(cumulative(bjj, r0));
            const double b = bij.density_at(mid);
            outer += bji.density_at(mid) * (h * inner + b * e0 * h * h * psi(x));
            inner += b * e0 * h * phi1(x);
        }
        bound[i] = d * std::exp(outer + cumulative(beta[i][i], t));
    }
    return bound;
}

double special_estimate_rho(const SpecialForm& sf, double t)
{
    require_time(sf.grid, t, "t");
    double rho = cumulative(sf.gamma[0][1], t) + cumulative(sf.gamma[1][0], t);
    for (std::size_t i = 0; i < 2; ++i)
    {
        const std::size_t j = other(i);
        const auto rho_i = sf.gamma[i][i] + sf.mu[i].moment_measure([i](const Pair& z) { return z[i]; });
        rho += total_variation(rho_i, t);
        rho += cumulative(sf.mu[i].moment_measure([j](const Pair& z) { return z[j]; }), t);
    }
    return rho;
}

double special_estimate_rho(const SpecialForm& sf, double r, double t)
{
    if (r > t)
        throw DomainError("special_estimate_rho: r must not exceed t");
    return special_estimate_rho(sf, t) - special_estimate_rho(sf, r);
}

double upper_bound_U(const Environment& env, std::size_t i, double r, double t, const Pair& lambda)
{
    require_type_index(i);
    require_lambda(lambda);
    require_time(env.grid, t, "t");
    require_time(env.grid, r, "r");
    if (r > t)
        throw DomainError("upper_bound_U: r must not exceed t");
    require_valid(env);
    const std::size_t j = other(i);
    const double b12 = cumulative(bbar(env, 0), t);
    const double b21 = cumulative(bbar(env, 1), t);
    const double bij = i == 0 ? b12 : b21;
    const double exponent = std::exp(total_variation(env.b[j][j], t)) * b12 * b21
                          + total_variation(env.b[0][0], t) + total_variation(env.b[1][1], t);
    return norm(lambda) * (1.0 + bij) * std::exp(exponent);
}

double check_flow(const Environment& env, double r, double s, double t, const Pair& lambda, const SolverOptions& opts)
{
    require_time(env.grid, r, "r");
    require_time(env.grid, s, "s");
    require_time(env.grid, t, "t");
    if (!(r <= s && s <= t))
        throw DomainError("check_flow needs r <= s <= t");

    const double at_r[] = {r};
    const double at_s[] = {s};
    const double at_rs[] = {r, s};
    const auto whole = solve_general(env.with_grid(env.grid.with_nodes(at_r)), t, lambda, opts);
    const auto upper = solve_general(env.with_grid(env.grid.with_nodes(at_s)), t, lambda, opts);
    const Pair mid = upper.at(s);
    const auto lower = solve_general(env.with_grid(env.grid.with_nodes(at_rs)), s, mid, opts);
    return max_abs_diff(whole.at(r), lower.at(r));
}

} // namespace cbve
