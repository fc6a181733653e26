#include "cbve/environment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cbve
{
namespace
{

template <class Measure>
void require_horizon_match(const Measure& m, const TimeGrid& grid, const char* name)
{
    if (m.horizon() != grid.horizon())
    {
        std::ostringstream os;
        os << name << " has horizon " << m.horizon() << " but the grid ends at " << grid.horizon();
        throw ContractViolation(os.str());
    }
}

void require_jump_atoms_on_grid(const JumpMeasure& m, const TimeGrid& grid, const char* name)
{
    for (const auto& a : m.atoms())
    {
        if (!grid.find(a.time))
        {
            std::ostringstream os;
            os << name << " has a time atom at " << a.time << " that is not a grid node";
            throw ContractViolation(os.str());
        }
    }
}

const char* b_name(std::size_t i, std::size_t j)
{
    static const char* names[2][2] = {{"b11", "b12"}, {"b21", "b22"}};
    return names[i][j];
}

const char* gamma_name(std::size_t i, std::size_t j)
{
    static const char* names[2][2] = {{"gamma11", "gamma12"}, {"gamma21", "gamma22"}};
    return names[i][j];
}

void check_structure(const Environment& env)
{
    for (std::size_t i = 0; i < 2; ++i)
    {
        for (std::size_t j = 0; j < 2; ++j)
        {
            require_horizon_match(env.b[i][j], env.grid, b_name(i, j));
            (void)node_atoms(env.b[i][j], env.grid);
        }
        require_horizon_match(env.c[i], env.grid, i == 0 ? "c1" : "c2");
        require_horizon_match(env.m[i], env.grid, i == 0 ? "m1" : "m2");
        require_jump_atoms_on_grid(env.m[i], env.grid, i == 0 ? "m1" : "m2");
    }
}

void check_structure(const SpecialForm& sf)
{
    for (std::size_t i = 0; i < 2; ++i)
    {
        for (std::size_t j = 0; j < 2; ++j)
        {
            require_horizon_match(sf.gamma[i][j], sf.grid, gamma_name(i, j));
            (void)node_atoms(sf.gamma[i][j], sf.grid);
        }
        require_horizon_match(sf.mu[i], sf.grid, i == 0 ? "mu1" : "mu2");
        require_jump_atoms_on_grid(sf.mu[i], sf.grid, i == 0 ? "mu1" : "mu2");
    }
}

// z_i^2 on the unit ball, z_i outside it, plus z_j.
double moment_integrand(const Pair& z, std::size_t i)
{
    const double zi = z[i];
    const double zj = z[other(i)];
    return (norm(z) <= 1.0 ? zi * zi : zi) + zj;
}

std::vector<double> atom_times(const StieltjesMeasure& a, const JumpMeasure& b)
{
    std::vector<double> times;
    for (const auto& x : a.atoms())
        times.push_back(x.time);
    for (const auto& x : b.atoms())
        times.push_back(x.time);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    return times;
}

void append_breakpoints(std::vector<double>& out, const std::vector<double>& pts)
{
    out.insert(out.end(), pts.begin(), pts.end());
}

} // namespace

Environment Environment::zero(double horizon, std::size_t cells)
{
    const StieltjesMeasure z(horizon);
    const StieltjesMeasure zm = StieltjesMeasure(horizon, {}, {}, Monotonicity::nondecreasing);
    return Environment{TimeGrid::uniform(horizon, cells),
                       {{{z, zm}, {zm, z}}},
                       {zm, zm},
                       {JumpMeasure(horizon), JumpMeasure(horizon)}};
}

Environment Environment::with_grid(TimeGrid g) const
{
    if (g.horizon() != grid.horizon())
        throw ContractViolation("replacement grid must cover the same horizon");
    Environment out = *this;
    out.grid = std::move(g);
    return out;
}

SpecialForm SpecialForm::zero(double horizon, std::size_t cells)
{
    const StieltjesMeasure z(horizon);
    const StieltjesMeasure zm = StieltjesMeasure(horizon, {}, {}, Monotonicity::nondecreasing);
    return SpecialForm{TimeGrid::uniform(horizon, cells),
                       {{{z, zm}, {zm, z}}},
                       {JumpMeasure(horizon), JumpMeasure(horizon)}};
}

SpecialForm SpecialForm::with_grid(TimeGrid g) const
{
    if (g.horizon() != grid.horizon())
        throw ContractViolation("replacement grid must cover the same horizon");
    SpecialForm out = *this;
    out.grid = std::move(g);
    return out;
}

TimeGrid aligned_grid(const TimeGrid& base, const Environment& env)
{
    std::vector<double> pts;
    for (std::size_t i = 0; i < 2; ++i)
    {
        for (std::size_t j = 0; j < 2; ++j)
            append_breakpoints(pts, env.b[i][j].breakpoints());
        append_breakpoints(pts, env.c[i].breakpoints());
        append_breakpoints(pts, env.m[i].breakpoints());
    }
    return base.with_nodes(pts);
}

TimeGrid aligned_grid(const TimeGrid& base, const SpecialForm& sf)
{
    std::vector<double> pts;
    for (std::size_t i = 0; i < 2; ++i)
    {
        for (std::size_t j = 0; j < 2; ++j)
            append_breakpoints(pts, sf.gamma[i][j].breakpoints());
        append_breakpoints(pts, sf.mu[i].breakpoints());
    }
    return base.with_nodes(pts);
}

double moment_functional(const Environment& env, std::size_t i, double t)
{
    require_type_index(i);
    return cumulative(env.m[i].moment_measure([i](const Pair& z) { return moment_integrand(z, i); }),
                      t);
}

double delta_i(const Environment& env, std::size_t i, double s)
{
    require_type_index(i);
    const std::size_t k = env.grid.index_of(s);
    const double node = env.grid[k];
    const double tol = env.grid.tolerance();
    double delta = env.b[i][i].atom_at(node, tol);
    if (const auto* atom = env.m[i].atom_at(node, tol))
        delta += atom->integrate([i](const Pair& z) { return z[i]; });
    return delta;
}

std::vector<Bottleneck> bottlenecks(const Environment& env)
{
    std::vector<Bottleneck> out;
    const double tol = env.grid.tolerance();
    for (std::size_t i = 0; i < 2; ++i)
    {
        const std::size_t j = other(i);
        for (const auto& a : env.b[i][i].atoms())
        {
            if (std::abs(a.mass - 1.0) > atom_tolerance)
                continue;
            if (env.b[i][j].atom_at(a.time, tol) != 0)
                continue;
            if (env.m[i].atom_at(a.time, tol) != nullptr)
                continue;
            out.push_back({a.time, i});
        }
    }
    std::sort(out.begin(), out.end(), [](const Bottleneck& x, const Bottleneck& y) {
        return x.time < y.time || (x.time == y.time && x.type < y.type);
    });
    return out;
}

std::optional<double> last_bottleneck(const Environment& env, double t)
{
    const double tol = env.grid.tolerance();
    if (!std::isfinite(t) || t < -tol || t > env.horizon() + tol)
        throw DomainError("last_bottleneck: time outside [0, T]");
    std::optional<double> last;
    for (const auto& b : bottlenecks(env))
        if (b.time <= t + tol)
            last = b.time;
    return last;
}

ValidationReport validate(const Environment& env)
{
    check_structure(env);

    ValidationReport report;
    auto fail = [&report](std::string msg) {
        report.ok = false;
        report.messages.push_back(std::move(msg));
    };

    for (std::size_t i = 0; i < 2; ++i)
    {
        const std::size_t j = other(i);
        const std::string type = std::to_string(i + 1);
        if (!env.b[i][j].is_nonnegative())
            fail(std::string(b_name(i, j)) + " must be nondecreasing");
        if (!env.c[i].is_nonnegative())
            fail("c" + type + " must be nondecreasing");
        if (!env.c[i].atoms().empty())
        {
            std::ostringstream os;
            os << "c" << type << " must be continuous but has an atom at " << env.c[i].atoms().front().time;
            fail(os.str());
        }

        report.moment[i] = moment_functional(env, i, env.horizon());
        if (!std::isfinite(report.moment[i]))
            fail("moment functional m_" + type + "(T) is not finite");

        double delta_max = 0;
        bool first = true;
        for (double s : atom_times(env.b[i][i], env.m[i]))
        {
            const double d = delta_i(env, i, s);
            delta_max = first ? d : std::max(delta_max, d);
            first = false;
            if (d > 1.0 + atom_tolerance)
            {
                std::ostringstream os;
                os.precision(17);
                os << "delta_" << type << "(" << s << ") = " << d << " exceeds 1";
                fail(os.str());
            }
        }
        report.delta_max[i] = delta_max;
    }
    report.bottlenecks = bottlenecks(env);
    return report;
}

void require_valid(const Environment& env)
{
    const auto report = validate(env);
    if (report.ok)
        return;
    std::string msg = "environment is not admissible:";
    for (const auto& m : report.messages)
        msg += " " + m + ";";
    throw ContractViolation(msg);
}

std::vector<std::string> special_form_violations(const SpecialForm& sf)
{
    check_structure(sf);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < 2; ++i)
    {
        const std::size_t j = other(i);
        if (!sf.gamma[i][j].is_nonnegative())
            out.push_back(std::string(gamma_name(i, j)) + " must be nondecreasing");
        for (const auto& a : sf.gamma[i][i].atoms())
        {
            if (!(a.mass > -1.0))
            {
                std::ostringstream os;
                os.precision(17);
                os << "Delta " << gamma_name(i, i) << "(" << a.time << ") = " << a.mass
                   << " must exceed -1";
                out.push_back(os.str());
            }
        }
    }
    return out;
}

void require_valid(const SpecialForm& sf)
{
    const auto v = special_form_violations(sf);
    if (v.empty())
        return;
    std::string msg = "special form is not admissible:";
    for (const auto& m : v)
        msg += " " + m + ";";
    throw ContractViolation(msg);
}

StieltjesMeasure bbar(const Environment& env, std::size_t i)
{
    require_type_index(i);
    const std::size_t j = other(i);
    const auto jump_part = env.m[i].moment_measure([j](const Pair& z) { return z[j]; });
    return (env.b[i][j].with_monotonicity(Monotonicity::none) + jump_part)
        .with_monotonicity(Monotonicity::nondecreasing);
}

Environment special_to_general(const SpecialForm& sf)
{
    require_valid(sf);
    const double T = sf.horizon();
    Environment env = Environment::zero(T, 1);
    env.grid = sf.grid;
    for (std::size_t i = 0; i < 2; ++i)
    {
        const std::size_t j = other(i);
        const auto zi_mu = sf.mu[i].moment_measure([i](const Pair& z) { return z[i]; });
        env.b[i][i] = sf.gamma[i][i].scaled(-1.0) - zi_mu;
        env.b[i][j] = sf.gamma[i][j].with_monotonicity(Monotonicity::nondecreasing);
        env.m[i] = sf.mu[i];
    }
    const auto report = validate(env);
    if (!report.ok)
    {
        std::string msg = "special form maps outside the admissible general class:";
        for (const auto& m : report.messages)
            msg += " " + m + ";";
        throw AdmissibilityError(msg);
    }
    return env;
}

SpecialForm build_phi_n(const Environment& env, int n)
{
    if (n < 1)
        throw DomainError("build_phi_n: n must be at least 1");
    require_valid(env);

    const double T = env.horizon();
    const double nn = static_cast<double>(n);
    const double decay = std::exp(-nn);
    const double keep = -std::expm1(-nn); // 1 - e^{-n}
    auto thin = [nn](const Pair& z) { return std::min(1.0, nn * norm(z)); };

    SpecialForm sf = SpecialForm::zero(T, 1);
    sf.grid = env.grid;
    for (std::size_t i = 0; i < 2; ++i)
    {
        const std::size_t j = other(i);

        sf.gamma[i][i] = env.b[i][i].scaled(-1.0) + env.b[i][i].variation().scaled(decay)
                       - env.c[i].scaled(2.0 * nn)
                       - env.m[i].moment_measure([&](const Pair& z) { return z[i] * thin(z); })
                             .scaled(keep);

        // b_ij + int z_j (1 - (1 - e^{-n})(1 ^ n|z|)) m_i, nonnegative term by term.
        sf.gamma[i][j] =
            (env.b[i][j].with_monotonicity(Monotonicity::none)
             + env.m[i].moment_measure([&](const Pair& z) { return z[j] * (1.0 - keep * thin(z)); }))
                .with_monotonicity(Monotonicity::nondecreasing);

        // 2n^2 c_i(ds) delta_{e_i / n}(dz)
        std::vector<KernelPiece> diffusion;
        for (const auto& p : env.c[i].pieces())
        {
            SpatialPoint point{0, 0, 2.0 * nn * nn * p.value};
            (i == 0 ? point.z1 : point.z2) = 1.0 / nn;
            if (point.weight > 0)
                diffusion.push_back({p.t0, p.t1, DiscreteSpatialMeasure({point})});
        }
        const auto thinned = env.m[i].mapped([&](const SpatialPoint& p) {
            return SpatialPoint{p.z1, p.z2, keep * thin(p.z()) * p.weight};
        });
        sf.mu[i] = JumpMeasure(T, std::move(diffusion), {}) + thinned;
    }

    const auto violations = special_form_violations(sf);
    if (!violations.empty())
        throw AdmissibilityError("phi_n construction left the admissible class: " + violations.front());
    return sf;
}

} // namespace cbve
