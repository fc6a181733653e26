#include "cbve/solver.hpp"

#include "support/random_models.hpp"

#include <doctest.h>

#include <cmath>

using namespace cbve;
using cbve::testing::Rng;
using cbve::testing::uniform;

namespace
{

constexpr auto nd = Monotonicity::nondecreasing;

double feller_oracle(double b, double c, double lambda, double span)
{
    return lambda * std::exp(-b * span) / (1 + lambda * (c / b) * (1 - std::exp(-b * span)));
}

Environment feller_env(std::size_t cells)
{
    Environment env = Environment::zero(1.0, cells);
    env.b[0][0] = StieltjesMeasure(1.0, {{0, 1, 1.0}}, {});
    env.c[0] = StieltjesMeasure(1.0, {{0, 1, 1.0}}, {}, nd);
    return env;
}

SolverOptions euler()
{
    SolverOptions o;
    o.cell_fixed_point_iters = 1;
    return o;
}

double sup_gap(const CumulantSolution& a, const CumulantSolution& b)
{
    double gap = 0;
    for (std::size_t n = 0; n < a.v.size(); ++n)
        gap = std::max(gap, max_abs_diff(a.v[n], b.v[n]));
    return gap;
}

using Beta = std::array<std::array<StieltjesMeasure, 2>, 2>;

Beta zero_beta()
{
    const StieltjesMeasure z(1.0, {}, {}, nd);
    return {{{z, z}, {z, z}}};
}

} // namespace

TEST_CASE("solve_general: zero environment keeps lambda")
{
    const auto sol = solve_general(Environment::zero(1.0, 50), 1.0, {0.3, 2.0});
    for (const auto& v : sol.v)
        CHECK(v == Pair{0.3, 2.0});
}

TEST_CASE("solve_general: Feller case against the Riccati closed form")
{
    const auto sol = solve_general(feller_env(10000), 1.0, {1.0, 0.0});
    CHECK(std::abs(sol.v[0][0] - feller_oracle(1, 1, 1, 1)) <= 1e-4);
    CHECK(std::abs(sol.v[0][0] - 0.225400) <= 1e-4);
    CHECK(sol.v[0][1] == 0);
    for (std::size_t n = 0; n < sol.grid.size(); n += 500)
        CHECK(std::abs(sol.v[n][0] - feller_oracle(1, 1, 1, 1 - sol.grid[n])) <= 1e-6);

    // Fine-grid reference run.
    const auto fine = solve_general(feller_env(40000), 1.0, {1.0, 0.0});
    CHECK(std::abs(fine.v[0][0] - sol.v[0][0]) <= 1e-8);
}

TEST_CASE("solve_general: bottleneck annihilates the first component")
{
    Environment env = Environment::zero(1.0, 10);
    env.b[0][0] = StieltjesMeasure(1.0, {}, {{0.5, 1.0}});
    const auto sol = solve_general(env, 1.0, {3, 5});
    for (std::size_t n = 0; n < sol.grid.size(); ++n)
    {
        if (sol.grid[n] < 0.5)
            CHECK(sol.v[n] == Pair{0, 5});
        else
            CHECK(sol.v[n] == Pair{3, 5});
    }
    CHECK(sol.v_left[5] == Pair{0, 5});
}

TEST_CASE("solve_general: errors")
{
    CHECK_THROWS_AS(solve_general(Environment::zero(1.0, 10), 1.5, {1, 1}), DomainError);

    Environment bad = Environment::zero(1.0, 10);
    bad.b[0][0] = StieltjesMeasure(1.0, {}, {{0.5, 2.0}});
    CHECK_THROWS_AS(solve_general(bad, 1.0, {1, 1}), ContractViolation);

    Environment steep = Environment::zero(1.0, 10);
    steep.b[0][0] = StieltjesMeasure(1.0, {{0, 1, 1e5}}, {});
    CHECK_THROWS_AS(solve_general(steep, 1.0, {1, 1}, euler()), DiscretizationError);

    Environment explosive = Environment::zero(1.0, 100);
    explosive.b[0][0] = StieltjesMeasure(1.0, {{0, 1, -1e6}}, {});
    CHECK_THROWS_AS(solve_general(explosive, 1.0, {1, 1}, euler()), OverflowError);

    SolverOptions broken;
    broken.cell_fixed_point_iters = 0;
    CHECK_THROWS(solve_general(Environment::zero(1.0, 10), 1.0, {1, 1}, broken));
}

TEST_CASE("solution lookup uses the value from the right between nodes")
{
    const auto sol = solve_general(feller_env(10), 1.0, {1, 0});
    CHECK(sol.at(0.3) == sol.v[3]);
    CHECK(sol.at(0.35) == sol.v_left[4]);
    CHECK_THROWS_AS(sol.at(1.2), DomainError);
    const auto mid = solve_general(feller_env(10), 0.55, {1, 0});
    CHECK(mid.at(0.55) == Pair{1, 0});
    CHECK(mid.at(0.8) == Pair{1, 0});
}

TEST_CASE("solve_special_picard examples")
{
    const auto trivial = solve_special_picard(SpecialForm::zero(1.0, 20), 1.0, {0.4, 0.9});
    for (const auto& v : trivial.v)
        CHECK(v == Pair{0.4, 0.9});
    CHECK(trivial.iterations_used <= 1);

    SpecialForm linear = SpecialForm::zero(1.0, 100);
    linear.gamma[0][1] = StieltjesMeasure(1.0, {{0, 1, 1.0}}, {}, nd);
    const auto lin = solve_special_picard(linear, 1.0, {0, 1});
    CHECK(lin.v[0][0] == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t n = 0; n < lin.grid.size(); ++n)
    {
        CHECK(lin.v[n][1] == 1.0);
        CHECK(lin.v[n][0] == doctest::Approx(1 - lin.grid[n]).epsilon(1e-12));
    }

    // v' = -(1 - e^{-v}) backwards from v(1) = a: e^{v(r)} - 1 = (e^a - 1) e^{1-r}.
    SpecialForm jumps = SpecialForm::zero(1.0, 4000);
    jumps.mu[0] = JumpMeasure(1.0, {{0, 1, DiscreteSpatialMeasure({{1, 0, 1}})}}, {});
    const double a = 0.7;
    const auto sol = solve_special_picard(jumps, 1.0, {a, 0});
    const double oracle = std::log1p(std::expm1(a) * std::exp(1.0));
    CHECK(std::abs(sol.v[0][0] - oracle) <= 5e-4);
    const auto fine = solve_special_picard(jumps.with_grid(refine(jumps.grid, 4)), 1.0, {a, 0});
    CHECK(std::abs(fine.v[0][0] - oracle) < std::abs(sol.v[0][0] - oracle) / 3);
}

TEST_CASE("solve_special_picard reports non-convergence")
{
    SpecialForm sf = SpecialForm::zero(1.0, 50);
    sf.mu[0] = JumpMeasure(1.0, {{0, 1, DiscreteSpatialMeasure({{1, 1, 2}})}}, {});
    SolverOptions opts;
    opts.picard_max_iter = 2;
    try
    {
        solve_special_picard(sf, 1.0, {1, 1}, opts);
        FAIL("expected NonConvergenceError");
    }
    catch (const NonConvergenceError& e)
    {
        CHECK(e.iterations() == 2);
        CHECK(e.residual() > opts.picard_tol);
    }
}

TEST_CASE("property: Picard iterates increase and stay below the a-priori bound")
{
    Rng rng(41);
    for (int k = 0; k < 10; ++k)
    {
        const auto sf = cbve::testing::random_special_form(rng, 300);
        const Pair lambda{uniform(rng, 0, 2), uniform(rng, 0, 2)};
        SolverOptions opts;
        opts.record_iterates = true;
        const auto sol = solve_special_picard(sf, 1.0, lambda, opts);
        const double bound = 2 * norm(lambda) * std::exp(special_estimate_rho(sf, 1.0)) + 1e-9;
        REQUIRE(sol.iterates.size() >= 2);
        for (std::size_t it = 0; it < sol.iterates.size(); ++it)
        {
            for (std::size_t n = 0; n < sol.iterates[it].size(); ++n)
            {
                for (std::size_t i = 0; i < 2; ++i)
                {
                    CHECK(sol.iterates[it][n][i] <= bound);
                    if (it > 0)
                        CHECK(sol.iterates[it][n][i] >= sol.iterates[it - 1][n][i] - 1e-12);
                }
            }
        }
    }
}

TEST_CASE("property: Picard solve equals the general sweep of the converted parameters")
{
    Rng rng(42);
    for (int k = 0; k < 10; ++k)
    {
        const auto sf = cbve::testing::random_special_form(rng, 500);
        const Pair lambda{uniform(rng, 0, 2), uniform(rng, 0, 2)};
        const auto picard = solve_special_picard(sf, 1.0, lambda);
        const auto general = solve_general(special_to_general(sf), 1.0, lambda, euler());
        CHECK(sup_gap(picard, general) <= 1e-10);
        const auto stages = sweep_stages(special_stages(sf, sf.grid), 1.0, lambda);
        CHECK(sup_gap(picard, stages) <= 1e-10);
    }
}

TEST_CASE("property: nonnegativity, terminal value, zero argument and monotonicity in lambda")
{
    Rng rng(43);
    for (int k = 0; k < 10; ++k)
    {
        const auto env = cbve::testing::random_environment(rng, 400);
        const double t = env.grid[env.grid.size() * 3 / 4];
        const Pair small{uniform(rng, 0, 1), uniform(rng, 0, 1)};
        const Pair large{small[0] + uniform(rng, 0, 1), small[1] + uniform(rng, 0, 1)};
        const auto a = solve_general(env, t, small);
        const auto b = solve_general(env, t, large);
        const auto z = solve_general(env, t, {0, 0});
        const std::size_t K = a.terminal_index();
        CHECK(a.v[K] == small);
        for (std::size_t n = 0; n < a.grid.size(); ++n)
        {
            for (std::size_t i = 0; i < 2; ++i)
            {
                CHECK(a.v[n][i] >= 0);
                CHECK(a.v[n][i] <= b.v[n][i]);
                CHECK(z.v[n][i] == 0);
            }
        }
    }
}

TEST_CASE("property: first-order convergence of the right-endpoint rule without atoms")
{
    Rng rng(44);
    cbve::testing::EnvShape shape;
    shape.atoms = false;
    for (int k = 0; k < 5; ++k)
    {
        const auto env = cbve::testing::random_environment(rng, 200, shape);
        const Pair lambda{uniform(rng, 0.5, 2), uniform(rng, 0.5, 2)};
        auto v0 = [&](std::size_t factor) {
            return solve_general(env.with_grid(refine(env.grid, factor)), 1.0, lambda, euler()).v[0];
        };
        const double e1 = max_abs_diff(v0(1), v0(4));
        const double e2 = max_abs_diff(v0(2), v0(8));
        CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.2));
    }
}

TEST_CASE("property: clamp events do not grow under refinement")
{
    Rng rng(45);
    for (int k = 0; k < 5; ++k)
    {
        const auto env = cbve::testing::random_environment(rng, 200);
        const auto coarse = solve_general(env, 1.0, {1, 1});
        const auto fine = solve_general(env.with_grid(refine(env.grid, 8)), 1.0, {1, 1});
        CHECK(fine.clamp_events <= coarse.clamp_events);
    }
}

TEST_CASE("h_transform_params examples")
{
    Rng rng(46);
    const auto sf = cbve::testing::random_special_form(rng, 100);
    const StieltjesMeasure zero(1.0);
    const auto id = h_transform_params(sf, zero, zero);
    const auto plain = special_stages(sf, id.stages.grid);
    REQUIRE(id.stages.stages.size() == plain.stages.size());
    for (std::size_t q = 1; q < plain.stages.size(); ++q)
    {
        CHECK(id.stages.stages[q].diag == plain.stages[q].diag);
        CHECK(id.stages.stages[q].cross == plain.stages[q].cross);
    }

    const auto empty = SpecialForm::zero(1.0, 10);
    const double kappa = 0.8;
    const auto drift = h_transform_params(empty, StieltjesMeasure(1.0, {{0, 1, kappa}}, {}), zero);
    CHECK(drift.eta[0].density_at(0.5) == doctest::Approx(kappa));
    CHECK(drift.eta[1].is_zero());

    const auto jump = h_transform_params(empty, StieltjesMeasure(1.0, {}, {{0.5, std::log(2.0)}}), zero);
    CHECK(jump.eta[0].atom_at(0.5) == doctest::Approx(0.5));
}

TEST_CASE("h_transform_solution examples")
{
    Rng rng(47);
    const auto sf = cbve::testing::random_special_form(rng, 100);
    const StieltjesMeasure zero(1.0);
    const Pair lambda{0.6, 1.1};
    const auto u = solve_special_picard(sf, 1.0, lambda);
    const auto same = h_transform_solution(u, zero, zero, lambda);
    CHECK(sup_gap(u, same) == 0);

    const StieltjesMeasure z1(1.0, {{0, 1, 0.3}}, {{0.5, std::log(2.0)}});
    const Pair scaled{lambda[0] * std::exp(-cumulative(z1, 1.0)), lambda[1]};
    const auto u2 = solve_special_picard(sf, 1.0, scaled);
    const auto v = h_transform_solution(u2, z1, zero, lambda);
    for (std::size_t n = 0; n < v.grid.size(); ++n)
    {
        CHECK(v.v[n][0] == doctest::Approx(std::exp(cumulative(z1, v.grid[n])) * u2.v[n][0]));
        CHECK(v.v[n][1] == u2.v[n][1]);
    }
    CHECK_THROWS_AS(h_transform_solution(u, z1, zero, lambda), ContractViolation);
}

TEST_CASE("gronwall_bound examples")
{
    const std::array<GrowthFunction, 2> ones{GrowthFunction::constant(1.0, 1.0), GrowthFunction::constant(1.0, 1.0)};
    auto beta = zero_beta();
    const auto none = gronwall_bound(beta, ones, 1.0);
    CHECK(none[0] == doctest::Approx(1.0));
    CHECK(none[1] == doctest::Approx(1.0));

    beta[0][0] = StieltjesMeasure(1.0, {{0, 1, 1.0}}, {}, nd);
    const auto scalar = gronwall_bound(beta, ones, 1.0);
    CHECK(scalar[0] == doctest::Approx(std::exp(1.0)));
    CHECK(scalar[1] == doctest::Approx(1.0));

    auto coupled = zero_beta();
    coupled[0][1] = StieltjesMeasure(1.0, {{0, 1, 1.0}}, {}, nd);
    coupled[1][0] = StieltjesMeasure(1.0, {{0, 1, 1.0}}, {}, nd);
    const auto both = gronwall_bound(coupled, ones, 1.0);
    CHECK(both[0] == doctest::Approx(2 * std::exp(0.5)));
    CHECK(both[1] == doctest::Approx(2 * std::exp(0.5)));
}

TEST_CASE("special_estimate_rho examples")
{
    CHECK(special_estimate_rho(SpecialForm::zero(1.0, 10), 1.0) == 0);
    auto cross = SpecialForm::zero(1.0, 10);
    cross.gamma[0][1] = StieltjesMeasure(1.0, {{0, 1, 1.0}}, {}, nd);
    CHECK(special_estimate_rho(cross, 1.0) == doctest::Approx(1.0));
    auto cancel = SpecialForm::zero(1.0, 10);
    cancel.gamma[0][0] = StieltjesMeasure(1.0, {{0, 1, -1.0}}, {});
    cancel.mu[0] = JumpMeasure(1.0, {{0, 1, DiscreteSpatialMeasure({{1, 0, 1}})}}, {});
    CHECK(special_estimate_rho(cancel, 1.0) == doctest::Approx(0.0));
    CHECK(special_estimate_rho(cross, 0.25, 1.0) == doctest::Approx(0.75));
}

TEST_CASE("upper_bound_U examples")
{
    CHECK(upper_bound_U(Environment::zero(1.0, 10), 0, 0, 1, {1, 0}) == doctest::Approx(1.0));
    auto env = Environment::zero(1.0, 10);
    env.b[0][1] = StieltjesMeasure(1.0, {{0, 1, 1.0}}, {}, nd);
    CHECK(upper_bound_U(env, 0, 0, 1, {1, 1}) == doctest::Approx(2 * std::sqrt(2.0)));
    const auto feller = solve_general(feller_env(1000), 1.0, {1, 0});
    CHECK(feller.v[0][0] <= upper_bound_U(feller_env(1000), 0, 0, 1, {1, 0}));
}

TEST_CASE("check_flow examples")
{
    CHECK(check_flow(Environment::zero(1.0, 10), 0.2, 0.5, 1.0, {1, 2}) == 0);
    Rng rng(48);
    const auto env = cbve::testing::random_environment(rng, 100);
    CHECK(check_flow(env, 0.2, 1.0, 1.0, {1, 2}) == 0);
    CHECK(check_flow(feller_env(10000), 0.0, 0.5, 1.0, {1, 0}) <= 1e-6);
    CHECK_THROWS_AS(check_flow(env, 0.6, 0.5, 1.0, {1, 1}), DomainError);
}

TEST_CASE("stage sweep runs serial and parallel Picard identically")
{
    Rng rng(49);
    const auto sf = cbve::testing::random_special_form(rng, 2000);
    SolverOptions serial;
    serial.parallel = false;
    const auto a = solve_special_picard(sf, 1.0, {1, 1}, serial);
    const auto b = solve_special_picard(sf, 1.0, {1, 1});
    CHECK(sup_gap(a, b) == 0);
    CHECK(a.iterations_used == b.iterations_used);
}
