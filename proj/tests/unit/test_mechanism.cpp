#include "cbve/mechanism.hpp"

#include "support/random_models.hpp"

#include <doctest.h>

#include <cmath>

using namespace cbve;
using cbve::testing::Rng;
using cbve::testing::uniform;

namespace
{

constexpr auto nd = Monotonicity::nondecreasing;

Environment env_on(std::size_t cells = 20)
{
    return Environment::zero(1.0, cells);
}

} // namespace

TEST_CASE("kernel_Ki examples")
{
    CHECK(kernel_Ki(0, {0, 0}, {3, 2}) == 0);
    CHECK(kernel_Ki(0, {1, 0}, {1, 0}) == doctest::Approx(std::exp(-1.0)));
    CHECK(kernel_Ki(0, {0, 1}, {0, 1}) == doctest::Approx(std::exp(-1.0) - 1));
    CHECK_THROWS_AS(kernel_Ki(2, {1, 0}, {1, 0}), DomainError);
}

TEST_CASE("kernel_K examples")
{
    CHECK(kernel_K({0, 0}, {1, 1}) == 0);
    CHECK(kernel_K({1, 1}, {1, 1}) == doctest::Approx(std::exp(-2.0) + 1));
    const double x = 1e-4;
    const double oracle = x * x / 2 - x * x * x / 6 + x * x * x * x / 24;
    CHECK(kernel_K({x, 0}, {1, 0}) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("kernel_special is one minus the Laplace factor")
{
    CHECK(kernel_special({1, 1}, {0.5, 0.5}) == doctest::Approx(1 - std::exp(-1.0)));
    CHECK(kernel_special({0, 0}, {0.5, 0.5}) == 0);
}

TEST_CASE("property: kernel_K lies between zero and half the squared pairing")
{
    Rng rng(31);
    for (int k = 0; k < 2000; ++k)
    {
        const double scale = std::pow(10.0, uniform(rng, -6, 1));
        const Pair lambda{uniform(rng, 0, 1) * scale, uniform(rng, 0, 1) * scale};
        const Pair z{uniform(rng, 0, 3), uniform(rng, 0, 3)};
        const double x = dot(lambda, z);
        const double K = kernel_K(lambda, z);
        CHECK(K >= 0);
        CHECK(K <= x * x / 2 * (1 + 1e-12));
        CHECK(kernel_Ki(0, lambda, z) >= lambda[0] * z[0] - x - 1e-15);
    }
}

TEST_CASE("VectorFunction rejects malformed values")
{
    const auto grid = TimeGrid::uniform(1.0, 4);
    CHECK_THROWS_AS(VectorFunction(grid, std::vector<Pair>(3)), ContractViolation);
    CHECK_THROWS_AS(VectorFunction(grid, std::vector<Pair>(5, Pair{-1, 0})), DomainError);
}

TEST_CASE("phi_eval examples")
{
    Rng rng(32);
    const auto env = cbve::testing::random_environment(rng, 40);
    const auto zero = VectorFunction::constant(env.grid, {0, 0});
    CHECK(phi_eval(env, 0, zero, 0, 1) == 0);
    CHECK(phi_eval(env, 1, zero, 0, 1) == 0);

    auto linear = env_on();
    const double beta = 0.7, gamma = 0.4, a1 = 1.3, a2 = 0.6;
    linear.b[0][0] = StieltjesMeasure(1.0, {{0, 1, beta}}, {});
    linear.b[0][1] = StieltjesMeasure(1.0, {{0, 1, gamma}}, {}, nd);
    const auto f = VectorFunction::constant(linear.grid, {a1, a2});
    CHECK(phi_eval(linear, 0, f, 0.25, 0.75) == doctest::Approx(0.5 * (a1 * beta - a2 * gamma)));

    auto jumps = env_on();
    const double rho = 2.0, a = 0.8;
    jumps.m[0] = JumpMeasure(1.0, {{0, 1, DiscreteSpatialMeasure({{1, 0, rho}})}}, {});
    const auto g = VectorFunction::constant(jumps.grid, {a, 0});
    CHECK(phi_eval(jumps, 0, g, 0.2, 0.7) == doctest::Approx(0.5 * rho * (std::exp(-a) - 1 + a)));

    auto bad = env_on();
    bad.b[0][0] = StieltjesMeasure(1.0, {}, {{0.5, 1.5}});
    CHECK_THROWS_AS(phi_eval(bad, 0, VectorFunction::constant(bad.grid, {1, 1}), 0, 1), ContractViolation);
}

TEST_CASE("phi_atom examples")
{
    auto env = env_on();
    CHECK(phi_atom(env, 0, {1, 1}, 0.5) == 0);
    env.b[0][0] = StieltjesMeasure(1.0, {}, {{0.5, 1.0}});
    CHECK(phi_atom(env, 0, {0.8, 3}, 0.5) == doctest::Approx(0.8));
    auto cross = env_on();
    cross.b[0][1] = StieltjesMeasure(1.0, {}, {{0.5, 0.5}}, nd);
    CHECK(phi_atom(cross, 0, {0, 2}, 0.5) == doctest::Approx(-1.0));
}

TEST_CASE("lipschitz_constants examples")
{
    const auto env = env_on();
    const auto zero = VectorFunction::constant(env.grid, {0, 0});
    const auto c0 = lipschitz_constants(env, zero, zero, 1.0);
    CHECK(c0.c1 == 1);
    CHECK(c0.c2.is_zero());

    const auto c7 = lipschitz_constants(env, VectorFunction::constant(env.grid, {1, 1}),
                                        VectorFunction::constant(env.grid, {2, 2}), 1.0);
    CHECK(c7.c1 == 7);

    auto jumps = env_on();
    jumps.m[0] = JumpMeasure(1.0, {{0, 1, DiscreteSpatialMeasure({{0.5, 0.5, 1}})}}, {});
    const auto c = lipschitz_constants(jumps, zero, zero, 1.0);
    CHECK(c.c2.density_at(0.5) == doctest::Approx(1.5));
}

TEST_CASE("property: Lipschitz inequality on random instances")
{
    Rng rng(33);
    for (int k = 0; k < 50; ++k)
    {
        const auto env = cbve::testing::random_environment(rng, 50);
        const auto f = cbve::testing::random_function(rng, env.grid, 3.0);
        const auto g = cbve::testing::random_function(rng, env.grid, 3.0);
        const double r = env.grid[5];
        const double t = env.grid[env.grid.size() - 3];
        const auto consts = lipschitz_constants(env, f, g, t);
        for (auto rule : {EndpointRule::right, EndpointRule::trapezoid})
        {
            const double rhs = consts.c1 * lipschitz_integral(consts, f, g, r, t, rule);
            for (std::size_t i = 0; i < 2; ++i)
                CHECK(std::abs(phi_eval(env, i, f, r, t, rule) - phi_eval(env, i, g, r, t, rule)) <= rhs);
        }
    }
}

TEST_CASE("property: special evaluator of phi_n matches the general form of the same parameters")
{
    Rng rng(34);
    for (int k = 0; k < 10; ++k)
    {
        const auto env = cbve::testing::random_environment(rng, 30);
        const auto f = cbve::testing::random_function(rng, env.grid, 2.0);
        for (int n : {1, 4, 16})
        {
            const auto sf = build_phi_n(env, n);
            const auto general = special_to_general(sf);
            for (std::size_t i = 0; i < 2; ++i)
            {
                const double special = phi_n_eval(env, i, f, 0, 1, n);
                CHECK(special == doctest::Approx(phi_eval(general, i, f, 0, 1)).epsilon(1e-10));
                CHECK(special == doctest::Approx(special_phi_eval(sf, i, f, 0, 1)).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("property: phi_n increases in n towards phi")
{
    Rng rng(35);
    for (int k = 0; k < 20; ++k)
    {
        const auto env = cbve::testing::random_environment(rng, 30);
        const auto f = cbve::testing::random_function(rng, env.grid, 2.0);
        for (std::size_t i = 0; i < 2; ++i)
        {
            const double target = phi_eval(env, i, f, 0, 1);
            double previous = -INFINITY;
            for (int n : {1, 2, 4, 8, 16, 32})
            {
                const double value = phi_n_eval(env, i, f, 0, 1, n);
                CHECK(value >= previous - 1e-12);
                CHECK(value <= target + 1e-12);
                previous = value;
            }
            CHECK(target - previous <= 0.5);
        }
    }
}

TEST_CASE("property: phi - phi_n grows with f and with the interval")
{
    Rng rng(36);
    for (int k = 0; k < 20; ++k)
    {
        const auto env = cbve::testing::random_environment(rng, 30);
        const auto f = cbve::testing::random_function(rng, env.grid, 1.0);
        std::vector<Pair> larger = f.values;
        for (auto& v : larger)
            v = {v[0] + uniform(rng, 0, 1), v[1] + uniform(rng, 0, 1)};
        const VectorFunction g(env.grid, larger);
        const std::size_t a = std::uniform_int_distribution<std::size_t>(0, 15)(rng);
        const std::size_t b = std::uniform_int_distribution<std::size_t>(a, 25)(rng);
        const double r = env.grid[a];
        const double s = env.grid[b];
        const double t = 1.0;
        for (int n : {1, 3, 10})
        {
            for (std::size_t i = 0; i < 2; ++i)
            {
                const double small = phi_eval(env, i, f, s, t) - phi_n_eval(env, i, f, s, t, n);
                const double big = phi_eval(env, i, g, r, t) - phi_n_eval(env, i, g, r, t, n);
                CHECK(small <= big + 1e-12);
            }
        }
    }
}

TEST_CASE("discretize places cells and atoms")
{
    auto env = env_on(4);
    env.b[0][0] = StieltjesMeasure(1.0, {{0, 1, 2.0}}, {{0.5, 0.25}});
    const auto dm = discretize(env, env.grid);
    REQUIRE(dm.cells.size() == 4);
    CHECK(dm.cells[1].drift[0] == doctest::Approx(0.5));
    CHECK(dm.atoms[2].drift[0] == 0.25);
    CHECK(dm.atoms[1].empty());
}
