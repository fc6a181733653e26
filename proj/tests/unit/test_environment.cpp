#include "cbve/environment.hpp"

#include "support/random_models.hpp"

#include <doctest.h>

#include <cmath>

using namespace cbve;
using cbve::testing::Rng;

namespace
{

constexpr auto nd = Monotonicity::nondecreasing;

Environment env_on(std::size_t cells = 10)
{
    return Environment::zero(1.0, cells);
}

void align(Environment& env)
{
    env.grid = aligned_grid(env.grid, env);
}

} // namespace

TEST_CASE("validate: zero environment is admissible")
{
    const auto report = validate(env_on());
    CHECK(report.ok);
    CHECK(report.moment[0] == 0);
    CHECK(report.moment[1] == 0);
    CHECK(report.bottlenecks.empty());
}

TEST_CASE("validate: jump atom offsets the drift atom up to delta = 1")
{
    auto env = env_on();
    env.b[0][0] = StieltjesMeasure(1.0, {}, {{0.5, 0.6}});
    env.m[0] = JumpMeasure(1.0, {}, {{0.5, DiscreteSpatialMeasure({{0.5, 0, 0.8}})}});
    const auto report = validate(env);
    CHECK(report.ok);
    CHECK(report.delta_max[0] == doctest::Approx(1.0));
}

TEST_CASE("validate: delta above one is reported with its time")
{
    auto env = env_on();
    env.b[0][0] = StieltjesMeasure(1.0, {}, {{0.5, 1.2}});
    const auto report = validate(env);
    CHECK_FALSE(report.ok);
    REQUIRE_FALSE(report.messages.empty());
    CHECK(report.messages.front().find("0.5") != std::string::npos);
    CHECK_THROWS_AS(require_valid(env), ContractViolation);
}

TEST_CASE("validate: structural problems")
{
    auto env = env_on();
    env.c[0] = StieltjesMeasure(1.0, {}, {{0.5, 0.1}}, nd);
    CHECK_FALSE(validate(env).ok);

    auto off = env_on(10);
    off.b[0][0] = StieltjesMeasure(1.0, {}, {{0.55, 0.1}});
    CHECK_THROWS_AS(validate(off), ContractViolation);

    auto decreasing = env_on();
    decreasing.b[0][1] = StieltjesMeasure(1.0, {{0, 1, -0.5}}, {});
    CHECK_FALSE(validate(decreasing).ok);
}

TEST_CASE("moment functional splits small and large jumps")
{
    auto env = env_on();
    // ||z|| <= 1: z_1^2 + z_2; ||z|| > 1: z_1 + z_2.
    env.m[0] = JumpMeasure(1.0, {{0, 1, DiscreteSpatialMeasure({{0.5, 0.2, 2.0}, {2.0, 1.0, 0.5}})}}, {});
    const double expected = 2.0 * (0.25 + 0.2) + 0.5 * (2.0 + 1.0);
    CHECK(moment_functional(env, 0, 1.0) == doctest::Approx(expected));
    CHECK(moment_functional(env, 0, 0.5) == doctest::Approx(expected / 2));
    CHECK(validate(env).moment[0] == doctest::Approx(expected));
}

TEST_CASE("delta_i examples")
{
    auto env = env_on();
    CHECK(delta_i(env, 0, 0.5) == 0);
    env.b[0][0] = StieltjesMeasure(1.0, {}, {{0.5, 0.4}});
    env.m[0] = JumpMeasure(1.0, {}, {{0.5, DiscreteSpatialMeasure({{1, 0, 0.3}})}});
    CHECK(delta_i(env, 0, 0.5) == doctest::Approx(0.7));
    auto critical = env_on();
    critical.b[0][0] = StieltjesMeasure(1.0, {}, {{0.5, 1.0}});
    CHECK(delta_i(critical, 0, 0.5) == 1.0);
    CHECK_THROWS_AS(delta_i(env, 2, 0.5), DomainError);
}

TEST_CASE("bottlenecks examples")
{
    auto env = env_on();
    env.b[0][0] = StieltjesMeasure(1.0, {}, {{0.5, 1.0}});
    const auto found = bottlenecks(env);
    REQUIRE(found.size() == 1);
    CHECK(found[0] == Bottleneck{0.5, 0});

    auto compensated = env;
    compensated.b[0][1] = StieltjesMeasure(1.0, {}, {{0.5, 0.1}}, nd);
    CHECK(bottlenecks(compensated).empty());

    CHECK(bottlenecks(env_on()).empty());
}

TEST_CASE("last_bottleneck examples")
{
    auto env = env_on();
    env.b[0][0] = StieltjesMeasure(1.0, {}, {{0.3, 1.0}});
    env.b[1][1] = StieltjesMeasure(1.0, {}, {{0.7, 1.0}});
    CHECK(last_bottleneck(env, 0.5).value() == 0.3);
    CHECK(last_bottleneck(env, 1.0).value() == 0.7);
    CHECK_FALSE(last_bottleneck(env_on(), 1.0).has_value());
}

TEST_CASE("bbar examples")
{
    auto env = env_on();
    env.b[0][1] = StieltjesMeasure(1.0, {{0, 1, 1.0}}, {}, nd);
    CHECK(bbar(env, 0) == env.b[0][1]);

    auto kernel = env_on();
    kernel.m[0] = JumpMeasure(1.0, {{0, 1, DiscreteSpatialMeasure({{0, 1, 2.0}})}}, {});
    CHECK(bbar(kernel, 0).density_at(0.3) == doctest::Approx(2.0));

    env.m[0] = JumpMeasure(1.0, {}, {{0.5, DiscreteSpatialMeasure({{0, 0.5, 1}})}});
    CHECK(cumulative(bbar(env, 0), 1.0) == doctest::Approx(1.5));
}

TEST_CASE("special_to_general examples")
{
    const auto zero = special_to_general(SpecialForm::zero(1.0, 10));
    CHECK(zero.b == Environment::zero(1.0, 10).b);

    auto sf = SpecialForm::zero(1.0, 10);
    sf.gamma[0][0] = StieltjesMeasure(1.0, {{0, 1, 0.5}}, {});
    sf.mu[0] = JumpMeasure(1.0, {{0, 1, DiscreteSpatialMeasure({{1, 0, 1.0}})}}, {});
    CHECK(special_to_general(sf).b[0][0].density_at(0.5) == doctest::Approx(-1.5));

    auto atoms = SpecialForm::zero(1.0, 10);
    atoms.gamma[0][0] = StieltjesMeasure(1.0, {}, {{0.5, -0.5}});
    atoms.mu[0] = JumpMeasure(1.0, {}, {{0.5, DiscreteSpatialMeasure({{0.4, 0, 1.0}})}});
    CHECK(special_to_general(atoms).b[0][0].atom_at(0.5) == doctest::Approx(0.1));
}

TEST_CASE("special form structural checks")
{
    auto sf = SpecialForm::zero(1.0, 10);
    sf.gamma[0][0] = StieltjesMeasure(1.0, {}, {{0.5, -1.0}});
    CHECK_FALSE(special_form_violations(sf).empty());
    CHECK_THROWS_AS(require_valid(sf), ContractViolation);
}

TEST_CASE("build_phi_n examples")
{
    const auto zero = build_phi_n(env_on(), 3);
    for (const auto& row : zero.gamma)
        for (const auto& g : row)
            CHECK(g.is_zero());
    CHECK(zero.mu[0].is_zero());

    auto diffusion = env_on();
    diffusion.c[0] = StieltjesMeasure(1.0, {{0, 1, 1.0}}, {}, nd);
    const auto sf = build_phi_n(diffusion, 2);
    CHECK(sf.gamma[0][0].density_at(0.5) == doctest::Approx(-4.0));
    const auto* kernel = sf.mu[0].kernel_at(0.5);
    REQUIRE(kernel != nullptr);
    REQUIRE(kernel->points().size() == 1);
    CHECK(kernel->points()[0] == SpatialPoint{0.5, 0.0, 8.0});

    auto jumps = env_on();
    jumps.m[0] = JumpMeasure(1.0, {{0, 1, DiscreteSpatialMeasure({{2, 0, 1.0}})}}, {});
    const auto thinned = build_phi_n(jumps, 1).mu[0].kernel_at(0.5);
    REQUIRE(thinned != nullptr);
    CHECK(thinned->points()[0].weight == doctest::Approx(1 - std::exp(-1.0)));

    CHECK_THROWS_AS(build_phi_n(jumps, 0), DomainError);
}

TEST_CASE("property: build_phi_n keeps atoms admissible and cross drifts above b_ij")
{
    Rng rng(21);
    for (int k = 0; k < 20; ++k)
    {
        const auto env = cbve::testing::random_environment(rng, 50);
        for (int n : {1, 2, 4, 8, 16, 32})
        {
            const auto sf = build_phi_n(env, n);
            CHECK(special_form_violations(sf).empty());
            for (std::size_t i = 0; i < 2; ++i)
            {
                const std::size_t j = other(i);
                // gamma_{n,ij} - b_ij is a nonnegative measure.
                CHECK((sf.gamma[i][j] - env.b[i][j]).is_nonnegative());
                const double t = 1.0;
                const double z_mass =
                    cumulative(sf.mu[i].moment_measure([](const Pair& z) { return z[0] + z[1]; }), t);
                CHECK(z_mass <= 2 * n * cumulative(env.c[i], t) + (n + 1) * moment_functional(env, i, t) + 1e-9);
            }
        }
    }
}

TEST_CASE("property: bottlenecks are sorted and last_bottleneck is their maximum")
{
    auto env = env_on(20);
    env.b[0][0] = StieltjesMeasure(1.0, {}, {{0.25, 1.0}, {0.75, 1.0}});
    env.b[1][1] = StieltjesMeasure(1.0, {}, {{0.5, 1.0}});
    align(env);
    const auto b = bottlenecks(env);
    REQUIRE(b.size() == 3);
    CHECK(std::is_sorted(b.begin(), b.end(), [](auto x, auto y) { return x.time < y.time; }));
    for (double t : {0.3, 0.6, 0.8, 1.0})
    {
        double expected = 0;
        for (const auto& x : b)
            if (x.time <= t)
                expected = x.time;
        CHECK(last_bottleneck(env, t).value() == expected);
    }
}
