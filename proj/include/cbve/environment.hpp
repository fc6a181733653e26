#pragma once

// Model parameters of the two-type backward system and their derived
// quantities: admissibility, bottlenecks, the compensated cross drift
// bbar_ij, and the conversions between general and special parameterizations.

#include "cbve/measures.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace cbve
{

// General parameters (b_ii, b_ij, c_i, m_i).
//   b[i][i]  signed drift of type i
//   b[i][j]  nondecreasing cross drift from type j into the equation of type i
//   c[i]     nondecreasing quadratic (diffusion) coefficient, no atoms
//   m[i]     jump measure of type i
struct Environment
{
    TimeGrid grid;
    std::array<std::array<StieltjesMeasure, 2>, 2> b;
    std::array<StieltjesMeasure, 2> c;
    std::array<JumpMeasure, 2> m;

    double horizon() const noexcept { return grid.horizon(); }

    // All-zero parameters on a uniform grid.
    static Environment zero(double horizon, std::size_t cells);

    // Same parameters on another grid over the same horizon.
    Environment with_grid(TimeGrid g) const;

    bool operator==(const Environment&) const = default;
};

// Finite-activity parameters (gamma_ii, gamma_ij, mu_i):
//   u_i = lambda_i + int u_i dgamma_ii + int u_j dgamma_ij + int int (1 - e^{-<u,z>}) dmu_i
struct SpecialForm
{
    TimeGrid grid;
    std::array<std::array<StieltjesMeasure, 2>, 2> gamma;
    std::array<JumpMeasure, 2> mu;

    double horizon() const noexcept { return grid.horizon(); }

    static SpecialForm zero(double horizon, std::size_t cells);

    SpecialForm with_grid(TimeGrid g) const;

    bool operator==(const SpecialForm&) const = default;
};

struct Bottleneck
{
    double time;
    std::size_t type;

    bool operator==(const Bottleneck&) const = default;
};

struct ValidationReport
{
    std::array<double, 2> moment{};    // m_i(T)
    std::array<double, 2> delta_max{}; // max over time atoms of delta_i(s); 0 without atoms
    std::vector<Bottleneck> bottlenecks;
    bool ok = true;
    std::vector<std::string> messages;
};

// Tolerance on delta_i <= 1 and on the bottleneck test |Delta b_ii - 1| <= tol.
inline constexpr double atom_tolerance = 1e-12;

// Grid that contains every breakpoint and atom time of the given parameters.
TimeGrid aligned_grid(const TimeGrid& base, const Environment& env);
TimeGrid aligned_grid(const TimeGrid& base, const SpecialForm& sf);

// Reports admissibility; throws ContractViolation only for malformed structure
// (horizon mismatch, atoms off the grid).
ValidationReport validate(const Environment& env);

// Throws ContractViolation carrying the report messages unless validate(env).ok.
void require_valid(const Environment& env);

// Structural checks for special forms: Delta gamma_ii > -1, gamma_ij nondecreasing.
std::vector<std::string> special_form_violations(const SpecialForm& sf);
void require_valid(const SpecialForm& sf);

// int_0^t int (z_i^2 1{|z|<=1} + z_i 1{|z|>1} + z_j) m_i(ds, dz)
double moment_functional(const Environment& env, std::size_t i, double t);

// Delta b_ii(s) + int z_i m_i({s}, dz)
double delta_i(const Environment& env, std::size_t i, double s);

std::vector<Bottleneck> bottlenecks(const Environment& env);

// Largest bottleneck time in (0, t].
std::optional<double> last_bottleneck(const Environment& env, double t);

// bbar_ij = b_ij + int z_j m_i, for j = other(i).
StieltjesMeasure bbar(const Environment& env, std::size_t i);

// c_i = 0, b_ij = gamma_ij, m_i = mu_i, b_ii = -gamma_ii - int z_i mu_i.
Environment special_to_general(const SpecialForm& sf);

// Finite-activity approximation phi_n of the mechanism of env.
SpecialForm build_phi_n(const Environment& env, int n);

} // namespace cbve
