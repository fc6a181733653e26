#pragma once

// Branching-mechanism functionals and their grid discretizations.

#include "cbve/environment.hpp"

#include <vector>

namespace cbve
{

// e^{-<lambda,z>} - 1 + lambda_i z_i
double kernel_Ki(std::size_t i, const Pair& lambda, const Pair& z);

// e^{-<lambda,z>} - 1 + <lambda,z>, accurate in the quadratic regime.
double kernel_K(const Pair& lambda, const Pair& z);

// 1 - e^{-<lambda,z>}
double kernel_special(const Pair& lambda, const Pair& z);

// Nonnegative pair-valued function sampled at the nodes of a grid.
struct VectorFunction
{
    TimeGrid grid;
    std::vector<Pair> values;

    VectorFunction(TimeGrid g, std::vector<Pair> v);

    static VectorFunction constant(TimeGrid g, const Pair& value);
};

//---------------------------------------------------------------------------//
// General mechanism on a grid
//---------------------------------------------------------------------------//

// Masses of the parameters on one cell or at one node.
//   phi_i(v) = drift_i v_i - cross_i v_j + quad_i v_i^2 + sum_p w_p K(v, z_p)
struct GeneralCoefficients
{
    Pair drift{};
    Pair cross{};
    Pair quad{};
    std::array<std::vector<SpatialPoint>, 2> jumps;

    Pair phi(const Pair& v) const;
    // Linear part: drift_i v_i - cross_i v_j.
    Pair linear(const Pair& v) const;
    bool empty() const noexcept;
};

struct DiscreteMechanism
{
    TimeGrid grid;
    std::vector<GeneralCoefficients> cells; // cell k spans (grid[k], grid[k+1])
    std::vector<GeneralCoefficients> atoms; // atom at node k
};

// Requires every atom of env to be a node of grid.
DiscreteMechanism discretize(const Environment& env, const TimeGrid& grid);

//---------------------------------------------------------------------------//
// Special (finite-activity) mechanism on a grid
//---------------------------------------------------------------------------//

// One backward stage V -> V + D(V) with
//   D_i(V) = diag_i V_i + cross_i V_j + sum_p w_p (1 - e^{-<V, z_p>})
struct Stage
{
    Pair diag{};
    Pair cross{};
    std::array<std::vector<SpatialPoint>, 2> jumps;

    Pair increment(const Pair& v) const;
    // Increment without the diagonal term.
    Pair offdiag_increment(const Pair& v) const;
};

// Stages alternate between node atoms and cells. Position 2m holds the value
// at node m, position 2m-1 its left limit; stage q maps position q to q-1.
// Stage 2m is the atom at node m, stage 2m-1 is cell m-1 evaluated at its
// right end.
struct StageSequence
{
    TimeGrid grid;
    std::vector<Stage> stages; // index q in [1, 2 * cells]; stages[0] is unused

    std::size_t positions() const noexcept { return stages.size(); }
};

StageSequence special_stages(const SpecialForm& sf, const TimeGrid& grid);

//---------------------------------------------------------------------------//
// Functionals over (r, t]
//---------------------------------------------------------------------------//

// phi_i(f, (r,t]) for the general mechanism; f lives on a grid containing the
// atoms of env.
double phi_eval(const Environment& env,
                std::size_t i,
                const VectorFunction& f,
                double r,
                double t,
                EndpointRule rule = EndpointRule::right);

// Contribution of the single time s.
double phi_atom(const Environment& env, std::size_t i, const Pair& lambda, double s);

// -int f_i dgamma_ii - int f_j dgamma_ij - int int (1 - e^{-<f,z>}) dmu_i
double special_phi_eval(const SpecialForm& sf,
                        std::size_t i,
                        const VectorFunction& f,
                        double r,
                        double t,
                        EndpointRule rule = EndpointRule::right);

// phi_{n,i}(f, (r,t]) through build_phi_n.
double phi_n_eval(const Environment& env,
                  std::size_t i,
                  const VectorFunction& f,
                  double r,
                  double t,
                  int n,
                  EndpointRule rule = EndpointRule::right);

struct LipschitzConstants
{
    double c1;
    StieltjesMeasure c2;
};

LipschitzConstants lipschitz_constants(const Environment& env,
                                       const VectorFunction& f,
                                       const VectorFunction& g,
                                       double t);

// int_{(r,t]} sup_i |f_i - g_i| dC2 with the same endpoint rule as phi_eval.
double lipschitz_integral(const LipschitzConstants& constants,
                          const VectorFunction& f,
                          const VectorFunction& g,
                          double r,
                          double t,
                          EndpointRule rule = EndpointRule::right);

} // namespace cbve
