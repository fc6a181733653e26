#pragma once

// Backward solvers for the cumulant system, the h-transform, and the a-priori
// bounds used to check them.

#include "cbve/mechanism.hpp"

#include <vector>

namespace cbve
{

enum class SolveMethod
{
    general_backward,
    special_picard,
    stage_sweep,
};

const char* to_string(SolveMethod m);

struct SolverOptions
{
    double picard_tol = 1e-12;
    int picard_max_iter = 200;
    // 1: right endpoint. 2 (default): right-endpoint predictor, trapezoid corrector.
    int cell_fixed_point_iters = 2;
    double negativity_tol = 1e-9;
    // Keep every Picard iterate (node values, original scale).
    bool record_iterates = false;
    // Evaluate Picard stages with OpenMP.
    bool parallel = true;

    void check() const;
};

// r -> v_{r,t}(lambda) at the nodes of grid. Nodes at or after t carry lambda.
struct CumulantSolution
{
    double t = 0;
    Pair lambda{};
    TimeGrid grid{std::vector<double>{0.0, 1.0}};
    std::vector<Pair> v;      // value at each node
    std::vector<Pair> v_left; // left limit at each node (v_left[0] = v[0])
    SolveMethod method = SolveMethod::general_backward;
    int iterations_used = 0;
    double max_residual = 0;
    std::size_t clamp_events = 0;
    std::vector<std::vector<Pair>> iterates;

    // Value at an arbitrary r in [0, T]: node values at nodes, otherwise the
    // left limit of the next node.
    Pair at(double r) const;
    std::size_t terminal_index() const;
};

CumulantSolution solve_general(const Environment& env,
                               double t,
                               const Pair& lambda,
                               const SolverOptions& opts = {});

CumulantSolution solve_special_picard(const SpecialForm& sf,
                                      double t,
                                      const Pair& lambda,
                                      const SolverOptions& opts = {});

// Direct backward sweep of a stage sequence from terminal t: position q-1 is
// position q plus the stage increment.
CumulantSolution sweep_stages(const StageSequence& seq,
                              double t,
                              const Pair& lambda,
                              const SolverOptions& opts = {});

//---------------------------------------------------------------------------//
// h-transform
//---------------------------------------------------------------------------//

// The coefficient set of the transformed system for rescaling functions zeta.
struct HTransform
{
    std::array<StieltjesMeasure, 2> zeta;
    // eta_i = zeta_{i,c} + sum (1 - e^{-Delta zeta_i})
    std::array<StieltjesMeasure, 2> eta;
    // -eta_i + e^{-Delta zeta_i} gamma_ii as a measure.
    std::array<StieltjesMeasure, 2> drift;
    // Transformed stages on the grid of the special form (aligned to zeta).
    StageSequence stages;
};

HTransform h_transform_params(const SpecialForm& sf,
                              const StieltjesMeasure& zeta1,
                              const StieltjesMeasure& zeta2);

// Transforms the stage sequence itself. zeta is given by its increments per
// stage (index q as in StageSequence; entry 0 unused).
StageSequence h_transform_stages(const StageSequence& seq, const std::vector<Pair>& zeta_increments);

// v_{i,r} = e^{zeta_i(r)} u_{i,r}; u must have been solved for the terminal
// argument (e^{-zeta_1(t)} lambda_1, e^{-zeta_2(t)} lambda_2).
CumulantSolution h_transform_solution(const CumulantSolution& u,
                                      const StieltjesMeasure& zeta1,
                                      const StieltjesMeasure& zeta2,
                                      const Pair& lambda);

//---------------------------------------------------------------------------//
// Bounds
//---------------------------------------------------------------------------//

// a(s) = initial + increments((0, s]), nondecreasing.
struct GrowthFunction
{
    double initial = 0;
    StieltjesMeasure increments;

    double operator()(double s) const;
    static GrowthFunction constant(double horizon, double value);
};

// Right side of the two-type Gronwall bound at time t for nondecreasing beta.
Pair gronwall_bound(const std::array<std::array<StieltjesMeasure, 2>, 2>& beta,
                    const std::array<GrowthFunction, 2>& a,
                    double t);

// rho(t) of the special-form a-priori estimate; ||rho_i|| is the variation of
// the combined measure gamma_ii + int z_i mu_i.
double special_estimate_rho(const SpecialForm& sf, double t);
// rho(t) - rho(r).
double special_estimate_rho(const SpecialForm& sf, double r, double t);

// ||lambda|| (1 + bbar_ij(t)) exp{e^{||b_jj||(t)} bbar_12(t) bbar_21(t) + ||b_11||(t) + ||b_22||(t)}
double upper_bound_U(const Environment& env, std::size_t i, double r, double t, const Pair& lambda);

// max |v_{r,t} - v_{r,s}(v_{s,t})| with each solve on the environment grid
// extended by its own endpoints.
double check_flow(const Environment& env,
                  double r,
                  double s,
                  double t,
                  const Pair& lambda,
                  const SolverOptions& opts = {});

} // namespace cbve
