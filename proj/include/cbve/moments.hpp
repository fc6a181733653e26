#pragma once

// First moments: the linear backward system
//   pi_i(r) = lambda_i + int_(r,t] pi_j dbbar_ij - int_(r,t] pi_i db_ii

#include "cbve/solver.hpp"

namespace cbve
{

struct MomentSolution
{
    double t = 0;
    Pair lambda{};
    TimeGrid grid{std::vector<double>{0.0, 1.0}};
    std::vector<Pair> pi;
    std::vector<Pair> pi_left;

    Pair at(double r) const;
};

// lambda may be signed; it is split into sgn(lambda_1)(|lambda_1|, 0) and
// sgn(lambda_2)(0, |lambda_2|), each solved separately. Cell stepping follows
// opts.cell_fixed_point_iters exactly as in solve_general.
MomentSolution solve_moment(const Environment& env,
                            double t,
                            const Pair& lambda,
                            const SolverOptions& opts = {});

// Max over nodes r <= t of |v_{r,t}(h lambda) / h - pi_{r,t}(lambda)| per type.
Pair finite_diff_check(const Environment& env,
                       double t,
                       const Pair& lambda,
                       double h,
                       const SolverOptions& opts = {});

// <x, pi_{r,t}(lambda)>
double mean_of_transition(const Environment& env,
                          double r,
                          double t,
                          const Pair& x,
                          const Pair& lambda,
                          const SolverOptions& opts = {});

} // namespace cbve
