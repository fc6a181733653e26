#include "cbve/simulator.hpp"

#include "cbve/log.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace cbve
{
namespace
{

constexpr double state_limit = 1e300;

std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

PathSimulator::PointTable make_table(const DiscreteSpatialMeasure* m)
{
    PathSimulator::PointTable table;
    if (!m)
        return table;
    double acc = 0;
    for (const auto& p : m->points())
    {
        acc += p.weight;
        table.points.push_back(p);
        table.cumulative.push_back(acc);
    }
    table.total = acc;
    return table;
}

const SpatialPoint& draw_point(const PathSimulator::PointTable& table, double u)
{
    const double target = u * table.total;
    auto it = std::upper_bound(table.cumulative.begin(), table.cumulative.end(), target);
    if (it == table.cumulative.end())
        --it;
    return table.points[static_cast<std::size_t>(it - table.cumulative.begin())];
}

// X <- exp(M tau) X for a 2x2 Metzler matrix M. Every entry of the exponential
// is formed as a sum of nonnegative terms.
void linear_flow(const PathSimulator::Segment& seg, double tau, Pair& x)
{
    if (tau <= 0)
        return;
    const double mean = 0.5 * (seg.m00 + seg.m11);
    const double half = 0.5 * (seg.m00 - seg.m11);
    const double omega = std::sqrt(half * half + seg.m01 * seg.m10);
    const double arg = omega * tau;

    double e00, e11, off;
    if (omega == 0)
    {
        e00 = e11 = std::exp(mean * tau);
        off = e00 * tau;
    }
    else
    {
        const double s = half / omega;
        const double up = std::exp(mean * tau + arg);
        const double down = std::exp(mean * tau - arg);
        e00 = 0.5 * ((1 + s) * up + (1 - s) * down);
        e11 = 0.5 * ((1 - s) * up + (1 + s) * down);
        if (arg < 1e-4)
            off = std::exp(mean * tau) * tau * (1 + arg * arg / 6);
        else
            off = (up - down) / (2 * omega);
    }
    const Pair y{e00 * x[0] + seg.m01 * off * x[1], seg.m10 * off * x[0] + e11 * x[1]};
    x = y;
}

void check_state(const Pair& x, double time)
{
    for (double v : x)
    {
        if (!std::isfinite(v) || v > state_limit)
        {
            std::ostringstream os;
            os << "state overflow at time " << time;
            throw OverflowError(os.str());
        }
        if (v < 0)
        {
            std::ostringstream os;
            os << "negative state " << v << " at time " << time;
            throw ContractViolation(os.str());
        }
    }
}

void require_state(const Pair& x0)
{
    if (!(std::isfinite(x0[0]) && std::isfinite(x0[1]) && x0[0] >= 0 && x0[1] >= 0))
        throw DomainError("initial state must be finite and nonnegative");
}

void require_paths(std::size_t n)
{
    if (n < 100)
        throw DomainError("at least 100 paths are required");
}

struct NeumaierSum
{
    double sum = 0;
    double carry = 0;

    void add(double x)
    {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            carry += (sum - t) + x;
        else
            carry += (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + carry; }
};

TimeGrid reference_grid(const SpecialForm& sf, double t, std::size_t min_cells, std::size_t& factor)
{
    const double extra[] = {t};
    TimeGrid base = aligned_grid(sf.grid, sf);
    if (!base.find(t))
        base = base.with_nodes(extra);
    factor = std::max<std::size_t>(1, (min_cells + base.cells() - 1) / base.cells());
    factor += factor % 2;
    return base;
}

double score(double estimate, double target, double std_error, double target_error)
{
    const double diff = estimate - target;
    if (std_error > 0)
        return diff / std_error;
    if (target_error > 0)
        return diff / target_error;
    if (diff == 0)
        return 0;
    return std::copysign(std::numeric_limits<double>::infinity(), diff);
}

// Accumulated rounding of a sweep over the given number of cells.
double rounding_floor(double target, std::size_t cells)
{
    return static_cast<double>(cells) * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(target));
}

} // namespace

const char* to_string(EventKind k)
{
    switch (k)
    {
    case EventKind::deterministic_atom:
        return "deterministic_atom";
    case EventKind::branch_jump:
        return "branch_jump";
    }
    return "unknown";
}

std::uint64_t SeedSpec::path_seed(std::uint64_t path_index) const noexcept
{
    return splitmix64(master_seed + (path_index + 1) * 0x9E3779B97F4A7C15ULL);
}

PathSimulator::PathSimulator(const SpecialForm& sf, double t) : t_(t)
{
    require_valid(sf);
    const double tol = sf.grid.tolerance();
    if (!std::isfinite(t) || t < -tol || t > sf.horizon() + tol)
        throw DomainError("simulation horizon outside [0, T]");
    t_ = std::clamp(t, 0.0, sf.horizon());

    std::vector<double> cuts{0.0, t_};
    auto add = [&](const std::vector<double>& b) {
        for (double s : b)
            if (s > tol && s < t_ - tol)
                cuts.push_back(s);
    };
    for (const auto& row : sf.gamma)
        for (const auto& g : row)
            add(g.breakpoints());
    for (const auto& m : sf.mu)
        add(m.breakpoints());
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> merged;
    for (double s : cuts)
        if (merged.empty() || s - merged.back() > tol)
            merged.push_back(s);
    if (merged.size() == 1)
        merged.push_back(t_);
    merged.back() = t_;

    for (std::size_t k = 0; k + 1 < merged.size(); ++k)
    {
        Segment seg;
        seg.t0 = merged[k];
        seg.t1 = merged[k + 1];
        const double mid = 0.5 * (seg.t0 + seg.t1);
        seg.m00 = sf.gamma[0][0].density_at(mid);
        seg.m11 = sf.gamma[1][1].density_at(mid);
        seg.m01 = sf.gamma[1][0].density_at(mid);
        seg.m10 = sf.gamma[0][1].density_at(mid);
        seg.growth = std::max({0.0, seg.m00 + seg.m10, seg.m11 + seg.m01});
        for (std::size_t i = 0; i < 2; ++i)
            seg.kernel[i] = make_table(sf.mu[i].kernel_at(mid));
        segments_.push_back(std::move(seg));

        const double s = merged[k + 1];
        AtomStep atom{s, {}, {}, {}};
        bool any = false;
        for (std::size_t i = 0; i < 2; ++i)
        {
            const std::size_t j = other(i);
            atom.diag[i] = sf.gamma[i][i].atom_at(s, tol);
            atom.incoming[i] = sf.gamma[j][i].atom_at(s, tol);
            atom.jumps[i] = make_table(sf.mu[i].atom_at(s, tol));
            any = any || atom.diag[i] != 0 || atom.incoming[i] != 0 || atom.jumps[i].total > 0;
        }
        atoms_.push_back(any ? std::optional<AtomStep>(std::move(atom)) : std::nullopt);
    }
}

PathResult PathSimulator::run(const Pair& x0, std::uint64_t seed, bool record_events) const
{
    require_state(x0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    PathResult out{x0, {}};
    Pair& x = out.state;
    auto jump = [&](double time, std::size_t i, const PointTable& table) {
        const auto& p = draw_point(table, unif(rng));
        x[0] += p.z1;
        x[1] += p.z2;
        if (record_events)
            out.events.push_back({time, EventKind::branch_jump, i + 1, p.z(), x});
    };

    for (std::size_t k = 0; k < segments_.size(); ++k)
    {
        const Segment& seg = segments_[k];
        const double r_max = std::max(seg.kernel[0].total, seg.kernel[1].total);
        double cur = seg.t0;
        while (true)
        {
            const double bound = r_max * (x[0] + x[1]) * std::exp(seg.growth * (seg.t1 - cur));
            if (!(bound > 0))
            {
                linear_flow(seg, seg.t1 - cur, x);
                break;
            }
            if (!std::isfinite(bound))
                throw OverflowError("thinning majorant overflow");
            const double tau = std::exponential_distribution<double>(bound)(rng);
            if (cur + tau >= seg.t1)
            {
                linear_flow(seg, seg.t1 - cur, x);
                break;
            }
            linear_flow(seg, tau, x);
            cur += tau;
            const double rate0 = seg.kernel[0].total * x[0];
            const double rate1 = seg.kernel[1].total * x[1];
            const double u = unif(rng) * bound;
            if (u < rate0)
                jump(cur, 0, seg.kernel[0]);
            else if (u < rate0 + rate1)
                jump(cur, 1, seg.kernel[1]);
            check_state(x, cur);
        }
        check_state(x, seg.t1);

        if (!atoms_[k])
            continue;
        const AtomStep& atom = *atoms_[k];
        const Pair before = x;
        if (atom.diag[0] != 0 || atom.diag[1] != 0 || atom.incoming[0] != 0 || atom.incoming[1] != 0)
        {
            for (std::size_t i = 0; i < 2; ++i)
                x[i] = (1 + atom.diag[i]) * before[i] + atom.incoming[i] * before[other(i)];
            if (record_events)
                out.events.push_back({atom.time,
                                      EventKind::deterministic_atom,
                                      0,
                                      {x[0] - before[0], x[1] - before[1]},
                                      x});
        }
        for (std::size_t i = 0; i < 2; ++i)
        {
            const double mean = before[i] * atom.jumps[i].total;
            if (!(mean > 0))
                continue;
            const auto count = std::poisson_distribution<long long>(mean)(rng);
            for (long long n = 0; n < count; ++n)
                jump(atom.time, i, atom.jumps[i]);
        }
        check_state(x, atom.time);
    }
    return out;
}

PathResult simulate_path(const SpecialForm& sf, const Pair& x0, double t, std::uint64_t seed)
{
    return PathSimulator(sf, t).run(x0, seed, true);
}

std::vector<double> sample_paths(const PathSimulator& sim,
                                 const Pair& x0,
                                 std::size_t n_paths,
                                 const SeedSpec& seed,
                                 const std::function<double(const Pair&)>& f,
                                 bool parallel)
{
    require_state(x0);
    std::vector<double> values(n_paths);
    std::exception_ptr failure;
    const auto n = static_cast<long long>(n_paths);
#pragma omp parallel for schedule(dynamic, 64) if (parallel)
    for (long long k = 0; k < n; ++k)
    {
        try
        {
            const auto path = sim.run(x0, seed.path_seed(static_cast<std::uint64_t>(k)), false);
            values[static_cast<std::size_t>(k)] = f(path.state);
        }
        catch (...)
        {
#pragma omp critical(cbve_sample_failure)
            if (!failure)
                failure = std::current_exception();
        }
    }
    if (failure)
        std::rethrow_exception(failure);
    return values;
}

std::pair<double, double> mean_and_std_error(const std::vector<double>& values)
{
    const std::size_t n = values.size();
    if (n < 2)
        throw DomainError("at least two samples are required");
    NeumaierSum sum;
    for (double v : values)
        sum.add(v);
    const double mean = sum.value() / static_cast<double>(n);
    NeumaierSum squares;
    for (double v : values)
        squares.add((v - mean) * (v - mean));
    const double var = squares.value() / static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

MCEstimate mc_laplace(const SpecialForm& sf,
                      const Pair& x0,
                      double t,
                      const Pair& lambda,
                      std::size_t n_paths,
                      const SeedSpec& seed,
                      const MCOptions& opts)
{
    require_paths(n_paths);
    require_state(x0);
    if (!(lambda[0] >= 0 && lambda[1] >= 0 && std::isfinite(lambda[0]) && std::isfinite(lambda[1])))
        throw DomainError("lambda must be finite and nonnegative");

    const PathSimulator sim(sf, t);
    const auto values = sample_paths(
        sim, x0, n_paths, seed, [&](const Pair& x) { return std::exp(-dot(lambda, x)); }, opts.parallel);

    MCEstimate est;
    est.n_paths = n_paths;
    std::tie(est.estimate, est.std_error) = mean_and_std_error(values);

    // Picard is first order in the cell width; extrapolate from h and 2h.
    std::size_t factor = 0;
    const TimeGrid base = reference_grid(sf, sim.horizon(), opts.reference_cells, factor);
    auto target_on = [&](std::size_t f) {
        const auto v = solve_special_picard(sf.with_grid(refine(base, f)), sim.horizon(), lambda).at(0.0);
        return std::exp(-dot(x0, v));
    };
    const double fine = target_on(factor);
    const double coarse = target_on(factor / 2);
    est.target = 2 * fine - coarse;
    est.target_error = std::max(std::abs(fine - coarse), rounding_floor(est.target, base.cells() * factor));
    est.z_score = score(est.estimate, est.target, est.std_error, est.target_error);
    log(LogLevel::info, "mc_laplace: estimate ", est.estimate, " se ", est.std_error, " target ", est.target,
        " z ", est.z_score);
    return est;
}

MCEstimate mc_mean(const SpecialForm& sf,
                   const Pair& x0,
                   double t,
                   const Pair& lambda,
                   std::size_t n_paths,
                   const SeedSpec& seed,
                   const MCOptions& opts)
{
    require_paths(n_paths);
    require_state(x0);
    if (!(std::isfinite(lambda[0]) && std::isfinite(lambda[1])))
        throw DomainError("lambda must be finite");

    const PathSimulator sim(sf, t);
    const auto values =
        sample_paths(sim, x0, n_paths, seed, [&](const Pair& x) { return dot(lambda, x); }, opts.parallel);

    MCEstimate est;
    est.n_paths = n_paths;
    std::tie(est.estimate, est.std_error) = mean_and_std_error(values);

    std::size_t factor = 0;
    const TimeGrid base = reference_grid(sf, sim.horizon(), opts.reference_cells, factor);
    auto target_on = [&](std::size_t f) {
        const auto env = special_to_general(sf.with_grid(refine(base, f)));
        return dot(x0, solve_moment(env, sim.horizon(), lambda).at(0.0));
    };
    const double fine = target_on(factor);
    const double coarse = target_on(factor / 2);
    // The trapezoid corrector is second order: extrapolate from h and 2h.
    est.target = fine + (fine - coarse) / 3;
    est.target_error = std::max(std::abs(fine - coarse) / 3, rounding_floor(est.target, base.cells() * factor));
    est.z_score = score(est.estimate, est.target, est.std_error, est.target_error);
    log(LogLevel::info, "mc_mean: estimate ", est.estimate, " se ", est.std_error, " target ", est.target,
        " z ", est.z_score);
    return est;
}

void write_path_csv(std::ostream& os, std::size_t path_id, const Pair& x0, const PathResult& path, bool header)
{
    const auto old_precision = os.precision(17);
    if (header)
        os << "path_id,time,kind,type_source,dx1,dx2,x1,x2\n";
    os << path_id << ",0,initial,0,0,0," << x0[0] << ',' << x0[1] << '\n';
    for (const auto& e : path.events)
        os << path_id << ',' << e.time << ',' << to_string(e.kind) << ',' << e.type_source << ',' << e.delta[0]
           << ',' << e.delta[1] << ',' << e.state[0] << ',' << e.state[1] << '\n';
    os.precision(old_precision);
}

} // namespace cbve
