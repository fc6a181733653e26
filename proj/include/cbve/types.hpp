#pragma once

#include "cbve/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>

namespace cbve
{

// A point of R^2; component 0 is type 1, component 1 is type 2.
using Pair = std::array<double, 2>;

inline constexpr std::size_t other(std::size_t i) noexcept { return 1 - i; }

inline void require_type_index(std::size_t i)
{
    if (i > 1)
        throw DomainError("type index must be 0 or 1, got " + std::to_string(i));
}

inline double dot(const Pair& a, const Pair& b) noexcept { return a[0] * b[0] + a[1] * b[1]; }

inline double norm(const Pair& a) noexcept { return std::hypot(a[0], a[1]); }

inline double max_abs_diff(const Pair& a, const Pair& b) noexcept
{
    return std::max(std::abs(a[0] - b[0]), std::abs(a[1] - b[1]));
}

// How the density part of a Stieltjes integral samples its integrand on a cell.
enum class EndpointRule
{
    right,
    trapezoid,
};

} // namespace cbve
