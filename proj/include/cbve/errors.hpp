#pragma once

#include <stdexcept>
#include <string>

namespace cbve
{

// Base of every error thrown by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (t > T, n = 0, ...).
class DomainError : public Error
{
public:
    using Error::Error;
};

// Caller broke a precondition (unvalidated environment, mismatched grids, ...).
class ContractViolation : public Error
{
public:
    using Error::Error;
};

// Parameters fall outside the admissible class (delta_i > 1, ...).
class AdmissibilityError : public Error
{
public:
    using Error::Error;
};

// Negativity beyond tolerance; the grid is too coarse for the coefficients.
class DiscretizationError : public Error
{
public:
    using Error::Error;
};

class OverflowError : public Error
{
public:
    using Error::Error;
};

class NonConvergenceError : public Error
{
public:
    NonConvergenceError(const std::string& what, double residual, int iterations)
        : Error(what), residual_(residual), iterations_(iterations)
    {
    }

    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

// Malformed configuration input; the message names the offending field.
class ConfigError : public Error
{
public:
    using Error::Error;
};

} // namespace cbve
