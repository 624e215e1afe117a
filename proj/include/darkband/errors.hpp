#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace darkband {

// Invalid configuration or precondition violation.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical procedure failed (no convergence, pole hit, no root).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public NumericError {
public:
    ConvergenceError(const std::string& what, std::size_t size, double residual)
        : NumericError(what + " (size " + std::to_string(size) + ", residual " +
                       std::to_string(residual) + ")"),
          size_(size), residual_(residual) {}
    std::size_t size() const noexcept { return size_; }
    double residual() const noexcept { return residual_; }

private:
    std::size_t size_;
    double residual_;
};

// Classically forbidden input (energy outside the allowed window, etc).
class ForbiddenError : public NumericError {
public:
    using NumericError::NumericError;
};

// Trajectory or chart reached a coordinate singularity.
class PoleError : public NumericError {
public:
    PoleError(const std::string& what, double location)
        : NumericError(what + " at " + std::to_string(location)), location_(location) {}
    double location() const noexcept { return location_; }

private:
    double location_;
};

// Requested problem exceeds a resource budget.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace darkband
