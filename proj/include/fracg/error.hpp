#pragma once

#include <stdexcept>
#include <string>

namespace fracg {

// Argument outside the mathematical domain of an operation (e.g. t < 0).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Argument or intermediate value outside the representable / tabulated range.
class RangeError : public std::range_error {
public:
    using std::range_error::range_error;
};

// Iterative procedure hit its cap; carries the last bracket.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double lo = 0.0, double hi = 0.0)
        : std::runtime_error(what), lo_(lo), hi_(hi) {}
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }

private:
    double lo_;
    double hi_;
};

// Input violates a documented precondition of an operation.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed configuration or schema violation.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace fracg
