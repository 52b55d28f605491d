#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace fracg {

struct GaussRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

// Gauss-Legendre rule of the given order (cached, thread-safe after first use).
const GaussRule& gauss_legendre(int order);

using ScalarFn = std::function<double(double)>;

// Composite fixed-order rule with `panels` equal panels on [a, b].
double integrate_fixed(const ScalarFn& f, double a, double b, int panels, int order = 16);

// Globally adaptive bisection: each interval is accepted once the 16-point rule on it and
// on its two halves agree within max(abs_tol, rel_tol * |running estimate|) scaled by the
// interval share. Throws ConvergenceError when max_intervals is exhausted.
double integrate_adaptive(const ScalarFn& f, double a, double b, double rel_tol,
                          double abs_tol = 0.0, int max_intervals = 1 << 15);

// Compensated running sum.
class Neumaier {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Deterministic tree reduction.
double pairwise_sum(std::span<const double> xs);

// Seeded generator whose output does not depend on the standard library's distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform();                        // [0, 1)
    double uniform(double a, double b);      // [a, b)
    double log_uniform(double a, double b);  // log-uniform on [a, b], a > 0
    double normal();
    std::size_t index(std::size_t n);
    std::uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Logarithmically spaced points, inclusive of both ends.
std::vector<double> logspace(double lo, double hi, std::size_t count);

}  // namespace fracg
