#pragma once

#include <functional>
#include <string>

#include <json.hpp>

#include "fracg/lattice.hpp"
#include "fracg/report.hpp"

namespace fracg {

enum class KernelForm { Pure, RadialDecay, Bump, Callable };

// K(x, y) = a(x, y) |x - y|^{-n} with a symmetric coefficient lambda <= a <= Lambda.
//   Pure:        a = c
//   RadialDecay: a = lambda + (Lambda - lambda) exp(-|x - y| / length)
//   Bump:        a = lambda + (Lambda - lambda) psi(x) psi(y), psi = exp(-|z - center|^2 / length^2)
//   Callable:    user coefficient; `far` is the value used for pairs beyond the truncation radius
class Kernel {
public:
    using Coefficient = std::function<double(const Point&, const Point&)>;

    static Kernel pure(double c = 1.0);
    static Kernel radial_decay(double lambda, double Lambda, double length);
    static Kernel bump(double lambda, double Lambda, double length, Point center = {0, 0, 0});
    static Kernel callable(double lambda, double Lambda, Coefficient a, double far);
    static Kernel from_json(const nlohmann::json& j, int dim);

    double coefficient(const Point& x, const Point& y, int dim) const;
    double operator()(const Point& x, const Point& y, int dim) const;
    // Coefficient used for the analytic far-field contribution.
    double far_coefficient() const { return far_; }

    double lambda() const { return lambda_; }
    double Lambda() const { return Lambda_; }
    KernelForm form() const { return form_; }
    bool is_pure() const { return form_ == KernelForm::Pure; }

    // Symmetry and ellipticity bounds on the given pairs.
    EstimateReport validate(const std::vector<std::pair<Point, Point>>& pairs, int dim,
                            double tol = 1e-12) const;

    nlohmann::ordered_json to_json() const;

private:
    KernelForm form_ = KernelForm::Pure;
    double lambda_ = 1.0;
    double Lambda_ = 1.0;
    double length_ = 1.0;
    double far_ = 1.0;
    Point center_{0.0, 0.0, 0.0};
    Coefficient fn_;
};

}  // namespace fracg
