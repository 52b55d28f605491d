#include "fracg/kernel.hpp"

#include <cmath>

#include "fracg/error.hpp"

namespace fracg {

namespace {
void check_bounds(double lambda, double Lambda) {
    if (!(lambda > 0.0) || !(Lambda >= lambda) || !std::isfinite(Lambda))
        throw DomainError("Kernel: need 0 < lambda <= Lambda < inf");
}
}  // namespace

Kernel Kernel::pure(double c) {
    check_bounds(c, c);
    Kernel k;
    k.form_ = KernelForm::Pure;
    k.lambda_ = k.Lambda_ = k.far_ = c;
    return k;
}

Kernel Kernel::radial_decay(double lambda, double Lambda, double length) {
    check_bounds(lambda, Lambda);
    if (!(length > 0.0)) throw DomainError("Kernel: decay length must be positive");
    Kernel k;
    k.form_ = KernelForm::RadialDecay;
    k.lambda_ = lambda;
    k.Lambda_ = Lambda;
    k.length_ = length;
    k.far_ = lambda;
    return k;
}

Kernel Kernel::bump(double lambda, double Lambda, double length, Point center) {
    check_bounds(lambda, Lambda);
    if (!(length > 0.0)) throw DomainError("Kernel: bump width must be positive");
    Kernel k;
    k.form_ = KernelForm::Bump;
    k.lambda_ = lambda;
    k.Lambda_ = Lambda;
    k.length_ = length;
    k.center_ = center;
    k.far_ = lambda;
    return k;
}

Kernel Kernel::callable(double lambda, double Lambda, Coefficient a, double far) {
    check_bounds(lambda, Lambda);
    if (!a) throw DomainError("Kernel: empty coefficient");
    if (!(far >= lambda && far <= Lambda)) throw DomainError("Kernel: far coefficient out of bounds");
    Kernel k;
    k.form_ = KernelForm::Callable;
    k.lambda_ = lambda;
    k.Lambda_ = Lambda;
    k.fn_ = std::move(a);
    k.far_ = far;
    return k;
}

Kernel Kernel::from_json(const nlohmann::json& j, int dim) {
    const std::string form = j.value("form", std::string("pure"));
    if (form == "pure") return pure(j.value("c", 1.0));
    if (form == "radial_decay")
        return radial_decay(j.at("lambda").get<double>(), j.at("Lambda").get<double>(),
                            j.value("length", 1.0));
    if (form == "bump") {
        Point c{0.0, 0.0, 0.0};
        if (j.contains("center")) c = point_from_json(j.at("center"), dim);
        return bump(j.at("lambda").get<double>(), j.at("Lambda").get<double>(),
                    j.value("length", 1.0), c);
    }
    throw ConfigError("kernel: unknown form '" + form + "'");
}

double Kernel::coefficient(const Point& x, const Point& y, int dim) const {
    switch (form_) {
        case KernelForm::Pure: return lambda_;
        case KernelForm::RadialDecay:
            return lambda_ + (Lambda_ - lambda_) * std::exp(-distance(x, y, dim) / length_);
        case KernelForm::Bump: {
            const double dx = distance(x, center_, dim) / length_;
            const double dy = distance(y, center_, dim) / length_;
            return lambda_ + (Lambda_ - lambda_) * std::exp(-dx * dx - dy * dy);
        }
        case KernelForm::Callable: return fn_(x, y);
    }
    return lambda_;
}

double Kernel::operator()(const Point& x, const Point& y, int dim) const {
    return coefficient(x, y, dim) / std::pow(distance(x, y, dim), dim);
}

EstimateReport Kernel::validate(const std::vector<std::pair<Point, Point>>& pairs, int dim,
                                double tol) const {
    EstimateReport r;
    r.name = "kernel_bounds";
    r.tolerance = tol;
    for (const auto& [x, y] : pairs) {
        const double a = coefficient(x, y, dim);
        const double b = coefficient(y, x, dim);
        r.record(std::abs(a - b), tol * std::max(std::abs(a), 1.0), "symmetry");
        r.record(lambda_, a, "lower");
        r.record(a, Lambda_, "upper");
    }
    return r;
}

nlohmann::ordered_json Kernel::to_json() const {
    nlohmann::ordered_json j;
    switch (form_) {
        case KernelForm::Pure:
            j["form"] = "pure";
            j["c"] = lambda_;
            break;
        case KernelForm::RadialDecay:
            j["form"] = "radial_decay";
            j["lambda"] = lambda_;
            j["Lambda"] = Lambda_;
            j["length"] = length_;
            break;
        case KernelForm::Bump:
            j["form"] = "bump";
            j["lambda"] = lambda_;
            j["Lambda"] = Lambda_;
            j["length"] = length_;
            j["center"] = point_to_json(center_, 3);
            break;
        case KernelForm::Callable:
            j["form"] = "callable";
            j["lambda"] = lambda_;
            j["Lambda"] = Lambda_;
            j["far"] = far_;
            break;
    }
    return j;
}

}  // namespace fracg
