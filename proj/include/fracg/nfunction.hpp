#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fracg/report.hpp"

namespace fracg {

enum class Family { Power, PowerLog, Table };

std::string to_string(Family f);

// Description of g before it is turned into an NFunction.
//   Power:    g(t) = t^{p-1}
//   PowerLog: g(t) = t^{p-1} log(1 + t), growth indices p and p + 1
//   Table:    piecewise-linear interpolation of strictly increasing samples (t_i, g_i)
struct GrowthFunction {
    Family family = Family::Power;
    double p = 2.0;
    std::vector<std::pair<double, double>> table;

    static GrowthFunction power(double p) { return {Family::Power, p, {}}; }
    static GrowthFunction power_log(double p) { return {Family::PowerLog, p, {}}; }
    static GrowthFunction tabulated(std::vector<std::pair<double, double>> pts) {
        return {Family::Table, 0.0, std::move(pts)};
    }
};

struct NFunctionOptions {
    double quadrature_tol = 1e-10;
    std::optional<double> declared_p;
    std::optional<double> declared_q;
};

class ConjugateFunction;

// G(t) = int_0^t g with growth indices 1 < p <= t g(t) / G(t) <= q.
// Immutable; copies share the same evaluation state.
class NFunction {
public:
    static constexpr double kMaxArgument = 1e30;

    explicit NFunction(const GrowthFunction& gf, const NFunctionOptions& opts = {});

    static NFunction power(double p) { return NFunction(GrowthFunction::power(p)); }
    static NFunction power_log(double p) { return NFunction(GrowthFunction::power_log(p)); }
    static NFunction table(std::vector<std::pair<double, double>> pts,
                           const NFunctionOptions& opts = {}) {
        return NFunction(GrowthFunction::tabulated(std::move(pts)), opts);
    }
    static NFunction from_json(const nlohmann::json& j);

    double g(double t) const;
    double G(double t) const;
    double inv_G(double y) const;
    double inv_g(double y) const;
    double conjugate(double t) const;  // G*(t)
    ConjugateFunction conj() const;

    double p() const;
    double q() const;
    double kappa() const;  // G(2t) <= kappa G(t)
    double ell() const;    // G(t) <= G(ell t) / (2 ell)
    double quadrature_tol() const;
    Family family() const;
    const GrowthFunction& growth() const;

    // Largest argument accepted by g and G (finite for tables).
    double t_max() const;
    // Largest value accepted by inv_g (g(t_max)).
    double g_max() const;

    nlohmann::ordered_json to_json() const;

    struct Impl;

private:
    std::shared_ptr<const Impl> impl_;
};

class ConjugateFunction {
public:
    explicit ConjugateFunction(NFunction base) : base_(std::move(base)) {}
    double operator()(double t) const { return base_.conjugate(t); }
    double p_conj() const { return base_.p() / (base_.p() - 1.0); }
    double q_conj() const { return base_.q() / (base_.q() - 1.0); }
    const NFunction& base() const { return base_; }

private:
    NFunction base_;
};

// Structural inequality checks. Each sample is recorded as lhs <= rhs at relative
// tolerance `tol`; the report's lhs is the worst ratio observed.

EstimateReport check_growth_sandwich(const NFunction& nf, const std::vector<double>& grid,
                                     double tol = 1e-8);

EstimateReport check_young(const NFunction& nf,
                           const std::vector<std::pair<double, double>>& pairs, double eps,
                           double tol = 1e-8);

EstimateReport check_scaling(const NFunction& nf,
                             const std::vector<std::pair<double, double>>& samples,
                             double tol = 1e-8);

// Delta2, nabla2, midpoint convexity and G(t+s) doubling bounds on pairs (t, s).
EstimateReport check_doubling(const NFunction& nf,
                              const std::vector<std::pair<double, double>>& pairs,
                              double tol = 1e-8);

// G(inv_G(y)) = y, inv_G(G(t)) = t and the same for g, on the given arguments.
EstimateReport check_inverse_consistency(const NFunction& nf, const std::vector<double>& ts,
                                         double tol = 1e-8);

}  // namespace fracg
