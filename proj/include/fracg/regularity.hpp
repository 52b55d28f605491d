#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fracg/funcspace.hpp"
#include "fracg/kernel.hpp"
#include "fracg/lattice.hpp"
#include "fracg/nfunction.hpp"
#include "fracg/report.hpp"

namespace fracg {

class NonlocalProblem;

// Data shared by the local estimates. An empty omega mask means the whole lattice.
struct RegularityContext {
    double s = 0.5;
    NFunction nf;
    Kernel kernel = Kernel::pure();
    std::vector<char> omega_mask;
    FarFieldOptions far;

    RegularityContext(double s_, NFunction nf_, Kernel k = Kernel::pure(),
                      std::vector<char> mask = {})
        : s(s_), nf(std::move(nf_)), kernel(std::move(k)), omega_mask(std::move(mask)) {}
    static RegularityContext from_problem(const NonlocalProblem& prob);
};

// ---------------------------------------------------------------------------

struct DeGiorgiResult {
    std::vector<double> A;       // computed sequence (rounded to double)
    std::vector<double> bounds;  // B^{-i/beta} A0
    double threshold = 0.0;      // C^{-1/beta} B^{-1/beta^2}
    bool threshold_met = false;
    bool bound_holds = true;     // A_i <= bound_i for every computed i
    std::optional<std::size_t> first_violation;
    bool diverged = false;       // some A_i exceeded the double range
    unsigned precision_bits = 0;
    nlohmann::ordered_json to_json() const;
};

// Extremal sequence A_{i+1} = C B^i A_i^{1+beta} in multiprecision, steps + 1 terms.
DeGiorgiResult de_giorgi_iterate(double C, double B, double beta, double A0, std::size_t steps);
// Same with A0 equal to the threshold, evaluated at working precision.
DeGiorgiResult de_giorgi_at_threshold(double C, double B, double beta, std::size_t steps);

// ---------------------------------------------------------------------------

// Upper end of the admissible theta range, n / (n - s/2).
double sobolev_poincare_theta_max(int dim, double s);

// lhs = (mean_B G(|f - mean f| / r^s)^theta)^{1/theta},
// rhs = mean_x sum_y G(|f(x) - f(y)| / d^s) d^{-n} h^n over ball pairs.
EstimateReport sobolev_poincare_check(const GridFunction& f, const Ball& ball, double s,
                                      const NFunction& nf, double theta);

struct BoundednessTerms {
    double lhs = 0.0;        // max |u| on B_{r/2}
    double mean_term = 0.0;  // r^s G^{-1}(mean_{B_r} G(|u| / r^s))
    double tail_term = 0.0;  // r^s g^{-1}(r^s Tail(u; x0, tail_radius))
    double tail = 0.0;
};

BoundednessTerms boundedness_terms(const GridFunction& u, const Ball& ball, double tail_radius,
                                   const RegularityContext& ctx);

// Local boundedness: lhs against the mean and tail terms. Requires B_r inside Omega.
EstimateReport boundedness_check(const GridFunction& u, const Ball& ball,
                                 const RegularityContext& ctx);

struct SweepSummary {
    std::vector<EstimateReport> reports;
    double max_constant = 0.0;
    std::size_t argmax = 0;
};

SweepSummary boundedness_sweep(const GridFunction& u, const std::vector<Ball>& balls,
                               const RegularityContext& ctx);

struct DecaySchedule {
    double alpha = 0.0;
    double sigma = 0.5;
    double r0 = 1.0;
    double omega0 = 0.0;
    // Recorded side conditions (value and whether it holds).
    std::vector<NamedValue> constraints;
    bool all_constraints_hold = true;
    nlohmann::ordered_json to_json() const;
};

// Evaluates the side conditions on (alpha, sigma) with unit proof constants.
DecaySchedule evaluate_schedule(double alpha, double sigma, double r0, double omega0, int dim,
                                double s, double p, double q, double theta);

// Largest sigma (as log sigma) meeting every smallness condition with unit proof constants,
// and the largest alpha (as log alpha) that goes with it.
struct SigmaSelection {
    double log_sigma = 0.0;
    double log_alpha = 0.0;
    nlohmann::ordered_json to_json() const;
};
SigmaSelection select_small_sigma(int dim, double s, double p, double q, double theta);

struct HolderFit {
    std::vector<double> radii;
    std::vector<double> osc;
    std::size_t resolved_levels = 0;
    std::optional<double> alpha_hat;
    bool monotone = true;
    double c_b = 0.0;
    double omega0 = 0.0;
    bool decay_bound_holds = true;
    double seminorm = 0.0;
    double c_h = 0.0;
    DecaySchedule schedule;
    EstimateReport report;
    nlohmann::ordered_json to_json() const;
};

// Nested balls B_{sigma^i r0}(x0) resolved by the lattice (radius >= 2h).
// c_b defaults to the empirical constant of the boundedness terms on B_{2 r0}.
HolderFit holder_decay_fit(const GridFunction& u, const Point& x0, double r0, double sigma,
                           std::size_t levels, const RegularityContext& ctx,
                           std::optional<double> c_b = std::nullopt);

// Ordinary least-squares slope of y against x (callers pass logarithms).
double ols_slope(const std::vector<double>& x, const std::vector<double>& y);

struct Cutoff {
    enum class Profile { Linear, Cubic };
    Profile profile = Profile::Linear;
    double rho_in = 0.0;   // phi = 1 on B_{rho_in}
    double rho_out = 1.0;  // phi = 0 outside B_{rho_out}

    double operator()(double dist) const;
    double nominal_lipschitz() const;
};

enum class Truncation { Plus, Minus };

EstimateReport caccioppoli_check(const GridFunction& u, const Ball& ball, double k,
                                 const Cutoff& phi, Truncation sign,
                                 const RegularityContext& ctx);

struct LogOptions {
    std::optional<double> a;  // level of the truncated variant (default max u on B_r, or 1)
    double b = std::exp(1.0);
};

EstimateReport log_estimate_check(const GridFunction& u, const Point& x0, double r, double R,
                                  double d, const RegularityContext& ctx,
                                  const LogOptions& opts = {});

}  // namespace fracg
