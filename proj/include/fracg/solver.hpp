#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fracg/kernel.hpp"
#include "fracg/lattice.hpp"
#include "fracg/nfunction.hpp"
#include "fracg/report.hpp"

namespace fracg {

// Omega as an axis-aligned block of nodes centred at the origin, or the lattice nodes of a
// closed ball around the origin.
struct DomainSpec {
    enum class Shape { Box, Ball };
    Shape shape = Shape::Box;
    int dim = 1;
    double h = 1.0;
    Index3 counts{1, 1, 1};  // Box
    double radius = 0.0;     // Ball
    std::optional<double> R_ext;

    static DomainSpec box(int dim, double h, Index3 counts) {
        DomainSpec d;
        d.dim = dim;
        d.h = h;
        d.counts = counts;
        return d;
    }
    static DomainSpec ball(int dim, double h, double radius) {
        DomainSpec d;
        d.shape = Shape::Ball;
        d.dim = dim;
        d.h = h;
        d.radius = radius;
        return d;
    }
};

// Discrete Dirichlet problem: minimize the energy over v with v = f off Omega.
class NonlocalProblem {
public:
    NonlocalProblem(Lattice lattice, std::vector<char> omega_mask, NFunction nf, Kernel kernel,
                    double s, GridFunction exterior_datum, double R_ext);

    // Builds lattice, masks and halo data (sampled from `ext` unless `halo_data` is given).
    static NonlocalProblem build(const DomainSpec& dom, NFunction nf, Kernel kernel, double s,
                                 ExteriorModel ext,
                                 const std::function<double(const Point&)>& halo_data = {});

    const Lattice& lattice() const { return lattice_; }
    const std::vector<char>& omega_mask() const { return omega_; }
    std::vector<char> halo_mask() const;
    const std::vector<std::size_t>& omega_nodes() const { return omega_nodes_; }
    const NFunction& nf() const { return nf_; }
    const Kernel& kernel() const { return kernel_; }
    double s() const { return s_; }
    const GridFunction& exterior_datum() const { return datum_; }
    double R_ext() const { return R_ext_; }
    bool in_omega(std::size_t i) const { return omega_[i] != 0; }

    // Throws PreconditionError when an invariant fails.
    void validate() const;

    // Admissible function with the given values on Omega (in omega_nodes order).
    GridFunction extend(const std::vector<double>& omega_values) const;
    std::vector<double> restrict_to_omega(const GridFunction& v) const;
    // Throws PreconditionError unless v agrees with the datum off Omega.
    void check_admissible(const GridFunction& v) const;

    // Same problem with data (and exterior model) multiplied by c and/or shifted by b.
    NonlocalProblem with_affine_data(double c, double b) const;

    nlohmann::ordered_json to_json() const;

private:
    Lattice lattice_;
    std::vector<char> omega_;
    std::vector<std::size_t> omega_nodes_;
    NFunction nf_;
    Kernel kernel_;
    double s_;
    GridFunction datum_;
    double R_ext_;
};

// Energy, gradient and weak form over the discrete interaction set:
// ordered pairs (x, y), x != y, |x - y| <= R_ext, x or y in Omega, plus an analytic far term
// for |x - y| > R_ext with y following the exterior model.
class EnergyModel {
public:
    explicit EnergyModel(const NonlocalProblem& prob);

    std::size_t size() const { return nodes_.size(); }
    double energy(const std::vector<double>& v) const;
    std::vector<double> gradient(const std::vector<double>& v) const;
    // Energy and gradient in one pass.
    double energy_gradient(const std::vector<double>& v, std::vector<double>& grad) const;
    // 2 sum_j w d^{-2s} plus far curvature, a Jacobi scale.
    const std::vector<double>& diagonal() const { return diag_; }
    // max_a 2 sum_j w d^{-s} g(osc d^{-s}) with osc the oscillation of the data.
    double gradient_scale() const { return scale_; }
    double data_oscillation() const { return osc_; }
    double data_min() const { return dmin_; }
    double data_max() const { return dmax_; }
    bool data_constant() const { return osc_ == 0.0; }

    // Far contribution of node a and its derivative.
    double far_value(std::size_t a, double v) const;
    double far_derivative(std::size_t a, double v) const;

private:
    struct Link {
        std::size_t other;  // Omega position (omega links only)
        double w;           // K h^{2n}
        double ids;         // d^{-s}
        double value;       // datum value (halo links only)
    };
    // Far samples either enter as weight * G(|v - value| ids) (radial quadrature nodes) or,
    // beyond the cut where the datum is frozen, as weight * Phi(|v - value| ids).
    struct FarSample {
        double weight;
        double value;
        double ids;
        bool frozen;
    };
    NFunction nf_;
    bool power_ = false;
    double p_ = 2.0;
    std::vector<std::size_t> nodes_;
    std::vector<std::vector<Link>> omega_links_;  // b > a
    std::vector<std::vector<Link>> halo_links_;
    std::vector<std::vector<FarSample>> far_samples_;
    std::vector<double> phi_nodes_, phi_weights_;  // rule for Phi(tau) = int_0^1 G(tau w) / w dw
    std::vector<double> diag_;
    double scale_ = 0.0;
    double osc_ = 0.0, dmin_ = 0.0, dmax_ = 0.0;

    double Phi(double tau) const;
    double dPhi(double tau) const;
};

double energy(const NonlocalProblem& prob, const GridFunction& v);
GridFunction gradient(const NonlocalProblem& prob, const GridFunction& v);  // zero off Omega

// sum over ordered pairs of g(|v(x)-v(y)|/d^s) sign(v(x)-v(y)) (eta(x)-eta(y)) K d^{-s} h^{2n}
// plus the far term; eta is given on Omega (omega_nodes order) and vanishes elsewhere.
double weak_form(const NonlocalProblem& prob, const GridFunction& v,
                 const std::vector<double>& eta);
// Components of the weak form against the node indicators of Omega.
std::vector<double> weak_residual_vector(const NonlocalProblem& prob, const GridFunction& v);
double weak_residual(const NonlocalProblem& prob, const GridFunction& v);

struct ConvexityReport {
    std::vector<double> thetas;
    std::vector<double> defects;  // theta E(v1) + (1-theta) E(v2) - E(theta v1 + (1-theta) v2)
    double min_defect = 0.0;
    bool convex = true;           // all defects >= -tol * scale
    bool strict = true;           // all defects > 0 when v1 != v2 on Omega
    bool identical = false;       // v1 == v2 on Omega
    double zero_data_energy_of_difference = 0.0;  // E_0(v1 - v2), used by the quadratic identity
    nlohmann::ordered_json to_json() const;
};

ConvexityReport convexity_probe(const NonlocalProblem& prob, const GridFunction& v1,
                                const GridFunction& v2, const std::vector<double>& thetas,
                                double tol = 1e-12);

enum class InitialGuess { ZeroExtension, HaloHarmonic };
enum class SolveMethod { ConjugateGradient, SteepestDescent };

struct SolveOptions {
    double tol = 1e-10;
    int max_iter = 20000;
    InitialGuess initial = InitialGuess::HaloHarmonic;
    SolveMethod method = SolveMethod::ConjugateGradient;
    double armijo_c1 = 1e-4;
    double backtrack = 0.5;
    int max_backtracks = 60;
};

struct SolveReport {
    GridFunction minimizer;
    double final_energy = 0.0;
    double residual_norm = 0.0;      // max_i |weak form against node indicator i|
    double relative_residual = 0.0;  // residual_norm / gradient_scale
    double gradient_norm = 0.0;
    double gradient_scale = 0.0;
    int iterations = 0;
    int line_search_failures = 0;
    bool converged = false;
    double tol = 0.0;
    std::string method;
    std::string message;
    std::vector<double> energy_history;

    nlohmann::ordered_json to_json(bool with_history = false) const;
};

// Non-convergence is reported through SolveReport::converged, not thrown.
SolveReport solve(const NonlocalProblem& prob, const SolveOptions& opts = {});

GridFunction initial_guess(const NonlocalProblem& prob, InitialGuess kind);

}  // namespace fracg
