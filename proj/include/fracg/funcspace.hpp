#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

#include "fracg/lattice.hpp"
#include "fracg/nfunction.hpp"

namespace fracg {

// A ball, or the whole lattice when empty.
struct Region {
    std::optional<Ball> ball;
    static Region whole() { return {}; }
    static Region of(const Ball& b) { return Region{b}; }
};

std::vector<std::size_t> region_nodes(const Lattice& lat, const Region& region);

// sum_{i != j in region} G(|f_i - f_j| / d^s) h^{2n} / d^n
double gagliardo_modular(const GridFunction& f, const Region& region, double s,
                         const NFunction& nf);

// sum_{i in region} G(|f_i| / lambda) h^n
double orlicz_modular(const GridFunction& f, const Region& region, const NFunction& nf,
                      double lambda = 1.0);

// inf{lambda > 0 : orlicz_modular(f / lambda) <= 1}, 0 iff f vanishes on the region.
double luxemburg_norm(const GridFunction& f, const Region& region, const NFunction& nf);

struct FarFieldOptions {
    double rel_tol = 1e-10;
    double cut_factor = 1e6;  // radial integrals are carried to cut_factor * start, then extrapolated
    int directions_2d = 256;
    int polar_3d = 24;
    int azimuth_3d = 48;
};

// Integrand phi(value, x, |x - x0|) evaluated for x outside the closed ball B_R(x0).
using ExteriorIntegrand = std::function<double(double, const Point&, double)>;

struct ExteriorIntegral {
    double lattice_part = 0.0;  // Riemann sum over nodes outside the ball
    double far_part = 0.0;      // directional integral outside the lattice's cell cover
    double total = 0.0;
    bool finite = true;
    double worst_slope = -std::numeric_limits<double>::infinity();  // log-log slope of rho * F at the cut
};

// int_{R^n \ B_R(x0)} phi(f(x), x, |x - x0|) dx with node sums inside the cover and
// per-direction radial quadrature plus power-law extrapolation outside it.
// R = 0 keeps every node.
ExteriorIntegral exterior_integral(const GridFunction& f, const Point& x0, double R,
                                   const ExteriorIntegrand& phi,
                                   const FarFieldOptions& opts = {});

// Variant where the excluded ball need not be centred at the integration origin; phi then
// receives |x - origin|. The excluded ball must lie inside the lattice's cell cover.
ExteriorIntegral exterior_integral_about(const GridFunction& f, const Point& origin,
                                         const Ball& excluded, const ExteriorIntegrand& phi,
                                         const FarFieldOptions& opts = {});

// Tail(f; x0, R) = int_{R^n \ B_R(x0)} g(|f| / |x - x0|^s) |x - x0|^{-n-s} dx
ExteriorIntegral tail_detailed(const GridFunction& f, const Point& x0, double R, double s,
                               const NFunction& nf, const FarFieldOptions& opts = {});
double tail(const GridFunction& f, const Point& x0, double R, double s, const NFunction& nf,
            const FarFieldOptions& opts = {});

// R^s g^{-1}(R^s Tail(f; x0, R)).
double tail_scale(const GridFunction& f, const Point& x0, double R, double s,
                  const NFunction& nf, const FarFieldOptions& opts = {});

// [R^{sp} int_{R^n \ B_R(x0)} |f|^{p-1} |x - x0|^{-n-sp} dx]^{1/(p-1)}, the power-growth tail.
double power_tail_bracket(const GridFunction& f, const Point& x0, double R, double s, double p,
                          const FarFieldOptions& opts = {});

// Closed form of the tail for g = t^{p-1} and |f| = M outside B_R: omega_{n-1} M^{p-1} R^{-sp} / (sp).
double constant_tail_closed_form(int dim, double M, double R, double s, double p);

// Surface measure of the unit sphere in R^n (2, 2 pi, 4 pi).
double sphere_measure(int dim);

struct MembershipReport {
    bool member = true;
    double weighted_integral = 0.0;  // int g(|f| / (1+|x|)^s) (1+|x|)^{-n-s}
    Point x1{}, x2{};
    double radius = 0.0;
    double tail1 = 0.0, tail2 = 0.0;
    double tail_bound1 = 0.0;  // (1 + (1+|x1|)/R)^{n+sq} W
    double tail_bound2 = 0.0;
    double weighted_bound = 0.0;  // |x1|^{n+sq} T1 + |x2|^{n+sq} T2
    bool tail_consistent = true;
    bool weighted_consistent = true;
    nlohmann::ordered_json to_json(int dim) const;
};

MembershipReport membership_check(const GridFunction& f, double s, const NFunction& nf,
                                  double tol = 1e-8, const FarFieldOptions& opts = {});

}  // namespace fracg
