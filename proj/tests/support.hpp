#pragma once

// Independent oracles shared by the test binaries. Nothing here calls the library's energy,
// gradient or far-field code.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "fracg/lattice.hpp"
#include "fracg/solver.hpp"

namespace fracg::testing {

// Seeded generator used by the property tests.
class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : eng_(seed) {}
    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(eng_); }
    double log_uniform(double a, double b) { return std::exp(uniform(std::log(a), std::log(b))); }
    int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(eng_); }

private:
    std::mt19937_64 eng_;
};

// 1-D problem with Omega = N nodes, halo values from `halo`, constant far-field value M.
inline NonlocalProblem halo_problem_1d(int N, double h, double s, NFunction nf,
                                       const std::function<double(double)>& halo, double M,
                                       double R_ext, Kernel k = Kernel::pure()) {
    DomainSpec dom = DomainSpec::box(1, h, {N, 1, 1});
    dom.R_ext = R_ext;
    return NonlocalProblem::build(dom, std::move(nf), std::move(k), s, ExteriorModel::constant(M),
                                  [&halo](const Point& x) { return halo(x[0]); });
}

// Brute-force energy over all ordered lattice pairs within R_ext that touch Omega, plus the
// constant-exterior far term for power G: 2 h^n a omega_{n-1} |v - M|^p R^{-sp} / (p s p).
inline double brute_energy(const NonlocalProblem& prob, const GridFunction& v) {
    const Lattice& lat = prob.lattice();
    const int n = lat.dim();
    const double s = prob.s();
    const double hn = std::pow(lat.h(), n);
    long double acc = 0.0L;
    for (std::size_t x = 0; x < lat.size(); ++x) {
        for (std::size_t y = 0; y < lat.size(); ++y) {
            if (x == y || (!prob.in_omega(x) && !prob.in_omega(y))) continue;
            const Point px = lat.coord(x), py = lat.coord(y);
            const double d = distance(px, py, n);
            if (d > prob.R_ext() * (1.0 + 1e-12)) continue;
            acc += prob.nf().G(std::abs(v[x] - v[y]) / std::pow(d, s)) * prob.kernel()(px, py, n) * hn * hn;
        }
    }
    const ExteriorModel& ext = prob.exterior_datum().exterior();
    const double p = prob.nf().p();
    const double omega = n == 1 ? 2.0 : (n == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi);
    for (std::size_t x : prob.omega_nodes()) {
        const double diff = std::abs(v[x] - ext.constant_value());
        acc += 2.0 * hn * prob.kernel().far_coefficient() * omega * std::pow(diff, p) *
               std::pow(prob.R_ext(), -s * p) / (p * s * p);
    }
    return static_cast<double>(acc);
}

// Central finite differences of `E` on the Omega values.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& E,
                                       std::vector<double> x, double step) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + step;
        const double ep = E(x);
        x[i] = x0 - step;
        const double em = E(x);
        x[i] = x0;
        g[i] = (ep - em) / (2.0 * step);
    }
    return g;
}

inline double sup_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace fracg::testing
