#pragma once

// Explicit matrix assembly of the p = 2 energy for constant far data. Only lattice
// coordinates and the kernel are taken from the problem.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

#include "fracg/solver.hpp"

namespace fracg::testing {

// Energy = 1/2 v^T A v + b^T v + const on the Omega values, for G(t) = t^2 / 2.
struct QuadraticOracle {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;

    explicit QuadraticOracle(const NonlocalProblem& prob) {
        const Lattice& lat = prob.lattice();
        const int n = lat.dim();
        const double s = prob.s();
        const double h2n = std::pow(lat.h(), 2 * n);
        const auto& nodes = prob.omega_nodes();
        const std::size_t N = nodes.size();
        std::vector<long> pos(lat.size(), -1);
        for (std::size_t a = 0; a < N; ++a) pos[nodes[a]] = static_cast<long>(a);
        A = Eigen::MatrixXd::Zero(N, N);
        b = Eigen::VectorXd::Zero(N);
        const auto& datum = prob.exterior_datum();
        for (std::size_t a = 0; a < N; ++a) {
            const Point xa = lat.coord(nodes[a]);
            for (std::size_t y = 0; y < lat.size(); ++y) {
                if (y == nodes[a]) continue;
                const Point xy = lat.coord(y);
                const double d = distance(xa, xy, n);
                if (d > prob.R_ext() * (1.0 + 1e-12)) continue;
                // Both orderings of the pair, each contributing (v_a - v_y) d^{-2s} w.
                const double c = 2.0 * prob.kernel()(xa, xy, n) * h2n * std::pow(d, -2.0 * s);
                A(a, a) += c;
                if (pos[y] >= 0)
                    A(a, pos[y]) -= c;
                else
                    b(a) -= c * datum[y];
            }
            const double omega = n == 1 ? 2.0 : (n == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi);
            const double far = 2.0 * std::pow(lat.h(), n) * prob.kernel().far_coefficient() * omega *
                               std::pow(prob.R_ext(), -2.0 * s) / (2.0 * s);
            A(a, a) += far;
            b(a) -= far * datum.exterior().constant_value();
        }
    }

    std::vector<double> solve() const {
        const Eigen::VectorXd x = A.ldlt().solve(-b);
        return {x.data(), x.data() + x.size()};
    }

    std::vector<double> gradient(const std::vector<double>& v) const {
        const Eigen::VectorXd g = A * Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()) + b;
        return {g.data(), g.data() + g.size()};
    }

    double quadratic(const std::vector<double>& w) const {
        const Eigen::Map<const Eigen::VectorXd> x(w.data(), w.size());
        return 0.5 * x.dot(A * x);
    }
};

}  // namespace fracg::testing
