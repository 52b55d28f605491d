#include <gtest/gtest.h>

#include <cmath>

#include "fracg/error.hpp"
#include "fracg/regularity.hpp"
#include "support.hpp"

using namespace fracg;
using fracg::testing::Sampler;

namespace {

// Direct double sums for the Sobolev-Poincare sides.
std::pair<double, double> sp_oracle(const GridFunction& f, const Ball& ball, double s, const NFunction& nf,
                                    double theta) {
    const Lattice& lat = f.lattice();
    const int n = lat.dim();
    const double hn = std::pow(lat.h(), n);
    const auto nodes = lat.nodes_in(ball);
    const double m = static_cast<double>(nodes.size());
    double mean = 0.0;
    for (auto i : nodes) mean += f[i];
    mean /= m;
    double lhs = 0.0, rhs = 0.0;
    for (auto i : nodes) {
        lhs += std::pow(nf.G(std::abs(f[i] - mean) / std::pow(ball.radius, s)), theta);
        for (auto j : nodes) {
            if (i == j) continue;
            const double d = distance(lat.coord(i), lat.coord(j), n);
            rhs += nf.G(std::abs(f[i] - f[j]) / std::pow(d, s)) * hn / std::pow(d, n);
        }
    }
    return {std::pow(lhs / m, 1.0 / theta), rhs / m};
}

GridFunction random_function(const Lattice& lat, Sampler& rng, ExteriorModel ext = {}) {
    std::vector<double> v(lat.size());
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return GridFunction(lat, v, ext);
}

}  // namespace

TEST(DeGiorgi, ExactHalving) {
    const auto r = de_giorgi_iterate(1.0, 2.0, 1.0, 0.5, 40);
    ASSERT_EQ(r.A.size(), 41u);
    EXPECT_TRUE(r.threshold_met);
    EXPECT_EQ(r.threshold, 0.5);
    EXPECT_TRUE(r.bound_holds);
    for (int i = 0; i <= 40; ++i) {
        EXPECT_EQ(r.A[i], std::ldexp(1.0, -i - 1)) << i;
        EXPECT_EQ(r.bounds[i], std::ldexp(1.0, -i - 1)) << i;
    }
}

TEST(DeGiorgi, AboveThresholdViolates) {
    const auto r = de_giorgi_iterate(1.0, 2.0, 1.0, 0.6, 20);
    EXPECT_FALSE(r.threshold_met);
    EXPECT_FALSE(r.bound_holds);
    ASSERT_TRUE(r.first_violation.has_value());
    // A_1 = 0.36 > 0.3.
    EXPECT_EQ(*r.first_violation, 1u);
    EXPECT_NEAR(r.A[1], 0.36, 1e-15);
}

TEST(DeGiorgi, ZeroAndDivergence) {
    const auto z = de_giorgi_iterate(3.0, 5.0, 0.7, 0.0, 30);
    for (double a : z.A) EXPECT_EQ(a, 0.0);
    EXPECT_TRUE(z.bound_holds);
    const auto d = de_giorgi_iterate(1.0, 2.0, 1.0, 2.0, 40);
    EXPECT_TRUE(d.diverged);
    EXPECT_THROW(de_giorgi_iterate(1.0, 1.0, 1.0, 0.1, 5), PreconditionError);
    EXPECT_THROW(de_giorgi_iterate(1.0, 2.0, 1.0, -0.1, 5), PreconditionError);
}

TEST(DeGiorgi, RandomAtThreshold) {
    Sampler rng(21);
    for (int k = 0; k < 200; ++k) {
        const double C = rng.log_uniform(0.1, 100.0), B = rng.uniform(1.01, 20.0), beta = rng.uniform(0.05, 3.0);
        const auto r = de_giorgi_at_threshold(C, B, beta, 60);
        EXPECT_TRUE(r.threshold_met);
        EXPECT_TRUE(r.bound_holds) << C << " " << B << " " << beta;
        EXPECT_FALSE(r.diverged);
    }
}

TEST(SobolevPoincare, MatchesDirectSums) {
    Sampler rng(22);
    const auto lat = Lattice::centered(1, 1.0 / 16, 12);
    const Ball ball{{0.0, 0.0, 0.0}, 0.5};
    ASSERT_EQ(lat.nodes_in(ball).size(), 17u);
    const auto f = random_function(lat, rng);
    const auto nf = NFunction::power(2);
    const auto rep = sobolev_poincare_check(f, ball, 0.5, nf, 1.1);
    const auto [lhs, rhs] = sp_oracle(f, ball, 0.5, nf, 1.1);
    EXPECT_NEAR(rep.lhs, lhs, 1e-12 * lhs);
    EXPECT_NEAR(rep.rhs("gagliardo_mean"), rhs, 1e-12 * rhs);
    EXPECT_TRUE(std::isfinite(rep.empirical_constant));
    const auto flipped = sobolev_poincare_check(f.scaled(-1.0), ball, 0.5, nf, 1.1);
    EXPECT_NEAR(flipped.empirical_constant, rep.empirical_constant, 1e-13 * rep.empirical_constant);
    const auto shifted = sobolev_poincare_check(f.map([](double x) { return x + 7.5; }), ball, 0.5, nf, 1.1);
    EXPECT_NEAR(shifted.lhs, rep.lhs, 1e-12 * rep.lhs);
    EXPECT_NEAR(shifted.rhs("gagliardo_mean"), rep.rhs("gagliardo_mean"), 1e-12 * rhs);
}

TEST(SobolevPoincare, ConstantAndPreconditions) {
    const auto lat = Lattice::centered(2, 0.125, 6);
    const GridFunction c(lat, std::vector<double>(lat.size(), 2.0));
    const Ball ball{{0.0, 0.0, 0.0}, 0.5};
    const auto rep = sobolev_poincare_check(c, ball, 0.4, NFunction::power_log(2), 1.05);
    EXPECT_EQ(rep.lhs, 0.0);
    EXPECT_EQ(rep.rhs_sum(), 0.0);
    EXPECT_TRUE(rep.pass);
    EXPECT_EQ(rep.empirical_constant, 0.0);
    EXPECT_NEAR(sobolev_poincare_theta_max(2, 0.4), 2.0 / 1.8, 1e-15);
    EXPECT_THROW(sobolev_poincare_check(c, ball, 0.4, NFunction::power(2), 1.2), PreconditionError);
    EXPECT_THROW(sobolev_poincare_check(c, ball, 0.4, NFunction::power(2), 1.0), PreconditionError);
    EXPECT_THROW(sobolev_poincare_check(c, Ball{{0.0, 0.0, 0.0}, 0.05}, 0.4, NFunction::power(2), 1.05),
                 PreconditionError);
}

TEST(Boundedness, ConstantData) {
    const auto lat = Lattice::centered(1, 0.0625, 16);
    const double M = 1.75;
    const GridFunction u(lat, std::vector<double>(lat.size(), M), ExteriorModel::constant(M));
    const RegularityContext ctx(0.5, NFunction::power(3));
    const auto rep = boundedness_check(u, Ball{{0.0, 0.0, 0.0}, 0.5}, ctx);
    EXPECT_NEAR(rep.lhs, M, 1e-15);
    EXPECT_NEAR(rep.rhs("mean_term"), M, 1e-12);
    EXPECT_GT(rep.rhs("tail_term"), 0.0);
    EXPECT_LE(rep.empirical_constant, 1.0);
    const GridFunction zero(lat, std::vector<double>(lat.size(), 0.0));
    const auto z = boundedness_check(zero, Ball{{0.0, 0.0, 0.0}, 0.5}, ctx);
    EXPECT_EQ(z.lhs, 0.0);
    EXPECT_EQ(z.rhs_sum(), 0.0);
    EXPECT_TRUE(z.pass);
}

TEST(Boundedness, ScalingInvariance) {
    Sampler rng(23);
    const auto lat = Lattice::centered(2, 0.125, 6);
    const auto u = random_function(lat, rng, ExteriorModel::constant(0.3));
    for (double p : {1.5, 2.0, 3.0}) {
        const RegularityContext ctx(0.4, NFunction::power(p));
        const Ball ball{{0.0, 0.0, 0.0}, 0.5};
        const double c0 = boundedness_check(u, ball, ctx).empirical_constant;
        for (double c : {0.01, 3.0, 1e3}) {
            const double c1 = boundedness_check(u.scaled(c), ball, ctx).empirical_constant;
            EXPECT_NEAR(c1, c0, 1e-10 * c0) << p << " " << c;
        }
    }
}

TEST(Boundedness, OmegaContainment) {
    const auto lat = Lattice::centered(1, 0.125, 8);
    const GridFunction u(lat, std::vector<double>(lat.size(), 1.0));
    std::vector<char> mask(lat.size(), 0);
    for (std::size_t i = 0; i < lat.size(); ++i) mask[i] = std::abs(lat.coord(i)[0]) <= 0.25 + 1e-12;
    const RegularityContext ctx(0.5, NFunction::power(2), Kernel::pure(), mask);
    EXPECT_NO_THROW(boundedness_check(u, Ball{{0.0, 0.0, 0.0}, 0.25}, ctx));
    EXPECT_THROW(boundedness_check(u, Ball{{0.0, 0.0, 0.0}, 0.5}, ctx), PreconditionError);
    EXPECT_THROW(boundedness_check(u, Ball{{0.0, 0.0, 0.0}, 5.0}, RegularityContext(0.5, NFunction::power(2))),
                 PreconditionError);
}

TEST(Boundedness, SweepReportsMax) {
    Sampler rng(24);
    const auto lat = Lattice::centered(1, 0.0625, 24);
    const auto u = random_function(lat, rng, ExteriorModel::constant(0.5));
    const RegularityContext ctx(0.5, NFunction::power(2));
    const std::vector<Ball> balls{{{0.0, 0.0, 0.0}, 0.25}, {{0.0, 0.0, 0.0}, 0.5}, {{0.25, 0.0, 0.0}, 0.5}};
    const auto sw = boundedness_sweep(u, balls, ctx);
    ASSERT_EQ(sw.reports.size(), 3u);
    double m = 0.0;
    for (const auto& r : sw.reports) m = std::max(m, r.empirical_constant);
    EXPECT_EQ(sw.max_constant, m);
    EXPECT_EQ(sw.reports[sw.argmax].empirical_constant, m);
}

TEST(Holder, SyntheticCuspRecovery) {
    for (double gamma : {0.25, 0.5, 0.75}) {
        const auto lat = Lattice::centered(1, 1.0 / 1024, 1100);
        const auto u = GridFunction::sample(lat, [gamma](const Point& x) { return std::pow(std::abs(x[0]), gamma); },
                                            ExteriorModel::radial_power(1.0, gamma));
        const RegularityContext ctx(0.5, NFunction::power(2));
        const auto fit = holder_decay_fit(u, {0.0, 0.0, 0.0}, 0.5, 0.5, 6, ctx);
        ASSERT_TRUE(fit.alpha_hat.has_value());
        EXPECT_GE(fit.resolved_levels, 5u);
        EXPECT_NEAR(*fit.alpha_hat, gamma, 0.02 * gamma);
        EXPECT_TRUE(fit.monotone);
        for (std::size_t i = 0; i < fit.radii.size(); ++i)
            EXPECT_NEAR(fit.osc[i], std::pow(fit.radii[i], gamma), 1e-12);
    }
}

TEST(Holder, ConstantAndTooFewLevels) {
    const auto lat = Lattice::centered(1, 0.0625, 32);
    const GridFunction c(lat, std::vector<double>(lat.size(), 4.0), ExteriorModel::constant(4.0));
    const RegularityContext ctx(0.5, NFunction::power(2));
    const auto fit = holder_decay_fit(c, {0.0, 0.0, 0.0}, 0.5, 0.5, 4, ctx);
    for (double o : fit.osc) EXPECT_EQ(o, 0.0);
    EXPECT_TRUE(fit.report.pass);
    EXPECT_THROW(holder_decay_fit(c, {0.0, 0.0, 0.0}, 0.2, 0.25, 4, ctx), PreconditionError);
}

TEST(Holder, OlsSlope) {
    const std::vector<double> x{0.1, 0.2, 0.4, 0.8};
    std::vector<double> lx, ly;
    for (double v : x) {
        lx.push_back(std::log(v));
        ly.push_back(std::log(3.0 * std::pow(v, 0.37)));
    }
    EXPECT_NEAR(ols_slope(lx, ly), 0.37, 1e-14);
    EXPECT_THROW(ols_slope({1.0}, {1.0}), PreconditionError);
}

TEST(Schedule, Constraints) {
    const auto ok = evaluate_schedule(0.01, 0.2, 1.0, 1.0, 1, 0.5, 2.0, 3.0, 1.2);
    bool cap = false, quarter = false;
    for (const auto& c : ok.constraints) {
        if (c.name == "alpha_cap_holds") cap = c.value == 1.0;
        if (c.name == "sigma_quarter_holds") quarter = c.value == 1.0;
    }
    EXPECT_TRUE(cap);
    EXPECT_TRUE(quarter);
    EXPECT_FALSE(evaluate_schedule(0.6, 0.2, 1.0, 1.0, 1, 0.5, 2.0, 3.0, 1.2).all_constraints_hold);
    EXPECT_FALSE(evaluate_schedule(0.01, 0.3, 1.0, 1.0, 1, 0.5, 2.0, 3.0, 1.2).all_constraints_hold);
}

TEST(Schedule, SmallSigmaSelection) {
    const double s = 0.5, p = 2.0, q = 3.0, theta = 1.3;
    const auto sel = select_small_sigma(1, s, p, q, theta);
    EXPECT_LT(sel.log_sigma, std::log(0.25));
    const double beta = theta - 1.0;
    // log log(1/sigma) >= (n + sq + 2q) theta / beta^2 * log 2
    EXPECT_GE(std::log(-sel.log_sigma), (1.0 + s * q + 2.0 * q) * theta / (beta * beta) * std::log(2.0) - 1e-12);
    EXPECT_LE(sel.log_alpha, std::log(s * p / (2.0 * (p - 1.0))) + 1e-15);
    EXPECT_THROW(select_small_sigma(1, s, p, q, 1.0), PreconditionError);
    // A moderate selection is representable and passes every recorded constraint.
    const auto mild = select_small_sigma(1, 0.9, 2.0, 2.2, 1.45);
    if (mild.log_sigma > -700.0) {
        const auto d = evaluate_schedule(std::exp(mild.log_alpha), std::exp(mild.log_sigma), 1.0, 1.0, 1, 0.9, 2.0,
                                         2.2, 1.45);
        EXPECT_TRUE(d.all_constraints_hold);
    }
}

TEST(Caccioppoli, LevelAboveMax) {
    Sampler rng(25);
    const auto lat = Lattice::centered(1, 0.0625, 16);
    const auto u = random_function(lat, rng, ExteriorModel::constant(0.0));
    const RegularityContext ctx(0.5, NFunction::power(2));
    Cutoff phi;
    phi.rho_in = 0.2;
    phi.rho_out = 0.4;
    const auto rep = caccioppoli_check(u, Ball{{0.0, 0.0, 0.0}, 0.5}, 1.0, phi, Truncation::Plus, ctx);
    EXPECT_EQ(rep.lhs, 0.0);
    EXPECT_TRUE(rep.pass);
    const auto both = caccioppoli_check(u, Ball{{0.0, 0.0, 0.0}, 0.5}, 0.0, phi, Truncation::Minus, ctx);
    EXPECT_GT(both.lhs, 0.0);
    EXPECT_TRUE(std::isfinite(both.empirical_constant));
}

TEST(Caccioppoli, CutoffProfiles) {
    Cutoff lin;
    lin.rho_in = 0.25;
    lin.rho_out = 0.75;
    EXPECT_EQ(lin(0.1), 1.0);
    EXPECT_EQ(lin(0.8), 0.0);
    EXPECT_DOUBLE_EQ(lin(0.5), 0.5);
    EXPECT_DOUBLE_EQ(lin.nominal_lipschitz(), 2.0);
    Cutoff cub = lin;
    cub.profile = Cutoff::Profile::Cubic;
    EXPECT_DOUBLE_EQ(cub(0.5), 0.5);
    EXPECT_LE(cub.nominal_lipschitz(), 2.0 / (lin.rho_out - lin.rho_in));
}

TEST(Caccioppoli, SupportPrecondition) {
    const auto lat = Lattice::centered(1, 0.0625, 16);
    const GridFunction u(lat, std::vector<double>(lat.size(), 1.0));
    const RegularityContext ctx(0.5, NFunction::power(2));
    Cutoff full;
    full.rho_in = 0.5;
    full.rho_out = 0.5;  // phi = 1 on the whole ball
    EXPECT_THROW(caccioppoli_check(u, Ball{{0.0, 0.0, 0.0}, 0.5}, 0.0, full, Truncation::Plus, ctx),
                 PreconditionError);
    Cutoff ok;
    ok.rho_in = 0.1;
    ok.rho_out = 0.3;
    EXPECT_THROW(caccioppoli_check(u, Ball{{0.0, 0.0, 0.0}, 0.5}, -1.0, ok, Truncation::Plus, ctx),
                 PreconditionError);
}

TEST(LogEstimate, ConstantAndNonnegative) {
    const auto lat = Lattice::centered(2, 0.125, 6);
    const RegularityContext ctx(0.5, NFunction::power_log(2));
    const GridFunction c(lat, std::vector<double>(lat.size(), 0.8), ExteriorModel::constant(0.8));
    const auto rc = log_estimate_check(c, {0.0, 0.0, 0.0}, 0.25, 0.6, 0.1, ctx);
    EXPECT_EQ(rc.lhs, 0.0);
    EXPECT_EQ(rc.rhs("tail"), 0.0);
    Sampler rng(26);
    std::vector<double> v(lat.size());
    for (double& x : v) x = rng.uniform(0.0, 2.0);
    const GridFunction pos(lat, v, ExteriorModel::constant(1.0));
    const auto rp = log_estimate_check(pos, {0.0, 0.0, 0.0}, 0.25, 0.6, 0.1, ctx);
    EXPECT_EQ(rp.diagnostic("tail_u_minus"), 0.0);
    EXPECT_NEAR(rp.rhs("volume"), 0.0625, 1e-15);
    EXPECT_GT(rp.lhs, 0.0);
}

TEST(LogEstimate, SignChangingExterior) {
    const auto lat = Lattice::centered(1, 0.0625, 24);
    const auto u = GridFunction::sample(lat, [](const Point& x) { return std::abs(x[0]) < 0.7 ? 1.0 + x[0] : -1.0; },
                                        ExteriorModel::constant(-1.0));
    const RegularityContext ctx(0.5, NFunction::power(2.5));
    const auto r = log_estimate_check(u, {0.0, 0.0, 0.0}, 0.25, 0.6, 0.2, ctx);
    EXPECT_GT(r.diagnostic("tail_u_minus"), 0.0);
    EXPECT_TRUE(std::isfinite(r.empirical_constant));
}

TEST(LogEstimate, Preconditions) {
    const auto lat = Lattice::centered(1, 0.0625, 24);
    const GridFunction neg(lat, std::vector<double>(lat.size(), -0.1));
    const RegularityContext ctx(0.5, NFunction::power(2));
    EXPECT_THROW(log_estimate_check(neg, {0.0, 0.0, 0.0}, 0.25, 0.6, 0.1, ctx), PreconditionError);
    const GridFunction pos(lat, std::vector<double>(lat.size(), 0.1));
    EXPECT_THROW(log_estimate_check(pos, {0.0, 0.0, 0.0}, 0.3, 0.6, 0.1, ctx), PreconditionError);
    EXPECT_THROW(log_estimate_check(pos, {0.0, 0.0, 0.0}, 0.25, 0.6, 0.0, ctx), PreconditionError);
}
