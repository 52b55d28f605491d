#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fracg/error.hpp"
#include "fracg/funcspace.hpp"
#include "support.hpp"

using namespace fracg;
using fracg::testing::Sampler;

namespace {

constexpr double kPi = std::numbers::pi;

GridFunction random_function(const Lattice& lat, Sampler& rng, double amp = 1.0) {
    std::vector<double> v(lat.size());
    for (double& x : v) x = rng.uniform(-amp, amp);
    return GridFunction(lat, v);
}

// Brute-force modular straight from the pair formula.
double brute_gagliardo(const GridFunction& f, double s, const NFunction& nf) {
    const Lattice& lat = f.lattice();
    const int n = lat.dim();
    const double hn = std::pow(lat.h(), n);
    long double acc = 0.0L;
    for (std::size_t i = 0; i < lat.size(); ++i)
        for (std::size_t j = 0; j < lat.size(); ++j) {
            if (i == j) continue;
            const double d = distance(lat.coord(i), lat.coord(j), n);
            acc += nf.G(std::abs(f[i] - f[j]) / std::pow(d, s)) * hn * hn / std::pow(d, n);
        }
    return static_cast<double>(acc);
}

std::vector<std::pair<double, double>> linear_table(double slope, double t_max, int n) {
    std::vector<std::pair<double, double>> pts;
    for (int i = 1; i <= n; ++i) pts.emplace_back(t_max * i / n, slope * t_max * i / n);
    return pts;
}

}  // namespace

TEST(Gagliardo, TwoNodeExample) {
    const Lattice lat(1, 1.0, {0.0, 0.0, 0.0}, {2, 1, 1});
    const GridFunction f(lat, {0.0, 1.0});
    EXPECT_DOUBLE_EQ(gagliardo_modular(f, Region::whole(), 0.5, NFunction::power(2)), 1.0);
}

TEST(Gagliardo, ConstantsVanish) {
    const auto lat = Lattice::centered(2, 0.25, 3);
    const GridFunction f(lat, std::vector<double>(lat.size(), 3.7));
    EXPECT_EQ(gagliardo_modular(f, Region::whole(), 0.4, NFunction::power_log(2)), 0.0);
    Sampler rng(1);
    EXPECT_GT(gagliardo_modular(random_function(lat, rng), Region::whole(), 0.4, NFunction::power(2)), 0.0);
}

TEST(Gagliardo, QuadraticHomogeneity) {
    const auto lat = Lattice::centered(1, 0.1, 10);
    Sampler rng(2);
    const auto f = random_function(lat, rng);
    const auto nf = NFunction::power(2);
    const double a = gagliardo_modular(f, Region::whole(), 0.3, nf);
    EXPECT_NEAR(gagliardo_modular(f.scaled(2.0), Region::whole(), 0.3, nf), 4.0 * a, 1e-13 * a);
}

TEST(Gagliardo, MatchesBruteForce) {
    Sampler rng(3);
    for (int dim : {1, 2}) {
        const auto lat = Lattice::centered(dim, 0.2, dim == 1 ? 12 : 3);
        const auto f = random_function(lat, rng);
        for (const auto& nf : {NFunction::power(1.5), NFunction::power_log(2.5)}) {
            const double b = brute_gagliardo(f, 0.6, nf);
            EXPECT_NEAR(gagliardo_modular(f, Region::whole(), 0.6, nf), b, 1e-12 * b);
        }
    }
}

TEST(Gagliardo, RegionRestriction) {
    const auto lat = Lattice::centered(1, 0.5, 4);
    std::vector<double> v(lat.size(), 0.0);
    v[0] = 100.0;  // node at x = -2, outside the ball
    const GridFunction f(lat, v);
    EXPECT_EQ(gagliardo_modular(f, Region::of(Ball{{0.0, 0.0, 0.0}, 1.0}), 0.5, NFunction::power(2)), 0.0);
    EXPECT_THROW(gagliardo_modular(f, Region::of(Ball{{10.0, 0.0, 0.0}, 0.1}), 0.5, NFunction::power(2)),
                 PreconditionError);
}

TEST(Gagliardo, RelabelingSymmetry) {
    const auto lat = Lattice::centered(2, 0.25, 3);
    Sampler rng(4);
    const auto f = random_function(lat, rng);
    // Reflection x -> -x and transposition permute nodes without changing pair distances.
    std::vector<double> refl(lat.size()), trans(lat.size());
    for (std::size_t i = 0; i < lat.size(); ++i) {
        const Index3 m = lat.multi_index(i);
        refl[lat.flat({6 - m[0], m[1], 0})] = f[i];
        trans[lat.flat({m[1], m[0], 0})] = f[i];
    }
    const auto nf = NFunction::power(2.5);
    const double a = gagliardo_modular(f, Region::whole(), 0.5, nf);
    EXPECT_NEAR(gagliardo_modular(GridFunction(lat, refl), Region::whole(), 0.5, nf), a, 1e-13 * a);
    EXPECT_NEAR(gagliardo_modular(GridFunction(lat, trans), Region::whole(), 0.5, nf), a, 1e-13 * a);
}

TEST(Gagliardo, RefinementCauchy) {
    // sin on B_1(0): successive halvings of h must contract.
    const auto nf = NFunction::power(2);
    const Region unit = Region::of(Ball{{0.0, 0.0, 0.0}, 1.0});
    std::vector<double> m;
    for (int half : {16, 32, 64, 128}) {
        const auto lat = Lattice::centered(1, 1.0 / half, half);
        m.push_back(gagliardo_modular(GridFunction::sample(lat, [](const Point& x) { return std::sin(x[0]); }),
                                      unit, 0.3, nf));
    }
    const double d1 = std::abs(m[1] - m[0]), d2 = std::abs(m[2] - m[1]), d3 = std::abs(m[3] - m[2]);
    EXPECT_LT(d2, d1);
    EXPECT_LT(d3, d2);
    EXPECT_LT(d3 / m[3], 0.05);
}

TEST(Luxemburg, ZeroAndConstant) {
    const auto lat = Lattice::centered(1, 0.125, 8);
    const auto tabsq = NFunction::table(linear_table(2.0, 1e6, 4));  // g = 2t, G = t^2
    EXPECT_EQ(luxemburg_norm(GridFunction(lat, std::vector<double>(lat.size(), 0.0)), Region::whole(), tabsq), 0.0);
    const double c = 3.0;
    const double m = lat.size() * lat.h();
    EXPECT_NEAR(luxemburg_norm(GridFunction(lat, std::vector<double>(lat.size(), c)), Region::whole(), tabsq),
                c * std::sqrt(m), 1e-10 * c * std::sqrt(m));
}

TEST(Luxemburg, ModularContractAndBound) {
    Sampler rng(6);
    for (int trial = 0; trial < 30; ++trial) {
        const auto lat = Lattice::centered(trial % 2 + 1, 0.2, trial % 2 ? 3 : 10);
        const auto f = random_function(lat, rng, rng.log_uniform(1e-3, 1e3));
        for (const auto& nf : {NFunction::power(1.5), NFunction::power(3), NFunction::power_log(2)}) {
            const double lam = luxemburg_norm(f, Region::whole(), nf);
            ASSERT_GT(lam, 0.0);
            EXPECT_NEAR(orlicz_modular(f, Region::whole(), nf, lam), 1.0, 1e-8);
            EXPECT_LE(lam, orlicz_modular(f, Region::whole(), nf) + 1.0);
        }
    }
}

TEST(Luxemburg, HomogeneityForPowers) {
    Sampler rng(7);
    const auto lat = Lattice::centered(1, 0.1, 10);
    const auto f = random_function(lat, rng);
    for (double p : {1.5, 2.0, 4.0}) {
        const auto nf = NFunction::power(p);
        const double a = luxemburg_norm(f, Region::whole(), nf);
        for (double c : {-3.0, 0.01, 250.0})
            EXPECT_NEAR(luxemburg_norm(f.scaled(c), Region::whole(), nf), std::abs(c) * a, 1e-9 * std::abs(c) * a);
    }
}

TEST(Tail, ConstantExteriorClosedForm) {
    for (int dim : {1, 2}) {
        const auto lat = Lattice::centered(dim, 0.1, 4);
        const GridFunction f(lat, std::vector<double>(lat.size(), 0.0), ExteriorModel::constant(1.7));
        for (double p : {1.5, 2.0, 3.0}) {
            for (double R : {1.0, 2.5}) {
                const double s = 0.4;
                // Independent antiderivative: sphere * M^{p-1} * int_R^inf rho^{-sp-1}.
                const double omega = dim == 1 ? 2.0 : 2.0 * kPi;
                const double exact = omega * std::pow(1.7, p - 1.0) * std::pow(R, -s * p) / (s * p);
                EXPECT_NEAR(tail(f, {0.0, 0.0, 0.0}, R, s, NFunction::power(p)), exact, 1e-6 * exact);
                EXPECT_NEAR(constant_tail_closed_form(dim, 1.7, R, s, p), exact, 1e-14 * exact);
            }
        }
    }
}

TEST(Tail, RadialPowerExteriorClosedForm) {
    // |f| = M rho^gamma, g = t^{p-1}: omega M^{p-1} R^{gamma(p-1)-sp} / (sp - gamma(p-1)).
    const auto lat = Lattice::centered(2, 0.1, 3);
    const double M = 0.8, gamma = 0.2, s = 0.5, p = 2.0, R = 1.5;
    const GridFunction f(lat, std::vector<double>(lat.size(), 0.0), ExteriorModel::radial_power(M, gamma));
    const double exact = 2.0 * kPi * M * std::pow(R, gamma - s * p) / (s * p - gamma);
    EXPECT_NEAR(tail(f, {0.0, 0.0, 0.0}, R, s, NFunction::power(p)), exact, 1e-6 * exact);
}

TEST(Tail, ZeroData) {
    const auto lat = Lattice::centered(2, 0.2, 4);
    const GridFunction f(lat, std::vector<double>(lat.size(), 0.0));
    EXPECT_EQ(tail(f, {0.0, 0.0, 0.0}, 0.3, 0.5, NFunction::power_log(2)), 0.0);
}

TEST(Tail, PowerBracketReduction) {
    Sampler rng(8);
    for (double p : {1.5, 2.0, 3.0}) {
        for (int dim : {1, 2}) {
            const auto lat = Lattice::centered(dim, 0.125, dim == 1 ? 16 : 6);
            auto f = random_function(lat, rng);
            f.set_exterior(ExteriorModel::constant(rng.uniform(0.1, 2.0)));
            const double s = 0.3, R = 0.4;
            const auto nf = NFunction::power(p);
            const double scaled = tail_scale(f, {0.0, 0.0, 0.0}, R, s, nf);
            const double bracket = power_tail_bracket(f, {0.0, 0.0, 0.0}, R, s, p);
            EXPECT_NEAR(scaled / bracket, 1.0, 1e-9) << p << " " << dim;
        }
    }
}

TEST(Tail, MonotoneInRadius) {
    Sampler rng(9);
    const auto lat = Lattice::centered(2, 0.125, 6);
    std::vector<double> v(lat.size());
    for (double& x : v) x = rng.uniform(0.0, 2.0);
    const GridFunction f(lat, v, ExteriorModel::constant(1.0));
    const auto nf = NFunction::power_log(2.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double R = 0.1; R < 2.0; R += 0.1) {
        const double t = tail(f, {0.0, 0.0, 0.0}, R, 0.5, nf);
        EXPECT_LE(t, prev * (1.0 + 1e-12)) << R;
        prev = t;
    }
}

TEST(Tail, Preconditions) {
    const auto lat = Lattice::centered(1, 0.1, 4);
    const GridFunction f(lat, std::vector<double>(lat.size(), 1.0));
    EXPECT_THROW(tail(f, {0.0, 0.0, 0.0}, 0.0, 0.5, NFunction::power(2)), DomainError);
    EXPECT_THROW(tail(f, {0.0, 0.0, 0.0}, 1.0, 1.5, NFunction::power(2)), DomainError);
}

TEST(Membership, Cases) {
    const auto lat = Lattice::centered(1, 0.1, 8);
    const std::vector<double> zeros(lat.size(), 0.0);
    const auto nf = NFunction::power(2.0);
    const auto z = membership_check(GridFunction(lat, zeros), 0.5, nf);
    EXPECT_TRUE(z.member);
    EXPECT_EQ(z.weighted_integral, 0.0);
    EXPECT_EQ(z.tail1, 0.0);
    EXPECT_EQ(z.tail2, 0.0);
    // |f| = rho^{s - delta}: finite.
    const auto fin = membership_check(GridFunction(lat, zeros, ExteriorModel::radial_power(1.0, 0.3)), 0.5, nf);
    EXPECT_TRUE(fin.member);
    EXPECT_TRUE(std::isfinite(fin.tail1));
    EXPECT_TRUE(fin.tail_consistent);
    EXPECT_TRUE(fin.weighted_consistent);
    // |f| = rho^{3s}: the radial exponent is nonnegative and the integral diverges.
    const auto div = membership_check(GridFunction(lat, zeros, ExteriorModel::radial_power(1.0, 1.5)), 0.5, nf);
    EXPECT_FALSE(div.member);
}

TEST(Kernel, EllipticityAndSymmetry) {
    Sampler rng(10);
    std::vector<std::pair<Point, Point>> pairs;
    for (int k = 0; k < 200; ++k)
        pairs.push_back({{rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0}, {rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0}});
    EXPECT_TRUE(Kernel::radial_decay(1.0, 2.0, 0.5).validate(pairs, 2).pass);
    EXPECT_TRUE(Kernel::bump(0.5, 3.0, 0.7).validate(pairs, 2).pass);
    const auto skew = Kernel::callable(1.0, 2.0, [](const Point& x, const Point&) { return 1.0 + 0.5 * (x[0] + 1.0); }, 1.0);
    EXPECT_FALSE(skew.validate(pairs, 2).pass);
    const auto loose = Kernel::callable(1.0, 2.0, [](const Point&, const Point&) { return 2.5; }, 2.0);
    EXPECT_FALSE(loose.validate(pairs, 2).pass);
    EXPECT_THROW(Kernel::callable(1.0, 2.0, [](const Point&, const Point&) { return 1.5; }, 2.5), DomainError);
    EXPECT_THROW(Kernel::radial_decay(2.0, 1.0, 0.5), DomainError);
}
