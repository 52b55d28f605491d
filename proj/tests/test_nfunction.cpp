#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "fracg/error.hpp"
#include "fracg/nfunction.hpp"
#include "fracg/numerics.hpp"
#include "support.hpp"

using namespace fracg;
using fracg::testing::Sampler;

namespace {

// Antiderivatives of t^{p-1} log(1+t) for p = 2, 3.
double G_pl2(double t) { return 0.5 * (t * t - 1.0) * std::log1p(t) - 0.25 * t * t + 0.5 * t; }
double G_pl3(double t) {
    return (t * t * t + 1.0) / 3.0 * std::log1p(t) - t * t * t / 9.0 + t * t / 6.0 - t / 3.0;
}

// Cancellation-free form of the same antiderivatives for small t.
double G_pl_series(double p, double t) {
    long double sum = 0.0L, tk = std::pow((long double)t, (long double)p);
    for (int k = 1; k < 200; ++k) {
        tk *= t;
        sum += ((k % 2) ? 1.0L : -1.0L) * tk / (k * (p + k));
    }
    return static_cast<double>(sum);
}

double G_pl(double p, double t) {
    if (t < 0.5) return G_pl_series(p, t);
    return p == 2.0 ? G_pl2(t) : G_pl3(t);
}

double bisect(const std::function<double(double)>& f, double y, double lo, double hi) {
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < y ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<std::pair<double, double>> linear_table(double slope, double t_max, int n) {
    std::vector<std::pair<double, double>> pts;
    for (int i = 1; i <= n; ++i) {
        const double t = t_max * i / n;
        pts.emplace_back(t, slope * t);
    }
    return pts;
}

}  // namespace

TEST(NFunctionEval, PowerFamilyValues) {
    EXPECT_DOUBLE_EQ(NFunction::power(2).g(3.0), 3.0);
    EXPECT_DOUBLE_EQ(NFunction::power(3).g(0.0), 0.0);
    EXPECT_DOUBLE_EQ(NFunction::power(2).G(2.0), 2.0);
    EXPECT_DOUBLE_EQ(NFunction::power(3).G(3.0), 9.0);
    EXPECT_DOUBLE_EQ(NFunction::power(2.5).G(0.0), 0.0);
    EXPECT_NEAR(NFunction::power(1.5).g(4.0), 2.0, 1e-15);
    EXPECT_NEAR(NFunction::power(2.5).G(4.0), std::pow(4.0, 2.5) / 2.5, 1e-13);
}

TEST(NFunctionEval, PowerLogMatchesClosedForm) {
    const auto nf2 = NFunction::power_log(2.0);
    const auto nf3 = NFunction::power_log(3.0);
    EXPECT_NEAR(nf2.g(1.0), std::log(2.0), 1e-15);
    EXPECT_NEAR(nf2.G(1.0), 0.25, 1e-15);
    for (double t : {1e-6, 1e-3, 0.1, 0.5, 0.7, 1.0, 1.9, 2.0, 2.5, 10.0, 123.0, 1e4, 1e8}) {
        EXPECT_NEAR(nf2.G(t), G_pl(2.0, t), 1e-13 * G_pl(2.0, t)) << t;
        EXPECT_NEAR(nf3.G(t), G_pl(3.0, t), 1e-13 * G_pl(3.0, t)) << t;
    }
}

TEST(NFunctionEval, PowerLogMatchesFineTable) {
    const auto nf = NFunction::power_log(2.0);
    std::vector<std::pair<double, double>> pts;
    for (int i = 1; i <= 20000; ++i) {
        const double t = 2.0 * i / 20000;
        pts.emplace_back(t, t * std::log1p(t));
    }
    NFunctionOptions o;
    o.declared_p = 2.0;
    o.declared_q = 3.0;
    const auto tab = NFunction::table(pts, o);
    EXPECT_NEAR(tab.g(1.0), nf.g(1.0), 1e-12);
    EXPECT_NEAR(tab.G(1.0), nf.G(1.0), 1e-8);
}

TEST(NFunctionEval, Inverses) {
    EXPECT_DOUBLE_EQ(NFunction::power(2).inv_G(2.0), 2.0);
    EXPECT_DOUBLE_EQ(NFunction::power(2).inv_G(0.0), 0.0);
    EXPECT_NEAR(NFunction::power(3).inv_g(4.0), 2.0, 1e-14);
    EXPECT_DOUBLE_EQ(NFunction::power_log(2).inv_g(0.0), 0.0);
    const auto nf = NFunction::power_log(2.0);
    const double t_star = bisect(G_pl2, 1.0, 0.0, 10.0);
    EXPECT_NEAR(nf.inv_G(1.0), t_star, 1e-11);
    EXPECT_NEAR(G_pl2(nf.inv_G(1.0)), 1.0, 1e-11);
}

TEST(NFunctionEval, TableInverseBetweenSamples) {
    // Coarse samples of g(t) = t^2 + t and a refined table of the same interpolant.
    std::vector<std::pair<double, double>> coarse, fine;
    for (int i = 1; i <= 8; ++i) coarse.emplace_back(i * 0.5, i * 0.5 * (i * 0.5 + 1.0));
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        const double t0 = i == 0 ? 0.0 : coarse[i - 1].first, g0 = i == 0 ? 0.0 : coarse[i - 1].second;
        for (int k = 1; k <= 10; ++k) {
            const double w = k / 10.0;
            fine.emplace_back(t0 + w * (coarse[i].first - t0), g0 + w * (coarse[i].second - g0));
        }
    }
    const auto a = NFunction::table(coarse), b = NFunction::table(fine);
    for (double y : {0.3, 0.75, 2.0, 3.3, 11.0, 19.9}) {
        EXPECT_NEAR(a.inv_g(y), b.inv_g(y), 1e-12) << y;
        EXPECT_NEAR(a.g(a.inv_g(y)), y, 1e-12) << y;
        EXPECT_NEAR(a.inv_G(a.G(y / 5.0)), y / 5.0, 1e-12);
    }
}

TEST(NFunctionEval, Conjugate) {
    EXPECT_NEAR(NFunction::power(2).conjugate(3.0), 4.5, 1e-14);
    EXPECT_DOUBLE_EQ(NFunction::power_log(2).conjugate(0.0), 0.0);
    // Brute-force sup over a grid of s for G(t) = t^3 / 3 at t = 1.
    double best = 0.0;
    for (int i = 0; i <= 200000; ++i) {
        const double s = 2.0 * i / 200000;
        best = std::max(best, s - s * s * s / 3.0);
    }
    EXPECT_NEAR(NFunction::power(3).conjugate(1.0), 2.0 / 3.0, 1e-14);
    EXPECT_NEAR(best, 2.0 / 3.0, 1e-9);
    const auto c = NFunction::power(3).conj();
    EXPECT_NEAR(c.p_conj(), 1.5, 1e-15);
    EXPECT_NEAR(c(1.0), 2.0 / 3.0, 1e-14);
}

TEST(NFunctionEval, ConjugateOptimalityProperty) {
    Sampler rng(17);
    for (const auto& nf : {NFunction::power(1.5), NFunction::power(3.0), NFunction::power_log(2.0)}) {
        for (int k = 0; k < 200; ++k) {
            const double t = rng.log_uniform(1e-3, 1e3);
            const double cs = nf.conjugate(t);
            const double s_opt = nf.inv_g(t);
            EXPECT_NEAR(cs, s_opt * t - nf.G(s_opt), 1e-9 * std::max(1.0, cs));
            for (int j = 0; j < 5; ++j) {
                const double s = rng.log_uniform(1e-3, 1e3);
                EXPECT_GE(cs, s * t - nf.G(s) - 1e-9 * std::max(1.0, std::abs(cs)));
            }
        }
    }
}

TEST(NFunctionEval, Constants) {
    const auto nf = NFunction::power(2.5);
    EXPECT_DOUBLE_EQ(nf.kappa(), std::pow(2.0, 2.5));
    EXPECT_DOUBLE_EQ(nf.p(), 2.5);
    EXPECT_DOUBLE_EQ(nf.q(), 2.5);
    const auto pl = NFunction::power_log(2.0);
    EXPECT_DOUBLE_EQ(pl.p(), 2.0);
    EXPECT_DOUBLE_EQ(pl.q(), 3.0);
    Sampler rng(5);
    for (const auto& f : {nf, pl}) {
        for (int k = 0; k < 500; ++k) {
            const double t = rng.log_uniform(1e-4, 1e4);
            EXPECT_LE(f.G(2.0 * t), f.kappa() * f.G(t) * (1.0 + 1e-12));
            EXPECT_LE(f.G(t), f.G(f.ell() * t) / (2.0 * f.ell()) * (1.0 + 1e-12));
        }
    }
}

TEST(NFunctionErrors, DomainAndRange) {
    const auto nf = NFunction::power(2);
    EXPECT_THROW(nf.g(-1.0), DomainError);
    EXPECT_THROW(nf.G(-1e-300), DomainError);
    EXPECT_THROW(nf.inv_G(-1.0), DomainError);
    EXPECT_THROW(nf.conjugate(-2.0), DomainError);
    EXPECT_THROW(nf.G(2e30), RangeError);
    EXPECT_THROW(NFunction::power(50.0).G(1e20), RangeError);
    EXPECT_THROW(NFunction::power(1.0), DomainError);
    EXPECT_THROW(NFunction::power(0.5), DomainError);
    const auto tab = NFunction::table(linear_table(2.0, 10.0, 5));
    EXPECT_THROW(tab.G(11.0), RangeError);
}

TEST(NFunctionErrors, TableValidation) {
    EXPECT_THROW(NFunction::table({{1.0, 1.0}, {2.0, 0.5}}), DomainError);
    EXPECT_THROW(NFunction::table({{1.0, 1.0}, {1.0, 2.0}}), DomainError);
    EXPECT_THROW(NFunction::table({{0.0, 1.0}, {1.0, 2.0}}), DomainError);
    NFunctionOptions o;
    o.declared_p = 2.5;  // linear g has p = q = 2
    EXPECT_THROW(NFunction::table(linear_table(2.0, 10.0, 5), o), DomainError);
    NFunctionOptions ok;
    ok.declared_p = 1.5;
    ok.declared_q = 2.5;
    const auto t = NFunction::table(linear_table(2.0, 10.0, 5), ok);
    EXPECT_DOUBLE_EQ(t.p(), 1.5);
    EXPECT_DOUBLE_EQ(t.q(), 2.5);
}

TEST(NFunctionErrors, FromJson) {
    EXPECT_EQ(NFunction::from_json({{"family", "power"}, {"p", 2.5}}).p(), 2.5);
    EXPECT_EQ(NFunction::from_json({{"family", "power_log"}, {"p", 2.0}}).q(), 3.0);
    EXPECT_EQ(NFunction::from_json({{"family", "table"}, {"points", {{1.0, 2.0}, {2.0, 4.0}}}}).family(),
              Family::Table);
    EXPECT_THROW(NFunction::from_json({{"family", "cubic"}}), ConfigError);
    EXPECT_THROW(NFunction::from_json({{"p", 2}}), ConfigError);
}

TEST(NFunctionChecks, GrowthSandwich) {
    const auto grid = logspace(1e-3, 1e3, 601);
    const auto r = check_growth_sandwich(NFunction::power(2.5), grid);
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.diagnostic("min_ratio"), 2.5, 1e-12);
    EXPECT_NEAR(r.diagnostic("max_ratio"), 2.5, 1e-12);
    const auto pl = check_growth_sandwich(NFunction::power_log(2.0), grid, 1e-6);
    EXPECT_TRUE(pl.pass);
    EXPECT_GE(pl.diagnostic("min_ratio"), 2.0);
    EXPECT_LE(pl.diagnostic("max_ratio"), 3.0);
    // Dense oracle: t g / G from the closed form stays in (2, 3).
    for (double t : grid) {
        const double ratio = t * t * std::log1p(t) / G_pl(2.0, t);
        EXPECT_GT(ratio, 2.0 - 1e-9);
        EXPECT_LT(ratio, 3.0 + 1e-9);
    }
}

TEST(NFunctionChecks, YoungExamples) {
    const auto quad = NFunction::power(2);
    auto r = check_young(quad, {{1.0, 1.0}}, 0.25);
    EXPECT_TRUE(r.pass);
    // Equality at s = g(t): 1 * 1 = G(1) + G*(1).
    EXPECT_NEAR(quad.G(1.0) + quad.conjugate(1.0), 1.0, 1e-15);
    const auto cub = NFunction::power(3);
    EXPECT_NEAR(cub.conjugate(cub.g(2.0)), 16.0 / 3.0, 1e-13);
    EXPECT_LE(cub.conjugate(cub.g(2.0)), (cub.q() - 1.0) * cub.G(2.0) * (1.0 + 1e-14));
    Sampler rng(99);
    std::vector<std::pair<double, double>> pairs;
    for (int k = 0; k < 10000; ++k) pairs.emplace_back(rng.log_uniform(1e-3, 1e3), rng.log_uniform(1e-3, 1e3));
    EXPECT_EQ(check_young(cub, pairs, 0.25).violations, 0u);
    EXPECT_EQ(check_young(NFunction::power_log(2), pairs, 0.25, 1e-6).violations, 0u);
}

TEST(NFunctionChecks, ScalingExamples) {
    const auto quad = NFunction::power(2);
    EXPECT_TRUE(check_scaling(quad, {{0.5, 2.0}}).pass);
    EXPECT_NEAR(quad.G(0.5 * 2.0), 0.25 * quad.G(2.0), 1e-15);
    EXPECT_TRUE(check_scaling(quad, {{1.0, 3.0}, {1.0, 0.1}}).pass);
    const auto pl = NFunction::power_log(2.0);
    EXPECT_TRUE(check_scaling(pl, {{0.1, 5.0}}, 1e-6).pass);
    const double lhs = pl.G(0.5), G5 = pl.G(5.0);
    EXPECT_LE(0.001 * G5, lhs);
    EXPECT_LE(lhs, 0.01 * G5);
}

TEST(NFunctionChecks, DoublingAndInverseProperties) {
    Sampler rng(2024);
    std::vector<std::pair<double, double>> pairs;
    std::vector<double> ts;
    for (int k = 0; k < 2000; ++k) {
        pairs.emplace_back(rng.log_uniform(1e-4, 1e4), rng.log_uniform(1e-4, 1e4));
        ts.push_back(rng.log_uniform(1e-6, 1e6));
    }
    for (const auto& nf : {NFunction::power(1.5), NFunction::power(2.0), NFunction::power(3.0)}) {
        EXPECT_EQ(check_doubling(nf, pairs).violations, 0u);
        EXPECT_EQ(check_inverse_consistency(nf, ts).violations, 0u);
    }
    const auto pl = NFunction::power_log(2.0);
    EXPECT_EQ(check_doubling(pl, pairs, 1e-6).violations, 0u);
    EXPECT_EQ(check_inverse_consistency(pl, ts, 1e-6).violations, 0u);
}

TEST(NFunctionConcurrency, ConcurrentReadsAgree) {
    const auto nf = NFunction::power_log(2.5);
    std::vector<double> a(64), b(64);
    std::thread t1([&] { for (int i = 0; i < 64; ++i) a[i] = nf.inv_G(0.1 * (i + 1)); });
    std::thread t2([&] { for (int i = 0; i < 64; ++i) b[i] = nf.inv_G(0.1 * (i + 1)); });
    t1.join();
    t2.join();
    EXPECT_EQ(a, b);
}
