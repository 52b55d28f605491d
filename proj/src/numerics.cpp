#include "fracg/numerics.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <mutex>
#include <numbers>

#include "fracg/error.hpp"

namespace fracg {

namespace {

GaussRule build_rule(int order) {
    GaussRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    const int half = (order + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= order; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = order * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= order; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = order * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[order - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[order - 1 - i] = w;
    }
    return rule;
}

double apply_rule(const GaussRule& rule, const ScalarFn& f, double a, double b) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double acc = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k)
        acc += rule.weights[k] * f(mid + half * rule.nodes[k]);
    return acc * half;
}

}  // namespace

const GaussRule& gauss_legendre(int order) {
    static std::mutex mu;
    static std::map<int, GaussRule> cache;
    if (order < 1) throw DomainError("gauss_legendre: order must be positive");
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, build_rule(order)).first;
    return it->second;
}

double integrate_fixed(const ScalarFn& f, double a, double b, int panels, int order) {
    if (panels < 1) throw DomainError("integrate_fixed: panels must be positive");
    const GaussRule& rule = gauss_legendre(order);
    const double w = (b - a) / panels;
    Neumaier acc;
    for (int i = 0; i < panels; ++i) {
        const double lo = a + w * i;
        const double hi = (i + 1 == panels) ? b : lo + w;
        acc.add(apply_rule(rule, f, lo, hi));
    }
    return acc.value();
}

double integrate_adaptive(const ScalarFn& f, double a, double b, double rel_tol, double abs_tol,
                          int max_intervals) {
    if (a == b) return 0.0;
    const GaussRule& rule = gauss_legendre(16);

    struct Piece {
        double lo, hi, value, err;
        bool operator<(const Piece& o) const { return err < o.err; }
    };
    auto make = [&](double lo, double hi) {
        const double mid = 0.5 * (lo + hi);
        const double whole = apply_rule(rule, f, lo, hi);
        const double split = apply_rule(rule, f, lo, mid) + apply_rule(rule, f, mid, hi);
        return Piece{lo, hi, split, std::abs(split - whole)};
    };

    std::vector<Piece> heap;
    heap.push_back(make(a, b));
    auto resum = [&](double& total, double& err) {
        Neumaier tv, te;
        for (const Piece& p : heap) {
            tv.add(p.value);
            te.add(p.err);
        }
        total = tv.value();
        err = te.value();
    };
    double total = 0.0, err = 0.0;
    resum(total, err);
    int count = 1;
    while (err > std::max(abs_tol, rel_tol * std::abs(total))) {
        if (!std::isfinite(total)) throw RangeError("integrate_adaptive: non-finite integrand");
        if (count >= max_intervals)
            throw ConvergenceError("integrate_adaptive: interval budget exhausted", a, b);
        std::pop_heap(heap.begin(), heap.end());
        Piece top = heap.back();
        heap.pop_back();
        const double mid = 0.5 * (top.lo + top.hi);
        if (mid <= top.lo || mid >= top.hi) {
            // Interval below resolution: freeze it.
            top.err = 0.0;
            heap.push_back(top);
            std::push_heap(heap.begin(), heap.end());
        } else {
            heap.push_back(make(top.lo, mid));
            std::push_heap(heap.begin(), heap.end());
            heap.push_back(make(mid, top.hi));
            std::push_heap(heap.begin(), heap.end());
            ++count;
        }
        resum(total, err);
        if (err == 0.0) break;
    }
    return total;
}

double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 16) {
        double acc = 0.0;
        for (double x : xs) acc += x;
        return acc;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

double Rng::uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double a, double b) { return a + (b - a) * uniform(); }

double Rng::log_uniform(double a, double b) {
    return std::exp(uniform(std::log(a), std::log(b)));
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
}

std::size_t Rng::index(std::size_t n) {
    if (n == 0) throw DomainError("Rng::index: empty range");
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

std::vector<double> logspace(double lo, double hi, std::size_t count) {
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    const double a = std::log(lo), b = std::log(hi);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

}  // namespace fracg
