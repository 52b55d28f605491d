#include "fracg/funcspace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fracg/error.hpp"
#include "fracg/numerics.hpp"

namespace fracg {

std::vector<std::size_t> region_nodes(const Lattice& lat, const Region& region) {
    if (region.ball) return lat.nodes_in(*region.ball);
    std::vector<std::size_t> all(lat.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
}

double gagliardo_modular(const GridFunction& f, const Region& region, double s,
                         const NFunction& nf) {
    if (!(s > 0.0 && s < 1.0)) throw DomainError("gagliardo_modular: s must lie in (0, 1)");
    const Lattice& lat = f.lattice();
    const auto nodes = region_nodes(lat, region);
    if (nodes.empty()) throw PreconditionError("gagliardo_modular: empty region");
    const int n = lat.dim();
    std::vector<Point> xs(nodes.size());
    for (std::size_t a = 0; a < nodes.size(); ++a) xs[a] = lat.coord(nodes[a]);
    std::vector<double> rows(nodes.size(), 0.0);
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        Neumaier acc;
        const double fa = f[nodes[a]];
        for (std::size_t b = 0; b < nodes.size(); ++b) {
            if (a == b) continue;
            const double diff = std::abs(fa - f[nodes[b]]);
            if (diff == 0.0) continue;
            const double d = distance(xs[a], xs[b], n);
            acc.add(nf.G(diff / std::pow(d, s)) / std::pow(d, n));
        }
        rows[a] = acc.value();
    }
    const double hn = lat.cell_volume();
    return pairwise_sum(rows) * hn * hn;
}

double orlicz_modular(const GridFunction& f, const Region& region, const NFunction& nf,
                      double lambda) {
    if (!(lambda > 0.0)) throw DomainError("orlicz_modular: lambda must be positive");
    const auto nodes = region_nodes(f.lattice(), region);
    if (nodes.empty()) throw PreconditionError("orlicz_modular: empty region");
    std::vector<double> terms(nodes.size());
    for (std::size_t a = 0; a < nodes.size(); ++a) terms[a] = nf.G(std::abs(f[nodes[a]]) / lambda);
    return pairwise_sum(terms) * f.lattice().cell_volume();
}

double luxemburg_norm(const GridFunction& f, const Region& region, const NFunction& nf) {
    const auto nodes = region_nodes(f.lattice(), region);
    if (nodes.empty()) throw PreconditionError("luxemburg_norm: empty region");
    double fmax = 0.0;
    for (std::size_t i : nodes) fmax = std::max(fmax, std::abs(f[i]));
    if (fmax == 0.0) return 0.0;
    const double hn = f.lattice().cell_volume();
    // Out-of-table arguments only arise when the modular is already above 1.
    const bool saturates = nf.t_max() >= NFunction::kMaxArgument || nf.G(nf.t_max()) * hn >= 1.0;
    auto excess = [&](double lambda) {
        if (fmax / lambda > nf.t_max()) {
            if (!saturates) throw RangeError("luxemburg_norm: arguments leave the table range");
            return true;
        }
        return orlicz_modular(f, region, nf, lambda) > 1.0;
    };
    double lo = fmax, hi = fmax;
    while (excess(hi)) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) throw ConvergenceError("luxemburg_norm: bracket overflow", lo, hi);
    }
    if (lo == hi) {
        while (!excess(lo)) {
            hi = lo;
            lo *= 0.5;
            if (lo < 1e-300) throw ConvergenceError("luxemburg_norm: bracket underflow", lo, hi);
        }
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (!(mid > lo && mid < hi)) break;
        if (excess(mid))
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-15 * hi) return hi;
    }
    if (hi - lo > 1e-13 * hi) throw ConvergenceError("luxemburg_norm: bisection cap", lo, hi);
    return hi;
}

double sphere_measure(int dim) {
    switch (dim) {
        case 1: return 2.0;
        case 2: return 2.0 * std::numbers::pi;
        case 3: return 4.0 * std::numbers::pi;
    }
    throw DomainError("sphere_measure: dimension must be 1, 2 or 3");
}

double constant_tail_closed_form(int dim, double M, double R, double s, double p) {
    return sphere_measure(dim) * std::pow(M, p - 1.0) * std::pow(R, -s * p) / (s * p);
}

namespace {

struct Direction {
    Point d;
    double weight;
};

std::vector<Direction> directions(int dim, const FarFieldOptions& opts) {
    std::vector<Direction> out;
    if (dim == 1) {
        out.push_back({{1.0, 0.0, 0.0}, 1.0});
        out.push_back({{-1.0, 0.0, 0.0}, 1.0});
    } else if (dim == 2) {
        const int N = opts.directions_2d;
        for (int k = 0; k < N; ++k) {
            const double th = 2.0 * std::numbers::pi * (k + 0.5) / N;
            out.push_back({{std::cos(th), std::sin(th), 0.0}, 2.0 * std::numbers::pi / N});
        }
    } else {
        const GaussRule& rule = gauss_legendre(opts.polar_3d);
        const int N = opts.azimuth_3d;
        for (std::size_t a = 0; a < rule.nodes.size(); ++a) {
            const double mu = rule.nodes[a];
            const double sn = std::sqrt(std::max(0.0, 1.0 - mu * mu));
            for (int k = 0; k < N; ++k) {
                const double ph = 2.0 * std::numbers::pi * (k + 0.5) / N;
                out.push_back({{sn * std::cos(ph), sn * std::sin(ph), mu},
                               rule.weights[a] * 2.0 * std::numbers::pi / N});
            }
        }
    }
    return out;
}

// Intersection [t_in, t_out] of the ray x + t d (t >= 0) with the cover box, if any.
bool ray_box(const Lattice& lat, const Point& x, const Point& d, double& t_in, double& t_out) {
    const Point lo = lat.cover_lo(), hi = lat.cover_hi();
    t_in = 0.0;
    t_out = std::numeric_limits<double>::infinity();
    for (int k = 0; k < lat.dim(); ++k) {
        if (d[k] == 0.0) {
            if (x[k] < lo[k] || x[k] > hi[k]) return false;
            continue;
        }
        double a = (lo[k] - x[k]) / d[k];
        double b = (hi[k] - x[k]) / d[k];
        if (a > b) std::swap(a, b);
        t_in = std::max(t_in, a);
        t_out = std::min(t_out, b);
    }
    return t_out >= t_in;
}

struct RayResult {
    double value = 0.0;
    bool finite = true;
    double slope = -std::numeric_limits<double>::infinity();
};

RayResult integrate_to_infinity(const ScalarFn& F, double start, const FarFieldOptions& opts) {
    RayResult r;
    const double cut = start * opts.cut_factor;
    const double Fc = F(cut);
    const double Fh = F(0.5 * cut);
    if (Fc == 0.0) {
        r.slope = -std::numeric_limits<double>::infinity();
    } else if (Fh == 0.0) {
        r.finite = false;
        r.slope = std::numeric_limits<double>::infinity();
        return r;
    } else {
        r.slope = std::log2(Fc / Fh) + 1.0;  // slope of rho * F
        if (r.slope >= -1e-8) {
            r.finite = false;
            return r;
        }
    }
    auto in_log = [&F](double u) {
        const double rho = std::exp(u);
        return F(rho) * rho;
    };
    r.value = integrate_adaptive(in_log, std::log(start), std::log(cut), opts.rel_tol, 0.0);
    if (Fc != 0.0) r.value += Fc * cut / (-r.slope);
    return r;
}

}  // namespace

ExteriorIntegral exterior_integral(const GridFunction& f, const Point& x0, double R,
                                   const ExteriorIntegrand& phi, const FarFieldOptions& opts) {
    if (R < 0.0 || !std::isfinite(R)) throw DomainError("exterior_integral: radius must be >= 0");
    return exterior_integral_about(f, x0, Ball{x0, R}, phi, opts);
}

ExteriorIntegral exterior_integral_about(const GridFunction& f, const Point& x0,
                                         const Ball& excluded, const ExteriorIntegrand& phi,
                                         const FarFieldOptions& opts) {
    const Lattice& lat = f.lattice();
    const int n = lat.dim();
    const bool concentric = distance(excluded.center, x0, n) == 0.0;
    if (excluded.radius < 0.0) throw DomainError("exterior_integral: radius must be >= 0");
    if (!concentric && excluded.radius > 0.0) {
        const Point lo = lat.cover_lo(), hi = lat.cover_hi();
        for (int k = 0; k < n; ++k)
            if (excluded.center[k] - excluded.radius < lo[k] ||
                excluded.center[k] + excluded.radius > hi[k])
                throw PreconditionError("exterior_integral: excluded ball leaves the lattice");
    }
    const double R = concentric ? excluded.radius : 0.0;
    ExteriorIntegral out;

    std::vector<double> terms;
    terms.reserve(lat.size());
    for (std::size_t i = 0; i < lat.size(); ++i) {
        const Point x = lat.coord(i);
        if (excluded.radius > 0.0 && excluded.contains(x, n)) continue;
        terms.push_back(phi(f[i], x, distance(x, x0, n)));
    }
    out.lattice_part = pairwise_sum(terms) * lat.cell_volume();
    Neumaier far;
    for (const Direction& dir : directions(n, opts)) {
        auto point_at = [&](double rho) {
            Point y = x0;
            for (int k = 0; k < n; ++k) y[k] += rho * dir.d[k];
            return y;
        };
        auto F = [&](double rho) {
            const Point y = point_at(rho);
            return phi(f.exterior_value(y), y, rho) * std::pow(rho, n - 1);
        };
        double t_in = 0.0, t_out = 0.0;
        const bool hits = ray_box(lat, x0, dir.d, t_in, t_out);
        double tail_start = R;
        double piece = 0.0;
        try {
            if (hits) {
                if (t_in > R) piece += integrate_adaptive(F, R, t_in, opts.rel_tol, 0.0);
                tail_start = std::max(R, t_out);
            }
            if (tail_start <= 0.0) {
                const double step = lat.h();
                piece += integrate_adaptive(F, 0.0, step, opts.rel_tol, 0.0);
                tail_start = step;
            }
            const RayResult rr = integrate_to_infinity(F, tail_start, opts);
            out.worst_slope = std::max(out.worst_slope, rr.slope);
            if (!rr.finite) {
                out.finite = false;
                continue;
            }
            piece += rr.value;
        } catch (const RangeError&) {
            out.finite = false;
            continue;
        }
        far.add(dir.weight * piece);
    }
    out.far_part = out.finite ? far.value() : std::numeric_limits<double>::infinity();
    out.total = out.finite ? out.lattice_part + out.far_part : std::numeric_limits<double>::infinity();
    return out;
}

ExteriorIntegral tail_detailed(const GridFunction& f, const Point& x0, double R, double s,
                               const NFunction& nf, const FarFieldOptions& opts) {
    if (!(R > 0.0)) throw DomainError("tail: radius must be positive");
    if (!(s > 0.0 && s < 1.0)) throw DomainError("tail: s must lie in (0, 1)");
    const int n = f.lattice().dim();
    auto phi = [&nf, s, n](double v, const Point&, double d) {
        if (v == 0.0) return 0.0;
        return nf.g(std::abs(v) / std::pow(d, s)) * std::pow(d, -n - s);
    };
    return exterior_integral(f, x0, R, phi, opts);
}

double tail(const GridFunction& f, const Point& x0, double R, double s, const NFunction& nf,
            const FarFieldOptions& opts) {
    return tail_detailed(f, x0, R, s, nf, opts).total;
}

double tail_scale(const GridFunction& f, const Point& x0, double R, double s,
                  const NFunction& nf, const FarFieldOptions& opts) {
    const double T = tail(f, x0, R, s, nf, opts);
    if (!std::isfinite(T)) return std::numeric_limits<double>::infinity();
    return std::pow(R, s) * nf.inv_g(std::pow(R, s) * T);
}

double power_tail_bracket(const GridFunction& f, const Point& x0, double R, double s, double p,
                          const FarFieldOptions& opts) {
    if (!(p > 1.0)) throw DomainError("power_tail_bracket: need p > 1");
    const int n = f.lattice().dim();
    auto phi = [s, p, n](double v, const Point&, double d) {
        if (v == 0.0) return 0.0;
        return std::pow(std::abs(v), p - 1.0) * std::pow(d, -n - s * p);
    };
    const ExteriorIntegral I = exterior_integral(f, x0, R, phi, opts);
    if (!I.finite) return std::numeric_limits<double>::infinity();
    return std::pow(std::pow(R, s * p) * I.total, 1.0 / (p - 1.0));
}

nlohmann::ordered_json MembershipReport::to_json(int dim) const {
    nlohmann::ordered_json j;
    j["member"] = member;
    j["weighted_integral"] = json_number(weighted_integral);
    j["x1"] = point_to_json(x1, dim);
    j["x2"] = point_to_json(x2, dim);
    j["radius"] = radius;
    j["tail1"] = json_number(tail1);
    j["tail2"] = json_number(tail2);
    j["tail_bound1"] = json_number(tail_bound1);
    j["tail_bound2"] = json_number(tail_bound2);
    j["weighted_bound"] = json_number(weighted_bound);
    j["tail_consistent"] = tail_consistent;
    j["weighted_consistent"] = weighted_consistent;
    return j;
}

MembershipReport membership_check(const GridFunction& f, double s, const NFunction& nf,
                                  double tol, const FarFieldOptions& opts) {
    if (!(s > 0.0 && s < 1.0)) throw DomainError("membership_check: s must lie in (0, 1)");
    const int n = f.lattice().dim();
    MembershipReport rep;
    rep.x1 = {2.0, 0.0, 0.0};
    rep.x2 = {-2.0, 0.0, 0.0};
    rep.radius = distance(rep.x1, rep.x2, n) / 4.0;

    auto weight_phi = [&nf, s, n](double v, const Point& x, double) {
        if (v == 0.0) return 0.0;
        const double w = 1.0 + norm(x, n);
        return nf.g(std::abs(v) / std::pow(w, s)) * std::pow(w, -n - s);
    };
    const ExteriorIntegral W = exterior_integral(f, Point{0.0, 0.0, 0.0}, 0.0, weight_phi, opts);
    rep.weighted_integral = W.total;
    rep.tail1 = tail(f, rep.x1, rep.radius, s, nf, opts);
    rep.tail2 = tail(f, rep.x2, rep.radius, s, nf, opts);
    rep.member = W.finite && std::isfinite(rep.tail1) && std::isfinite(rep.tail2);

    const double e = n + s * nf.q();
    rep.tail_bound1 = std::pow(1.0 + (1.0 + norm(rep.x1, n)) / rep.radius, e) * rep.weighted_integral;
    rep.tail_bound2 = std::pow(1.0 + (1.0 + norm(rep.x2, n)) / rep.radius, e) * rep.weighted_integral;
    rep.weighted_bound =
        std::pow(norm(rep.x1, n), e) * rep.tail1 + std::pow(norm(rep.x2, n), e) * rep.tail2;
    rep.tail_consistent =
        leq_tol(rep.tail1, rep.tail_bound1, tol) && leq_tol(rep.tail2, rep.tail_bound2, tol);
    rep.weighted_consistent = leq_tol(rep.weighted_integral, rep.weighted_bound, tol);
    return rep;
}

}  // namespace fracg
