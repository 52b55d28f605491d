#include "fracg/regularity.hpp"

#include <mpfr.h>

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <sstream>

#include "fracg/error.hpp"
#include "fracg/numerics.hpp"
#include "fracg/solver.hpp"

namespace fracg {

RegularityContext RegularityContext::from_problem(const NonlocalProblem& prob) {
    return RegularityContext(prob.s(), prob.nf(), prob.kernel(), prob.omega_mask());
}

namespace {

void require_s(double s) {
    if (!(s > 0.0 && s < 1.0)) throw PreconditionError("s must lie in (0, 1)");
}

// Ball inside the node range of the lattice and, when a mask is given, all its nodes in Omega.
void require_inside(const Lattice& lat, const Ball& ball, const std::vector<char>& mask,
                    const char* what) {
    if (!(ball.radius > 0.0)) throw PreconditionError(std::string(what) + ": radius must be positive");
    for (int k = 0; k < lat.dim(); ++k) {
        const double lo = lat.origin()[k];
        const double hi = lo + lat.h() * (lat.counts()[k] - 1);
        if (ball.center[k] - ball.radius < lo - 1e-12 * lat.h() ||
            ball.center[k] + ball.radius > hi + 1e-12 * lat.h())
            throw PreconditionError(std::string(what) + ": ball leaves the lattice");
    }
    if (!mask.empty()) {
        if (mask.size() != lat.size()) throw PreconditionError(std::string(what) + ": mask size mismatch");
        for (std::size_t i : lat.nodes_in(ball))
            if (!mask[i]) throw PreconditionError(std::string(what) + ": ball is not inside Omega");
    }
}

void add_center(EstimateReport& r, const Point& c, int dim) {
    static const char* names[] = {"x0", "x1", "x2"};
    for (int k = 0; k < dim; ++k) r.add_witness(std::string("center_") + names[k], c[k]);
}

// Ordered pair sum over distinct ball nodes of term(i, j, d), scaled by h^{2n}.
template <class Term>
double ball_pair_sum(const Lattice& lat, const std::vector<std::size_t>& nodes, Term&& term) {
    const int n = lat.dim();
    std::vector<Point> xs(nodes.size());
    for (std::size_t a = 0; a < nodes.size(); ++a) xs[a] = lat.coord(nodes[a]);
    std::vector<double> rows(nodes.size(), 0.0);
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        Neumaier acc;
        for (std::size_t b = 0; b < nodes.size(); ++b) {
            if (a == b) continue;
            acc.add(term(nodes[a], nodes[b], distance(xs[a], xs[b], n)));
        }
        rows[a] = acc.value();
    }
    const double hn = lat.cell_volume();
    return pairwise_sum(rows) * hn * hn;
}

}  // namespace

// ---------------------------------------------------------------------------
// De Giorgi iteration

nlohmann::ordered_json DeGiorgiResult::to_json() const {
    nlohmann::ordered_json j;
    j["threshold"] = json_number(threshold);
    j["threshold_met"] = threshold_met;
    j["bound_holds"] = bound_holds;
    j["first_violation"] = first_violation ? nlohmann::ordered_json(*first_violation) : nlohmann::ordered_json();
    j["diverged"] = diverged;
    j["precision_bits"] = precision_bits;
    auto a = nlohmann::ordered_json::array();
    for (double v : A) a.push_back(json_number(v));
    j["A"] = a;
    auto b = nlohmann::ordered_json::array();
    for (double v : bounds) b.push_back(json_number(v));
    j["bounds"] = b;
    return j;
}

namespace {

DeGiorgiResult de_giorgi_impl(double C, double B, double beta, const double* A0_in,
                              std::size_t steps) {
    if (!(C > 0.0) || !(B > 1.0) || !(beta > 0.0) || !std::isfinite(C) || !std::isfinite(B) ||
        !std::isfinite(beta))
        throw PreconditionError("de_giorgi: need C > 0, B > 1, beta > 0");
    if (A0_in && !(*A0_in >= 0.0)) throw PreconditionError("de_giorgi: need A0 >= 0");
    DeGiorgiResult res;
    const double growth_bits = static_cast<double>(steps) * std::log2(1.0 + beta);
    const double want = 128.0 + std::ceil(growth_bits);
    const mpfr_prec_t bits = static_cast<mpfr_prec_t>(std::min(want, double(1 << 20)));
    res.precision_bits = static_cast<unsigned>(bits);

    mpfr_t mC, mB, mbeta, e, thr, A, A0, Bi, bound, fac, tmp, tol;
    for (mpfr_ptr p : {mC, mB, mbeta, e, thr, A, A0, Bi, bound, fac, tmp, tol}) mpfr_init2(p, bits);
    mpfr_set_d(mC, C, MPFR_RNDN);
    mpfr_set_d(mB, B, MPFR_RNDN);
    mpfr_set_d(mbeta, beta, MPFR_RNDN);

    // threshold = C^{-1/beta} B^{-1/beta^2}
    mpfr_ui_div(e, 1, mbeta, MPFR_RNDN);
    mpfr_neg(e, e, MPFR_RNDN);
    mpfr_pow(thr, mC, e, MPFR_RNDN);
    mpfr_pow(fac, mB, e, MPFR_RNDN);  // B^{-1/beta}
    mpfr_div(e, e, mbeta, MPFR_RNDN);
    mpfr_pow(tmp, mB, e, MPFR_RNDN);
    mpfr_mul(thr, thr, tmp, MPFR_RNDN);
    res.threshold = mpfr_get_d(thr, MPFR_RNDN);

    if (A0_in)
        mpfr_set_d(A0, *A0_in, MPFR_RNDN);
    else
        mpfr_set(A0, thr, MPFR_RNDN);
    res.threshold_met = mpfr_cmp(A0, thr) <= 0;

    // relative slack far below any double-visible difference
    mpfr_set_ui(tol, 1, MPFR_RNDN);
    mpfr_div_2si(tol, tol, static_cast<long>(bits) - 64 - static_cast<long>(std::ceil(growth_bits)), MPFR_RNDN);
    mpfr_add_ui(tol, tol, 1, MPFR_RNDN);

    mpfr_set(A, A0, MPFR_RNDN);
    mpfr_set(bound, A0, MPFR_RNDN);
    mpfr_set_ui(Bi, 1, MPFR_RNDN);
    mpfr_add_ui(e, mbeta, 1, MPFR_RNDN);  // 1 + beta
    for (std::size_t i = 0; i <= steps; ++i) {
        if (mpfr_cmp_d(A, DBL_MAX) > 0) {
            res.diverged = true;
            res.A.push_back(std::numeric_limits<double>::infinity());
            res.bounds.push_back(mpfr_get_d(bound, MPFR_RNDN));
            if (!res.first_violation) res.first_violation = i;
            res.bound_holds = false;
            break;
        }
        res.A.push_back(mpfr_get_d(A, MPFR_RNDN));
        res.bounds.push_back(mpfr_get_d(bound, MPFR_RNDN));
        mpfr_mul(tmp, bound, tol, MPFR_RNDU);
        if (mpfr_cmp(A, tmp) > 0) {
            res.bound_holds = false;
            if (!res.first_violation) res.first_violation = i;
        }
        if (i == steps) break;
        mpfr_pow(tmp, A, e, MPFR_RNDN);
        mpfr_mul(tmp, tmp, Bi, MPFR_RNDN);
        mpfr_mul(A, tmp, mC, MPFR_RNDN);
        mpfr_mul(Bi, Bi, mB, MPFR_RNDN);
        mpfr_mul(bound, bound, fac, MPFR_RNDN);
    }
    for (mpfr_ptr p : {mC, mB, mbeta, e, thr, A, A0, Bi, bound, fac, tmp, tol}) mpfr_clear(p);
    return res;
}

}  // namespace

DeGiorgiResult de_giorgi_iterate(double C, double B, double beta, double A0, std::size_t steps) {
    return de_giorgi_impl(C, B, beta, &A0, steps);
}

DeGiorgiResult de_giorgi_at_threshold(double C, double B, double beta, std::size_t steps) {
    return de_giorgi_impl(C, B, beta, nullptr, steps);
}

// ---------------------------------------------------------------------------
// Sobolev-Poincare

double sobolev_poincare_theta_max(int dim, double s) { return dim / (dim - 0.5 * s); }

EstimateReport sobolev_poincare_check(const GridFunction& f, const Ball& ball, double s,
                                      const NFunction& nf, double theta) {
    require_s(s);
    const Lattice& lat = f.lattice();
    const int n = lat.dim();
    const double theta_max = sobolev_poincare_theta_max(n, s);
    if (!(theta > 1.0 && theta < theta_max))
        throw PreconditionError("sobolev_poincare_check: theta outside (1, n/(n - s/2))");
    require_inside(lat, ball, {}, "sobolev_poincare_check");
    const auto nodes = lat.nodes_in(ball);
    if (nodes.size() < 2) throw PreconditionError("sobolev_poincare_check: fewer than 2 nodes in the ball");
    const double r = ball.radius;
    const double hn = lat.cell_volume();
    const double measure = static_cast<double>(nodes.size()) * hn;

    std::vector<double> vals(nodes.size());
    for (std::size_t a = 0; a < nodes.size(); ++a) vals[a] = f[nodes[a]];
    const double mean = pairwise_sum(vals) / static_cast<double>(vals.size());
    const double rs = std::pow(r, s);
    std::vector<double> lterms(nodes.size());
    for (std::size_t a = 0; a < nodes.size(); ++a)
        lterms[a] = std::pow(nf.G(std::abs(vals[a] - mean) / rs), theta);
    const double lhs = std::pow(pairwise_sum(lterms) / static_cast<double>(nodes.size()), 1.0 / theta);

    const double weighted = ball_pair_sum(lat, nodes, [&](std::size_t i, std::size_t j, double d) {
        return nf.G(std::abs(f[i] - f[j]) / std::pow(d, s)) / std::pow(d, n);
    }) / measure;
    const double unweighted = ball_pair_sum(lat, nodes, [&](std::size_t i, std::size_t j, double d) {
        return nf.G(std::abs(f[i] - f[j]) / std::pow(d, s));
    }) / measure;

    EstimateReport r_;
    r_.name = "sobolev_poincare";
    r_.lhs = lhs;
    r_.add_rhs("gagliardo_mean", weighted);
    r_.finalize_single();
    add_center(r_, ball.center, n);
    r_.add_witness("radius", r);
    r_.add_witness("theta", theta);
    r_.add_diagnostic("theta_max", theta_max);
    r_.add_diagnostic("mean", mean);
    r_.add_diagnostic("nodes", static_cast<double>(nodes.size()));
    r_.add_diagnostic("unweighted_mean", unweighted);
    r_.add_diagnostic("unweighted_constant", lhs == 0.0 ? 0.0 : lhs / unweighted);
    return r_;
}

// ---------------------------------------------------------------------------
// Boundedness

BoundednessTerms boundedness_terms(const GridFunction& u, const Ball& ball, double tail_radius,
                                   const RegularityContext& ctx) {
    require_s(ctx.s);
    const Lattice& lat = u.lattice();
    const double r = ball.radius;
    const double rs = std::pow(r, ctx.s);
    BoundednessTerms t;
    const auto inner = lat.nodes_in(Ball{ball.center, 0.5 * r});
    const auto outer = lat.nodes_in(ball);
    if (inner.empty() || outer.empty()) throw PreconditionError("boundedness: ball holds no nodes");
    for (std::size_t i : inner) t.lhs = std::max(t.lhs, std::abs(u[i]));
    std::vector<double> gvals(outer.size());
    for (std::size_t a = 0; a < outer.size(); ++a) gvals[a] = ctx.nf.G(std::abs(u[outer[a]]) / rs);
    const double mean = pairwise_sum(gvals) / static_cast<double>(outer.size());
    t.mean_term = rs * ctx.nf.inv_G(mean);
    t.tail = tail(u, ball.center, tail_radius, ctx.s, ctx.nf, ctx.far);
    t.tail_term = std::isfinite(t.tail) ? rs * ctx.nf.inv_g(rs * t.tail)
                                        : std::numeric_limits<double>::infinity();
    return t;
}

EstimateReport boundedness_check(const GridFunction& u, const Ball& ball,
                                 const RegularityContext& ctx) {
    require_inside(u.lattice(), ball, ctx.omega_mask, "boundedness_check");
    const BoundednessTerms t = boundedness_terms(u, ball, 0.5 * ball.radius, ctx);
    EstimateReport r;
    r.name = "boundedness";
    r.lhs = t.lhs;
    r.add_rhs("mean_term", t.mean_term);
    r.add_rhs("tail_term", t.tail_term);
    r.finalize_single();
    add_center(r, ball.center, u.lattice().dim());
    r.add_witness("radius", ball.radius);
    r.add_diagnostic("tail", t.tail);
    r.add_diagnostic("c_b", t.mean_term > 0.0 ? std::max(t.lhs - t.tail_term, 0.0) / t.mean_term
                                              : 0.0);
    return r;
}

SweepSummary boundedness_sweep(const GridFunction& u, const std::vector<Ball>& balls,
                               const RegularityContext& ctx) {
    SweepSummary out;
    for (std::size_t i = 0; i < balls.size(); ++i) {
        out.reports.push_back(boundedness_check(u, balls[i], ctx));
        const double c = out.reports.back().empirical_constant;
        if (i == 0 || c > out.max_constant) {
            out.max_constant = c;
            out.argmax = i;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Oscillation decay

nlohmann::ordered_json DecaySchedule::to_json() const {
    nlohmann::ordered_json j;
    j["alpha"] = alpha;
    j["sigma"] = sigma;
    j["r0"] = r0;
    j["omega0"] = json_number(omega0);
    auto c = nlohmann::ordered_json::object();
    for (const auto& nv : constraints) c[nv.name] = json_number(nv.value);
    j["constraints"] = c;
    j["all_constraints_hold"] = all_constraints_hold;
    return j;
}

DecaySchedule evaluate_schedule(double alpha, double sigma, double r0, double omega0, int dim,
                                double s, double p, double q, double theta) {
    DecaySchedule d;
    d.alpha = alpha;
    d.sigma = sigma;
    d.r0 = r0;
    d.omega0 = omega0;
    const double sp = s * p;
    const double ls = std::log(sigma);
    auto flag = [&](const std::string& name, bool ok, double value) {
        d.constraints.push_back({name + "_value", value});
        d.constraints.push_back({name + "_holds", ok ? 1.0 : 0.0});
        if (!ok) d.all_constraints_hold = false;
    };
    flag("alpha_cap", alpha <= sp / (2.0 * (p - 1.0)), sp / (2.0 * (p - 1.0)));
    flag("sigma_quarter", sigma < 0.25, sigma);
    // sigma^{sp - alpha(p-1)} <= sigma^{sp/2} <= 1/2
    const double e1 = sp - alpha * (p - 1.0);
    flag("tail_sum", e1 * ls <= 0.5 * sp * ls + 1e-15 && 0.5 * sp * ls <= std::log(0.5),
         std::exp(0.5 * sp * ls));
    // sigma^{(sp - alpha(p-1)) / (2(q-1))} <= sigma^{sp/(4(q-1))} <= 1/6
    flag("level_eps", e1 / (2.0 * (q - 1.0)) * ls <= sp / (4.0 * (q - 1.0)) * ls + 1e-15 &&
                          sp / (4.0 * (q - 1.0)) * ls <= std::log(1.0 / 6.0),
         std::exp(sp / (4.0 * (q - 1.0)) * ls));
    // 1/log(1/sigma) <= 2^{-(n + sq + 2q) theta / beta^2} with unit constants
    const double beta = theta - 1.0;
    const double rhs_log = -(dim + s * q + 2.0 * q) * theta / (beta * beta) * std::log(2.0);
    flag("measure_smallness", -std::log(-ls) <= rhs_log, -std::log(-ls) - rhs_log);
    // sigma^alpha >= 1 - sigma^{sp/(q-1)}
    const double lhs5 = alpha * ls;
    const double rhs5 = std::log1p(-std::exp(sp / (q - 1.0) * ls));
    flag("alpha_small", lhs5 >= rhs5, lhs5 - rhs5);
    return d;
}

nlohmann::ordered_json SigmaSelection::to_json() const {
    nlohmann::ordered_json j;
    j["log_sigma"] = json_number(log_sigma);
    j["log_alpha"] = json_number(log_alpha);
    return j;
}

SigmaSelection select_small_sigma(int dim, double s, double p, double q, double theta) {
    const double sp = s * p;
    const double beta = theta - 1.0;
    if (!(beta > 0.0)) throw PreconditionError("select_small_sigma: theta must exceed 1");
    double ls = std::log(0.25) - 1e-12;
    ls = std::min(ls, -2.0 / sp * std::log(2.0));
    ls = std::min(ls, -4.0 * (q - 1.0) / sp * std::log(6.0));
    // log(1/sigma) >= 2^{(n + sq + 2q) theta / beta^2}
    const double need = std::exp((dim + s * q + 2.0 * q) * theta / (beta * beta) * std::log(2.0));
    ls = std::min(ls, -need);
    SigmaSelection out;
    out.log_sigma = ls;
    // alpha <= log(1 - sigma^{sp/(q-1)}) / log(sigma) and alpha <= sp / (2(p-1))
    const double x = sp / (q - 1.0) * ls;  // log sigma^{sp/(q-1)}
    double log_alpha;
    if (x < -30.0)
        log_alpha = x - std::log(-ls);  // log(-log1p(-e^x)) ~ x
    else
        log_alpha = std::log(-std::log1p(-std::exp(x))) - std::log(-ls);
    out.log_alpha = std::min(log_alpha, std::log(sp / (2.0 * (p - 1.0))));
    return out;
}

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw PreconditionError("ols_slope: need two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

nlohmann::ordered_json HolderFit::to_json() const {
    nlohmann::ordered_json j;
    j["radii"] = radii;
    j["osc"] = osc;
    j["resolved_levels"] = resolved_levels;
    j["alpha_hat"] = alpha_hat ? nlohmann::ordered_json(*alpha_hat) : nlohmann::ordered_json();
    j["monotone"] = monotone;
    j["c_b"] = json_number(c_b);
    j["omega0"] = json_number(omega0);
    j["decay_bound_holds"] = decay_bound_holds;
    j["seminorm"] = json_number(seminorm);
    j["c_h"] = json_number(c_h);
    j["schedule"] = schedule.to_json();
    j["report"] = fracg::to_json(report);
    return j;
}

HolderFit holder_decay_fit(const GridFunction& u, const Point& x0, double r0, double sigma,
                           std::size_t levels, const RegularityContext& ctx,
                           std::optional<double> c_b) {
    require_s(ctx.s);
    if (!(sigma > 0.0 && sigma < 1.0)) throw PreconditionError("holder_decay_fit: sigma must lie in (0, 1)");
    if (!(r0 > 0.0)) throw PreconditionError("holder_decay_fit: r0 must be positive");
    const Lattice& lat = u.lattice();
    const int n = lat.dim();
    HolderFit fit;
    for (std::size_t i = 0; i < levels; ++i) {
        const double ri = r0 * std::pow(sigma, static_cast<double>(i));
        if (ri < 2.0 * lat.h() * (1.0 - 1e-12)) break;
        fit.radii.push_back(ri);
    }
    fit.resolved_levels = fit.radii.size();
    if (fit.resolved_levels < 3)
        throw PreconditionError("holder_decay_fit: fewer than 3 resolvable levels");
    require_inside(lat, Ball{x0, r0}, ctx.omega_mask, "holder_decay_fit");

    for (double ri : fit.radii) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t j : lat.nodes_in(Ball{x0, ri})) {
            lo = std::min(lo, u[j]);
            hi = std::max(hi, u[j]);
        }
        fit.osc.push_back(hi - lo);
    }
    for (std::size_t i = 1; i < fit.osc.size(); ++i)
        if (fit.osc[i] > fit.osc[i - 1]) fit.monotone = false;

    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < fit.osc.size(); ++i) {
        if (fit.osc[i] > 0.0 && fit.osc[i] >= 1e-12 * fit.osc[0]) {
            lx.push_back(std::log(fit.radii[i]));
            ly.push_back(std::log(fit.osc[i]));
        }
    }
    if (lx.size() >= 2) fit.alpha_hat = ols_slope(lx, ly);

    // omega(r0) on the ball of radius r = 2 r0 with the tail at r0.
    const double r = 2.0 * r0;
    const Ball outer{x0, r};
    const BoundednessTerms bt = boundedness_terms(u, outer, r0, ctx);
    fit.c_b = c_b.value_or(bt.mean_term > 0.0 ? std::max(bt.lhs - bt.tail_term, 0.0) / bt.mean_term : 0.0);
    fit.omega0 = 2.0 * (fit.c_b * bt.mean_term + bt.tail_term);
    const double alpha = fit.alpha_hat.value_or(0.0);
    for (std::size_t i = 0; i < fit.osc.size(); ++i) {
        const double bound = std::pow(sigma, alpha * static_cast<double>(i)) * fit.omega0;
        if (!leq_tol(fit.osc[i], bound, 1e-12)) fit.decay_bound_holds = false;
    }

    // Discrete Holder seminorm over node pairs of B_{r0}.
    const auto nodes = lat.nodes_in(Ball{x0, r0});
    if (fit.alpha_hat) {
        for (std::size_t a = 0; a < nodes.size(); ++a)
            for (std::size_t b = a + 1; b < nodes.size(); ++b) {
                const double d = distance(lat.coord(nodes[a]), lat.coord(nodes[b]), n);
                fit.seminorm = std::max(fit.seminorm, std::abs(u[nodes[a]] - u[nodes[b]]) / std::pow(d, alpha));
            }
    }
    const double tail_r = tail(u, x0, r, ctx.s, ctx.nf, ctx.far);
    const double rs = std::pow(r, ctx.s);
    const double tail_term_r = std::isfinite(tail_r) ? rs * ctx.nf.inv_g(rs * tail_r)
                                                     : std::numeric_limits<double>::infinity();
    const double denom = bt.mean_term + tail_term_r;
    fit.c_h = fit.seminorm == 0.0 ? 0.0 : fit.seminorm * std::pow(r, alpha) / denom;

    const double theta = 0.5 * (1.0 + sobolev_poincare_theta_max(n, ctx.s));
    fit.schedule = evaluate_schedule(alpha, sigma, r0, fit.omega0, n, ctx.s, ctx.nf.p(), ctx.nf.q(), theta);

    EstimateReport& rep = fit.report;
    rep.name = "holder_decay";
    rep.lhs = fit.seminorm * std::pow(r, alpha);
    rep.add_rhs("mean_term", bt.mean_term);
    rep.add_rhs("tail_term", tail_term_r);
    rep.finalize_single();
    rep.pass = rep.pass && fit.monotone && fit.decay_bound_holds;
    add_center(rep, x0, n);
    rep.add_witness("r0", r0);
    rep.add_witness("sigma", sigma);
    rep.add_diagnostic("alpha_hat", fit.alpha_hat.value_or(std::numeric_limits<double>::quiet_NaN()));
    rep.add_diagnostic("resolved_levels", static_cast<double>(fit.resolved_levels));
    rep.add_diagnostic("c_b", fit.c_b);
    rep.add_diagnostic("omega0", fit.omega0);
    rep.add_diagnostic("monotone", fit.monotone ? 1.0 : 0.0);
    rep.add_diagnostic("decay_bound_holds", fit.decay_bound_holds ? 1.0 : 0.0);
    return fit;
}

// ---------------------------------------------------------------------------
// Caccioppoli

double Cutoff::operator()(double dist) const {
    if (dist <= rho_in) return 1.0;
    if (dist >= rho_out) return 0.0;
    const double t = (dist - rho_in) / (rho_out - rho_in);
    if (profile == Profile::Linear) return 1.0 - t;
    return 1.0 - t * t * (3.0 - 2.0 * t);
}

double Cutoff::nominal_lipschitz() const {
    const double gap = rho_out - rho_in;
    return (profile == Profile::Linear ? 1.0 : 1.5) / gap;
}

EstimateReport caccioppoli_check(const GridFunction& u, const Ball& ball, double k,
                                 const Cutoff& phi, Truncation sign,
                                 const RegularityContext& ctx) {
    require_s(ctx.s);
    if (!(k >= 0.0)) throw PreconditionError("caccioppoli_check: level k must be >= 0");
    if (!(phi.rho_in >= 0.0 && phi.rho_in < phi.rho_out && phi.rho_out <= ball.radius))
        throw PreconditionError("caccioppoli_check: cutoff must vanish outside a ball inside B_r");
    const Lattice& lat = u.lattice();
    require_inside(lat, ball, ctx.omega_mask, "caccioppoli_check");
    const int n = lat.dim();
    const double s = ctx.s;
    const double q = ctx.nf.q();
    const bool plus = sign == Truncation::Plus;
    const GridFunction w = u.map([k, plus](double v) { return std::max(plus ? v - k : k - v, 0.0); });

    const auto nodes = lat.nodes_in(ball);
    std::vector<double> ph(lat.size(), 0.0);
    for (std::size_t i : nodes) {
        ph[i] = phi(distance(lat.coord(i), ball.center, n));
        if (ph[i] < 0.0 || ph[i] > 1.0) throw PreconditionError("caccioppoli_check: cutoff out of [0, 1]");
    }
    double lip = 0.0;
    for (std::size_t a = 0; a < nodes.size(); ++a)
        for (std::size_t b = a + 1; b < nodes.size(); ++b)
            lip = std::max(lip, std::abs(ph[nodes[a]] - ph[nodes[b]]) /
                                    distance(lat.coord(nodes[a]), lat.coord(nodes[b]), n));

    const NFunction& nf = ctx.nf;
    const double lhs = ball_pair_sum(lat, nodes, [&](std::size_t i, std::size_t j, double d) {
        const double m = std::min(std::pow(ph[i], q), std::pow(ph[j], q));
        if (m == 0.0) return 0.0;
        return nf.G(std::abs(w[i] - w[j]) / std::pow(d, s)) * m / std::pow(d, n);
    });
    const double cutoff_term = ball_pair_sum(lat, nodes, [&](std::size_t i, std::size_t j, double d) {
        const double arg = std::abs(ph[i] - ph[j]) / std::pow(d, s) * std::max(w[i], w[j]);
        return arg == 0.0 ? 0.0 : nf.G(arg) / std::pow(d, n);
    });
    std::vector<double> mass_terms;
    for (std::size_t i : nodes) mass_terms.push_back(w[i] * std::pow(ph[i], q));
    const double mass = pairwise_sum(mass_terms) * lat.cell_volume();

    double sup = 0.0;
    std::size_t arg = nodes.empty() ? 0 : nodes.front();
    if (mass > 0.0) {
        auto integrand = [&nf, s, n](double v, const Point&, double d) {
            if (v == 0.0) return 0.0;
            return nf.g(std::abs(v) / std::pow(d, s)) * std::pow(d, -n - s);
        };
        for (std::size_t y : nodes) {
            if (ph[y] <= 0.0) continue;
            const double val =
                exterior_integral_about(w, lat.coord(y), ball, integrand, ctx.far).total;
            if (val > sup || !std::isfinite(val)) {
                sup = val;
                arg = y;
            }
            if (!std::isfinite(val)) break;
        }
    }

    EstimateReport r;
    r.name = plus ? "caccioppoli_plus" : "caccioppoli_minus";
    r.lhs = lhs;
    r.add_rhs("cutoff_term", cutoff_term);
    r.add_rhs("tail_term", mass > 0.0 ? mass * sup : 0.0);
    r.finalize_single();
    add_center(r, ball.center, n);
    r.add_witness("radius", ball.radius);
    r.add_witness("k", k);
    r.add_witness("rho_in", phi.rho_in);
    r.add_witness("rho_out", phi.rho_out);
    r.add_witness("sign", plus ? 1.0 : -1.0);
    const Point ya = lat.coord(arg);
    r.add_witness("sup_node_x0", ya[0]);
    r.add_diagnostic("lipschitz", lip);
    r.add_diagnostic("nominal_lipschitz", phi.nominal_lipschitz());
    r.add_diagnostic("mass", mass);
    r.add_diagnostic("sup_integral", sup);
    return r;
}

// ---------------------------------------------------------------------------
// Logarithmic estimate

EstimateReport log_estimate_check(const GridFunction& u, const Point& x0, double r, double R,
                                  double d, const RegularityContext& ctx, const LogOptions& opts) {
    require_s(ctx.s);
    if (!(r > 0.0 && r < 0.5 * R)) throw PreconditionError("log_estimate_check: need 0 < r < R/2");
    if (!(d > 0.0)) throw PreconditionError("log_estimate_check: d must be positive");
    if (!(opts.b > 1.0)) throw PreconditionError("log_estimate_check: b must exceed 1");
    const Lattice& lat = u.lattice();
    const int n = lat.dim();
    require_inside(lat, Ball{x0, R}, ctx.omega_mask, "log_estimate_check");
    for (std::size_t i : lat.nodes_in(Ball{x0, R}))
        if (u[i] < 0.0) throw PreconditionError("log_estimate_check: u is negative on B_R");

    const auto nodes = lat.nodes_in(Ball{x0, r});
    const double lhs = ball_pair_sum(lat, nodes, [&](std::size_t i, std::size_t j, double dist) {
        return std::abs(std::log(u[i] + d) - std::log(u[j] + d)) / std::pow(dist, n);
    });
    const GridFunction neg = u.map([](double v) { return std::max(-v, 0.0); });
    const double T = tail(neg, x0, R, ctx.s, ctx.nf, ctx.far);
    const double rs = std::pow(r, ctx.s);
    const double gd = ctx.nf.g(d / rs);
    const double rn = std::pow(r, n);

    EstimateReport rep;
    rep.name = "log_estimate";
    rep.lhs = lhs;
    rep.add_rhs("volume", rn);
    rep.add_rhs("tail", rn * rs * T / gd);
    rep.finalize_single();

    double a = 0.0;
    for (std::size_t i : nodes) a = std::max(a, u[i]);
    a = opts.a.value_or(a > 0.0 ? a : 1.0);
    if (!(a > 0.0)) throw PreconditionError("log_estimate_check: a must be positive");
    std::vector<double> hv(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k)
        hv[k] = std::min(std::max(std::log(a + d) - std::log(u[nodes[k]] + d), 0.0), std::log(opts.b));
    const double hmean = pairwise_sum(hv) / static_cast<double>(hv.size());
    std::vector<double> dev(hv.size());
    for (std::size_t k = 0; k < hv.size(); ++k) dev[k] = std::abs(hv[k] - hmean);
    const double tl = pairwise_sum(dev) * lat.cell_volume();
    const double tr = rn * (1.0 + rs * T / gd);
    const double tc = tl == 0.0 ? 0.0 : tl / tr;

    add_center(rep, x0, n);
    rep.add_witness("r", r);
    rep.add_witness("R", R);
    rep.add_witness("d", d);
    rep.add_witness("a", a);
    rep.add_witness("b", opts.b);
    rep.add_diagnostic("tail_u_minus", T);
    rep.add_diagnostic("truncated_lhs", tl);
    rep.add_diagnostic("truncated_rhs", tr);
    rep.add_diagnostic("truncated_constant", tc);
    if (!std::isfinite(tc)) rep.pass = false;
    return rep;
}

}  // namespace fracg
