#include "fracg/pipeline.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "fracg/corpus.hpp"
#include "fracg/error.hpp"
#include "fracg/funcspace.hpp"
#include "fracg/numerics.hpp"
#include "fracg/regularity.hpp"

namespace fracg {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Linear oracle

namespace {

// int_{|y - x| > R} f(y) |x - y|^{-n-2s} dy for the exterior model f, by adaptive radial
// quadrature in log r along each direction.
double oracle_far_moment(const ExteriorModel& ext, const Point& x, double R, double s, int n) {
    std::vector<std::pair<Point, double>> dirs;
    if (n == 1) {
        dirs = {{{1.0, 0.0, 0.0}, 1.0}, {{-1.0, 0.0, 0.0}, 1.0}};
    } else if (n == 2) {
        const int m = 256;
        for (int k = 0; k < m; ++k) {
            const double th = 2.0 * std::numbers::pi * (k + 0.5) / m;
            dirs.push_back({{std::cos(th), std::sin(th), 0.0}, 2.0 * std::numbers::pi / m});
        }
    } else {
        const GaussRule& mu = gauss_legendre(24);
        const int m = 48;
        for (std::size_t a = 0; a < mu.nodes.size(); ++a) {
            const double z = mu.nodes[a], rho = std::sqrt(1.0 - z * z);
            for (int k = 0; k < m; ++k) {
                const double ph = 2.0 * std::numbers::pi * (k + 0.5) / m;
                dirs.push_back({{rho * std::cos(ph), rho * std::sin(ph), z}, mu.weights[a] * 2.0 * std::numbers::pi / m});
            }
        }
    }
    const double cut = 1e8 * R;
    Neumaier acc;
    for (const auto& [th, w] : dirs) {
        auto at = [&](double r) {
            Point y = x;
            for (int k = 0; k < n; ++k) y[k] += r * th[k];
            return ext.value(y, n);
        };
        const double body = integrate_adaptive(
            [&](double u) { return at(std::exp(u)) * std::exp(-2.0 * s * u); }, std::log(R), std::log(cut), 1e-13,
            1e-300);
        acc.add(w * (body + at(cut) * std::pow(cut, -2.0 * s) / (2.0 * s)));
    }
    return acc.value();
}

}  // namespace

GridFunction linear_oracle(const NonlocalProblem& prob) {
    const NFunction& nf = prob.nf();
    if (nf.family() != Family::Power || nf.p() != 2.0)
        throw PreconditionError("linear_oracle: requires g(t) = t");
    const ExteriorModel& ext = prob.exterior_datum().exterior();
    if (ext.kind == ExteriorKind::RadialPower)
        throw PreconditionError("linear_oracle: radial power exterior models are not supported");
    const Lattice& lat = prob.lattice();
    const int n = lat.dim();
    const double s = prob.s();
    const double hn = lat.cell_volume();
    const double R = prob.R_ext();
    const auto& nodes = prob.omega_nodes();
    const std::size_t N = nodes.size();
    std::vector<long> pos(lat.size(), -1);
    for (std::size_t a = 0; a < N; ++a) pos[nodes[a]] = static_cast<long>(a);

    // d/dv_a of the energy: sum_j 2 K h^{2n} d^{-2s} (v_a - v_j) + 2 a h^n (v_a I0 - I1) = 0 with
    // I0 = int_{d > R} d^{-n-2s}, I1 = int_{d > R} f d^{-n-2s}.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(N);
    const double a_far = prob.kernel().far_coefficient();
    const double I0 = sphere_measure(n) * std::pow(R, -2.0 * s) / (2.0 * s);
    for (std::size_t a = 0; a < N; ++a) {
        const Point xa = lat.coord(nodes[a]);
        for (std::size_t j : lat.nodes_in(Ball{xa, R})) {
            if (j == nodes[a]) continue;
            const Point xj = lat.coord(j);
            const double c = 2.0 * prob.kernel()(xa, xj, n) * hn * hn * std::pow(distance(xa, xj, n), -2.0 * s);
            A(a, a) += c;
            if (pos[j] >= 0)
                A(a, pos[j]) -= c;
            else
                b(a) += c * prob.exterior_datum()[j];
        }
        const double I1 = ext.is_constant() ? ext.constant_value() * I0 : oracle_far_moment(ext, xa, R, s, n);
        A(a, a) += 2.0 * a_far * hn * I0;
        b(a) += 2.0 * a_far * hn * I1;
    }
    const Eigen::VectorXd x = A.ldlt().solve(b);
    return prob.extend(std::vector<double>(x.data(), x.data() + N));
}

// ---------------------------------------------------------------------------
// N-function suite

std::vector<EstimateReport> nfunction_suite(const NFunction& nf, std::size_t samples,
                                            std::uint64_t seed, std::optional<double> tol) {
    const double t = tol.value_or(nf.family() == Family::PowerLog ? 1e-6 : 1e-8);
    const double hi = std::min(1e4, 0.5 * nf.t_max());
    const double lo = std::min(1e-4, 0.5 * hi);
    Rng rng(seed);
    std::vector<double> grid(samples);
    std::vector<std::pair<double, double>> young(samples), scaling(samples), doubling(samples);
    for (auto& x : grid) x = rng.log_uniform(lo, hi);
    for (auto& pr : young) pr = {rng.log_uniform(lo, hi), rng.log_uniform(lo, hi)};
    for (auto& pr : scaling) pr = {rng.log_uniform(1e-3, 1e3), rng.log_uniform(lo, hi)};
    for (auto& pr : doubling) pr = {rng.log_uniform(lo, hi), rng.log_uniform(lo, hi)};
    const double eps = rng.uniform(0.01, 1.0);
    std::vector<EstimateReport> out;
    out.push_back(check_growth_sandwich(nf, grid, t));
    out.push_back(check_young(nf, young, eps, t));
    out.push_back(check_scaling(nf, scaling, t));
    out.push_back(check_doubling(nf, doubling, t));
    out.push_back(check_inverse_consistency(nf, grid, t));
    return out;
}

// ---------------------------------------------------------------------------
// Estimate registry

nlohmann::ordered_json EstimateOutcome::to_json() const {
    nlohmann::ordered_json j;
    j["estimate"] = name;
    j["params"] = params;
    j["pass"] = pass;
    auto reps = nlohmann::ordered_json::array();
    for (const auto& r : reports) reps.push_back(fracg::to_json(r));
    j["reports"] = reps;
    j["extra"] = extra;
    return j;
}

namespace {

// Reads estimate parameters; unknown keys are a schema error.
class Params {
public:
    Params(const nlohmann::json& j, std::string where, int dim)
        : j_(j.is_null() ? nlohmann::json::object() : j), where_(std::move(where)), dim_(dim) {
        if (!j_.is_object()) throw ConfigError(where_ + ": parameters must be an object");
    }
    double num(const std::string& key, double fallback) {
        used_.insert(key);
        if (!j_.contains(key)) return fallback;
        if (!j_.at(key).is_number()) throw ConfigError(where_ + ": '" + key + "' must be a number");
        return j_.at(key).get<double>();
    }
    std::optional<double> opt(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key)) return std::nullopt;
        return num(key, 0.0);
    }
    std::string str(const std::string& key, const std::string& fallback) {
        used_.insert(key);
        if (!j_.contains(key)) return fallback;
        if (!j_.at(key).is_string()) throw ConfigError(where_ + ": '" + key + "' must be a string");
        return j_.at(key).get<std::string>();
    }
    Point point(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key)) return Point{0.0, 0.0, 0.0};
        try {
            return point_from_json(j_.at(key), dim_);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(where_ + ": " + e.what());
        }
    }
    const nlohmann::json* raw(const std::string& key) {
        used_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(where_ + ": unknown parameter '" + it.key() + "'");
    }
    nlohmann::ordered_json echo() const {
        nlohmann::ordered_json out = nlohmann::ordered_json::object();
        for (auto it = j_.begin(); it != j_.end(); ++it) out[it.key()] = it.value();
        return out;
    }

private:
    nlohmann::json j_;
    std::string where_;
    int dim_;
    std::set<std::string> used_;
};

// Largest radius r such that every node of the closed ball B_r(0) lies in Omega, less h/2.
double default_radius(const NonlocalProblem& prob) {
    const Lattice& lat = prob.lattice();
    double rin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lat.size(); ++i)
        if (!prob.in_omega(i)) rin = std::min(rin, norm(lat.coord(i), lat.dim()));
    return std::max(rin - 0.5 * lat.h(), 0.5 * lat.h());
}

const GridFunction& minimizer(const EstimateInputs& in, const std::string& name) {
    if (!in.solved) throw PreconditionError(name + ": needs a solved minimizer");
    return in.solved->minimizer;
}

std::uint64_t need_seed(const EstimateInputs& in, const std::string& name) {
    if (!in.seed) throw ConfigError(name + ": a seed is required");
    return *in.seed;
}

double tol_or(const EstimateInputs& in, double fallback) { return in.tol > 0.0 ? in.tol : fallback; }

void single_bounded(EstimateReport& r, double lhs, const std::string& what, double bound) {
    r.lhs = lhs;
    r.add_rhs(what, bound);
    r.constant_bound = 1.0;
    r.finalize_single();
}

}  // namespace

EstimateOutcome evaluate_estimate(const std::string& name, const nlohmann::json& params,
                                  const EstimateInputs& in) {
    if (!estimate_is_known(name)) throw ConfigError("unknown estimate '" + name + "'");
    if (!in.problem) throw PreconditionError(name + ": no problem");
    const NonlocalProblem& prob = *in.problem;
    const int dim = prob.lattice().dim();
    const double h = prob.lattice().h();
    Params P(params, "estimate " + name, dim);
    EstimateOutcome out;
    out.name = name;
    const RegularityContext ctx = RegularityContext::from_problem(prob);

    if (name == "oracle") {
        const double tol = tol_or(in, 1e-8);
        P.finish();
        const GridFunction& u = minimizer(in, name);
        const GridFunction ref = linear_oracle(prob);
        double err = 0.0;
        for (std::size_t i : prob.omega_nodes()) err = std::max(err, std::abs(u[i] - ref[i]));
        EstimateReport r;
        r.name = "oracle";
        r.tolerance = tol;
        single_bounded(r, err, "tolerance", tol);
        out.extra["sup_error"] = err;
        out.reports.push_back(r);
    } else if (name == "weak_residual") {
        P.finish();
        const GridFunction& u = minimizer(in, name);
        const double tol = tol_or(in, in.solved->tol);
        const double res = weak_residual(prob, u);
        EstimateReport r;
        r.name = "weak_residual";
        r.tolerance = tol;
        single_bounded(r, res, "tol_times_scale", tol * in.solved->gradient_scale);
        out.extra["gradient_scale"] = in.solved->gradient_scale;
        out.reports.push_back(r);
    } else if (name == "convexity") {
        const std::size_t probes = static_cast<std::size_t>(P.num("probes", 100));
        const double amplitude = P.num("amplitude", 1e-3);
        P.finish();
        const GridFunction& u = minimizer(in, name);
        Rng rng(need_seed(in, name));
        EnergyModel em(prob);
        const std::vector<double> base = prob.restrict_to_omega(u);
        double scale = 1.0;
        for (double v : base) scale = std::max(scale, std::abs(v));
        const double e0 = em.energy(base);
        EstimateReport r;
        r.name = "convexity";
        r.tolerance = tol_or(in, 1e-13);
        r.constant_bound = 1.0;
        for (std::size_t k = 0; k < probes; ++k) {
            const double size = amplitude * scale * rng.log_uniform(1e-2, 1.0);
            std::vector<double> v = base;
            for (double& x : v) x += size * rng.uniform(-1.0, 1.0);
            r.record(e0, em.energy(v), "probe " + std::to_string(k));
        }
        r.empirical_constant = r.lhs;
        out.extra["energy"] = e0;
        out.reports.push_back(r);
    } else if (name == "boundedness") {
        const Point c = P.point("center");
        const double radius = P.num("radius", default_radius(prob));
        P.finish();
        out.reports.push_back(boundedness_check(minimizer(in, name), Ball{c, radius}, ctx));
    } else if (name == "caccioppoli") {
        const Point c = P.point("center");
        const double radius = P.num("radius", default_radius(prob));
        const std::optional<double> k_in = P.opt("k");
        Cutoff phi;
        phi.rho_in = P.num("rho_in", 0.25 * radius);
        phi.rho_out = P.num("rho_out", 0.75 * radius);
        const std::string profile = P.str("profile", "linear");
        if (profile == "cubic")
            phi.profile = Cutoff::Profile::Cubic;
        else if (profile != "linear")
            throw ConfigError("caccioppoli: profile must be linear or cubic");
        const std::string sign = P.str("sign", "both");
        if (sign != "plus" && sign != "minus" && sign != "both")
            throw ConfigError("caccioppoli: sign must be plus, minus or both");
        P.finish();
        const GridFunction& u = minimizer(in, name);
        double k = 0.0;
        if (k_in) {
            k = *k_in;
        } else {
            const auto nodes = prob.lattice().nodes_in(Ball{c, radius});
            std::vector<double> v;
            for (std::size_t i : nodes) v.push_back(u[i]);
            k = v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
        }
        out.extra["k"] = k;
        if (sign != "minus") out.reports.push_back(caccioppoli_check(u, Ball{c, radius}, k, phi, Truncation::Plus, ctx));
        if (sign != "plus") out.reports.push_back(caccioppoli_check(u, Ball{c, radius}, k, phi, Truncation::Minus, ctx));
    } else if (name == "log_estimate") {
        const Point c = P.point("center");
        const double R = P.num("R", default_radius(prob));
        const double r = P.num("r", 0.4 * R);
        const GridFunction& u = minimizer(in, name);
        double umax = 0.0;
        for (double v : u.values()) umax = std::max(umax, std::abs(v));
        const double d = P.num("d", 1e-2 * (1.0 + umax));
        LogOptions lo;
        lo.a = P.opt("a");
        lo.b = P.num("b", lo.b);
        P.finish();
        out.reports.push_back(log_estimate_check(u, c, r, R, d, ctx, lo));
    } else if (name == "sobolev_poincare") {
        const Point c = P.point("center");
        const double radius = P.num("radius", default_radius(prob));
        const double theta = P.num("theta", 0.5 * (1.0 + sobolev_poincare_theta_max(dim, prob.s())));
        P.finish();
        out.reports.push_back(sobolev_poincare_check(minimizer(in, name), Ball{c, radius}, prob.s(), prob.nf(), theta));
    } else if (name == "holder") {
        const Point c = P.point("center");
        const double r0 = P.num("r0", 0.5 * default_radius(prob));
        const double sigma = P.num("sigma", 0.5);
        const auto levels = static_cast<std::size_t>(P.num("levels", 8));
        const std::optional<double> cb = P.opt("c_b");
        P.finish();
        HolderFit fit = holder_decay_fit(minimizer(in, name), c, r0, sigma, levels, ctx, cb);
        out.reports.push_back(fit.report);
        out.extra = fit.to_json();
        out.extra.erase("report");
        const bool flat = !fit.osc.empty() && fit.osc.front() == 0.0;
        if (!flat && (!fit.alpha_hat || !(*fit.alpha_hat > 0.0))) out.pass = false;
    } else if (name == "tail") {
        const Point c = P.point("center");
        const double R = P.num("R", default_radius(prob));
        P.finish();
        const GridFunction& u = minimizer(in, name);
        const ExteriorIntegral t = tail_detailed(u, c, R, prob.s(), prob.nf(), ctx.far);
        EstimateReport r;
        r.name = "tail";
        r.lhs = t.total;
        r.pass = t.finite && std::isfinite(t.total);
        r.add_diagnostic("lattice_part", t.lattice_part);
        r.add_diagnostic("far_part", t.far_part);
        r.add_diagnostic("worst_slope", t.worst_slope);
        if (t.finite) r.add_diagnostic("tail_scale", tail_scale(u, c, R, prob.s(), prob.nf(), ctx.far));
        if (prob.nf().family() == Family::Power)
            r.add_diagnostic("power_bracket", power_tail_bracket(u, c, R, prob.s(), prob.nf().p(), ctx.far));
        r.add_witness("R", R);
        out.reports.push_back(r);
    } else if (name == "membership") {
        P.finish();
        const MembershipReport m = membership_check(minimizer(in, name), prob.s(), prob.nf(), tol_or(in, 1e-8), ctx.far);
        EstimateReport r;
        r.name = "membership";
        r.tolerance = tol_or(in, 1e-8);
        r.constant_bound = 1.0;
        r.record(m.tail1, m.tail_bound1, "tail at x1");
        r.record(m.tail2, m.tail_bound2, "tail at x2");
        r.record(m.weighted_integral, m.weighted_bound, "weighted integral");
        r.empirical_constant = r.lhs;
        if (!m.member) r.pass = false;
        out.extra = m.to_json(dim);
        out.reports.push_back(r);
    } else if (name == "de_giorgi") {
        const double C = P.num("C", 1.0), B = P.num("B", 2.0), beta = P.num("beta", 1.0);
        const std::optional<double> A0 = P.opt("A0");
        const auto steps = static_cast<std::size_t>(P.num("steps", 40));
        P.finish();
        const DeGiorgiResult res = A0 ? de_giorgi_iterate(C, B, beta, *A0, steps)
                                      : de_giorgi_at_threshold(C, B, beta, steps);
        EstimateReport r;
        r.name = "de_giorgi";
        r.constant_bound = 1.0;
        for (std::size_t i = 0; i < res.A.size(); ++i)
            r.record_outcome(res.A[i], res.bounds[i],
                             !res.first_violation || i < *res.first_violation, "step " + std::to_string(i));
        r.empirical_constant = r.lhs;
        // Above the threshold no bound is claimed.
        r.pass = !res.threshold_met || (res.bound_holds && !res.diverged);
        r.add_diagnostic("threshold", res.threshold);
        r.add_diagnostic("threshold_met", res.threshold_met ? 1.0 : 0.0);
        out.extra = res.to_json();
        out.reports.push_back(r);
    } else if (name == "luxemburg") {
        const nlohmann::json* corpus = P.raw("corpus");
        const auto count = static_cast<std::size_t>(P.num("count", 8));
        P.finish();
        std::vector<CorpusSpec> specs;
        if (corpus) {
            specs.push_back(CorpusSpec::from_json(*corpus));
        } else {
            for (auto fam : {CorpusFamily::RandomSmooth, CorpusFamily::PowerCusp, CorpusFamily::TwoLevel}) {
                CorpusSpec cs;
                cs.family = fam;
                cs.dim = dim;
                cs.h = h;
                cs.half = dim == 1 ? 32 : 8;
                cs.count = count;
                specs.push_back(cs);
            }
        }
        const std::uint64_t seed = need_seed(in, name);
        EstimateReport unit, bound;
        unit.name = "luxemburg_unit_modular";
        unit.tolerance = tol_or(in, 1e-8);
        unit.constant_bound = 1.0;
        bound.name = "luxemburg_modular_bound";
        bound.tolerance = 1e-12;
        bound.constant_bound = 1.0;
        for (std::size_t k = 0; k < specs.size(); ++k) {
            const auto fs_ = generate_corpus(specs[k], seed + k);
            for (std::size_t c = 0; c < fs_.size(); ++c) {
                const std::string label = to_string(specs[k].family) + " #" + std::to_string(c);
                const double nrm = luxemburg_norm(fs_[c], Region::whole(), prob.nf());
                if (nrm > 0.0) {
                    const double m = orlicz_modular(fs_[c], Region::whole(), prob.nf(), nrm);
                    unit.record_outcome(std::abs(m - 1.0), unit.tolerance, std::abs(m - 1.0) <= unit.tolerance, label);
                }
                bound.record(nrm, orlicz_modular(fs_[c], Region::whole(), prob.nf()) + 1.0, label);
            }
        }
        unit.empirical_constant = unit.lhs;
        bound.empirical_constant = bound.lhs;
        out.reports.push_back(unit);
        out.reports.push_back(bound);
    } else if (name == "nfunction") {
        const auto samples = static_cast<std::size_t>(P.num("samples", 10000));
        P.finish();
        out.reports = nfunction_suite(prob.nf(), samples, need_seed(in, name),
                                      in.tol > 0.0 ? std::optional<double>(in.tol) : std::nullopt);
    }
    out.params = P.echo();
    for (const auto& r : out.reports)
        if (!r.pass) out.pass = false;
    return out;
}

// ---------------------------------------------------------------------------
// Runner

std::string iso_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) throw std::ios_base::failure("cannot open '" + p.string() + "' for writing");
    os << text;
    os.flush();
    if (!os) throw std::ios_base::failure("write failed for '" + p.string() + "'");
}

std::string minimizer_csv(const NonlocalProblem& prob, const GridFunction& u) {
    const Lattice& lat = prob.lattice();
    const int n = lat.dim();
    std::ostringstream os;
    for (int k = 0; k < n; ++k) os << 'i' << k << ',';
    for (int k = 0; k < n; ++k) os << 'x' << k << ',';
    os << "omega,value\n";
    for (std::size_t i = 0; i < lat.size(); ++i) {
        const Index3 mi = lat.multi_index(i);
        const Point x = lat.coord(i);
        for (int k = 0; k < n; ++k) os << mi[k] << ',';
        for (int k = 0; k < n; ++k) os << fmt(x[k]) << ',';
        os << (prob.in_omega(i) ? 1 : 0) << ',' << fmt(u[i]) << '\n';
    }
    return os.str();
}

std::string sweep_csv(const std::string& parameter, const std::vector<double>& values,
                      const std::vector<EstimateOutcome>& outcomes) {
    std::vector<std::string> rhs_names, wit_names;
    auto add_unique = [](std::vector<std::string>& v, const std::string& s) {
        if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
    };
    for (const auto& o : outcomes)
        for (const auto& r : o.reports) {
            for (const auto& t : r.rhs_terms) add_unique(rhs_names, t.name);
            for (const auto& t : r.witnesses) add_unique(wit_names, t.name);
        }
    std::ostringstream os;
    os << parameter << ",report,pass,lhs";
    for (const auto& n : rhs_names) os << ",rhs:" << n;
    os << ",rhs_sum,empirical_constant,samples,violations";
    for (const auto& n : wit_names) os << ",witness:" << n;
    os << '\n';
    auto lookup = [](const std::vector<NamedValue>& v, const std::string& n) -> std::string {
        for (const auto& t : v)
            if (t.name == n) return fmt(t.value);
        return "";
    };
    for (std::size_t k = 0; k < outcomes.size(); ++k)
        for (const auto& r : outcomes[k].reports) {
            os << fmt(values[k]) << ',' << r.name << ',' << (r.pass ? 1 : 0) << ',' << fmt(r.lhs);
            for (const auto& n : rhs_names) os << ',' << lookup(r.rhs_terms, n);
            os << ',' << fmt(r.rhs_sum()) << ',' << fmt(r.empirical_constant) << ',' << r.samples << ','
               << r.violations;
            for (const auto& n : wit_names) os << ',' << lookup(r.witnesses, n);
            os << '\n';
        }
    return os.str();
}

bool needs_minimizer(const std::string& estimate) {
    return estimate != "de_giorgi" && estimate != "luxemburg" && estimate != "nfunction";
}

nlohmann::json merged(const nlohmann::json& a, const nlohmann::json& b) {
    nlohmann::json out = a.is_object() ? a : nlohmann::json::object();
    if (b.is_object())
        for (auto it = b.begin(); it != b.end(); ++it) out[it.key()] = it.value();
    return out;
}

}  // namespace

RunResult run(const RunConfig& cfg_in, RunMode mode, const RunOverrides& ov) {
    RunResult res;
    RunConfig cfg = cfg_in;
    if (ov.seed) cfg.seed = ov.seed;
    if (ov.tol) cfg.tolerances["solve"] = *ov.tol;
    std::string dir = ov.out.value_or("");
    if (dir.empty()) dir = cfg.output_dir;
    if (dir.empty())
        if (const char* env = std::getenv("FRACG_OUTPUT_DIR")) dir = env;
    if (dir.empty()) dir = "fracg_out";
    res.output_dir = dir;

    std::vector<StageSpec> stages;
    for (const StageSpec& st : cfg.pipeline) {
        const bool keep = mode == RunMode::All ||
                          (mode == RunMode::Solve && st.kind == StageSpec::Kind::Solve) ||
                          (mode == RunMode::Verify && st.kind != StageSpec::Kind::Sweep) ||
                          (mode == RunMode::Sweep && st.kind != StageSpec::Kind::Verify);
        if (keep) stages.push_back(st);
    }
    if (mode == RunMode::Solve && stages.empty()) stages.push_back(StageSpec{});

    const std::string stamp = iso_timestamp();
    nlohmann::ordered_json summary;
    summary["timestamp"] = stamp;
    auto stage_log = nlohmann::ordered_json::array();
    try {
        cfg.validate();
        const SolveOptions sopts = solve_options(cfg);
        const NonlocalProblem prob = build_problem(cfg.problem);
        std::error_code ec;
        fs::create_directories(res.output_dir, ec);
        if (ec) throw std::ios_base::failure("cannot create '" + res.output_dir.string() + "': " + ec.message());

        std::optional<SolveReport> solved;
        auto emit = [&](const std::string& file, const std::string& text) {
            write_text(res.output_dir / file, text);
            res.written.push_back(file);
        };
        auto do_solve = [&]() -> bool {
            solved = solve(prob, sopts);
            nlohmann::ordered_json j;
            j["timestamp"] = stamp;
            j["problem"] = prob.to_json();
            j["report"] = solved->to_json(false);
            emit("SolveReport.json", j.dump(2) + "\n");
            emit("minimizer.csv", minimizer_csv(prob, solved->minimizer));
            const bool ok = solved->converged;
            res.messages.push_back(std::string("solve: ") + (ok ? "converged" : "NOT converged") + " after " +
                                   std::to_string(solved->iterations) + " iterations");
            stage_log.push_back({{"stage", "solve"}, {"pass", ok}});
            if (!ok) res.exit_code = kExitNonConvergence;
            return ok;
        };
        auto inputs = [&](const std::string& estimate) {
            EstimateInputs in;
            in.problem = &prob;
            in.solved = solved ? &*solved : nullptr;
            in.seed = cfg.seed;
            in.tol = cfg.tolerance(estimate, 0.0);
            return in;
        };

        bool any_failed = false;
        for (const StageSpec& st : stages) {
            const std::string est = st.kind == StageSpec::Kind::Sweep ? cfg.sweeps.at(st.name).estimate : st.name;
            if (st.kind == StageSpec::Kind::Solve || (needs_minimizer(est) && !solved)) {
                if (!do_solve()) break;
                if (st.kind == StageSpec::Kind::Solve) continue;
            }
            if (st.kind == StageSpec::Kind::Verify) {
                const auto it = cfg.estimates.find(st.name);
                EstimateOutcome o = evaluate_estimate(st.name, it == cfg.estimates.end() ? nlohmann::json::object() : it->second,
                                                      inputs(st.name));
                nlohmann::ordered_json j;
                j["timestamp"] = stamp;
                j.update(o.to_json());
                emit("estimate_" + st.name + ".json", j.dump(2) + "\n");
                res.messages.push_back(st.label() + ": " + (o.pass ? "pass" : "FAIL"));
                stage_log.push_back({{"stage", st.label()}, {"pass", o.pass}});
                any_failed = any_failed || !o.pass;
            } else {
                const SweepSpec& sw = cfg.sweeps.at(st.name);
                const auto it = cfg.estimates.find(sw.estimate);
                const nlohmann::json base =
                    merged(it == cfg.estimates.end() ? nlohmann::json::object() : it->second, sw.base);
                std::vector<EstimateOutcome> outcomes(sw.values.size());
                std::vector<std::exception_ptr> errors(sw.values.size());
                std::atomic<std::size_t> next{0};
                const EstimateInputs in = inputs(sw.estimate);
                auto worker = [&]() {
                    for (std::size_t k = next++; k < sw.values.size(); k = next++) {
                        try {
                            nlohmann::json pj = base;
                            pj[sw.parameter] = sw.values[k];
                            outcomes[k] = evaluate_estimate(sw.estimate, pj, in);
                        } catch (...) {
                            errors[k] = std::current_exception();
                        }
                    }
                };
                const unsigned jobs = std::max(1u, std::min<unsigned>(ov.jobs, static_cast<unsigned>(sw.values.size())));
                std::vector<std::thread> pool;
                for (unsigned w = 1; w < jobs; ++w) pool.emplace_back(worker);
                worker();
                for (auto& t : pool) t.join();
                for (auto& e : errors)
                    if (e) std::rethrow_exception(e);
                bool pass = true;
                for (const auto& o : outcomes) pass = pass && o.pass;
                emit("sweep_" + st.name + ".csv", sweep_csv(sw.parameter, sw.values, outcomes));
                res.messages.push_back(st.label() + ": " + (pass ? "pass" : "FAIL") + " over " +
                                       std::to_string(sw.values.size()) + " points");
                stage_log.push_back({{"stage", st.label()}, {"pass", pass}});
                any_failed = any_failed || !pass;
            }
        }
        if (res.exit_code == kExitOk && any_failed) res.exit_code = kExitEstimateFailure;
        summary["stages"] = stage_log;
        summary["exit_code"] = res.exit_code;
        emit("summary.json", summary.dump(2) + "\n");
    } catch (const ConfigError& e) {
        res.exit_code = kExitSchema;
        res.messages.push_back(std::string("schema: ") + e.what());
    } catch (const PreconditionError& e) {
        res.exit_code = kExitSchema;
        res.messages.push_back(std::string("invalid parameters: ") + e.what());
    } catch (const DomainError& e) {
        res.exit_code = kExitSchema;
        res.messages.push_back(std::string("invalid parameters: ") + e.what());
    } catch (const std::ios_base::failure& e) {
        res.exit_code = kExitIo;
        res.messages.push_back(std::string("io: ") + e.what());
    } catch (const fs::filesystem_error& e) {
        res.exit_code = kExitIo;
        res.messages.push_back(std::string("io: ") + e.what());
    } catch (const std::exception& e) {
        // numerical breakdown inside a stage (range, convergence)
        res.exit_code = kExitEstimateFailure;
        res.messages.push_back(std::string("error: ") + e.what());
    }
    return res;
}

int run_file(const fs::path& config, RunMode mode, const RunOverrides& ov, std::ostream& log) {
    RunConfig cfg;
    try {
        cfg = RunConfig::load(config);
    } catch (const ConfigError& e) {
        log << "schema: " << e.what() << '\n';
        return kExitSchema;
    } catch (const std::ios_base::failure& e) {
        log << "io: " << e.what() << '\n';
        return kExitIo;
    }
    const RunResult r = run(cfg, mode, ov);
    for (const auto& m : r.messages) log << m << '\n';
    return r.exit_code;
}

}  // namespace fracg
