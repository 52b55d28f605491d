#include "fracg/nfunction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fracg/error.hpp"
#include "fracg/numerics.hpp"

namespace fracg {

std::string to_string(Family f) {
    switch (f) {
        case Family::Power: return "power";
        case Family::PowerLog: return "power_log";
        case Family::Table: return "table";
    }
    return "unknown";
}

struct NFunction::Impl {
    GrowthFunction growth;
    double p = 2.0;
    double q = 2.0;
    double quad_tol = 1e-10;

    virtual ~Impl() = default;
    virtual double g(double t) const = 0;
    virtual double G(double t) const = 0;
    virtual double inv_g(double y) const = 0;
    virtual double inv_G(double y) const = 0;
    virtual double conjugate(double t) const {
        const double s = inv_g(t);
        return std::max(0.0, t * s - G(s));
    }
    virtual double t_max() const { return NFunction::kMaxArgument; }
};

namespace {

void check_argument(double t, const char* op) {
    if (std::isnan(t)) throw DomainError(std::string(op) + ": NaN argument");
    if (t < 0.0) throw DomainError(std::string(op) + ": negative argument");
    if (t > NFunction::kMaxArgument) throw RangeError(std::string(op) + ": argument above 1e30");
}

double finite_or_throw(double v, const char* op) {
    if (!std::isfinite(v)) throw RangeError(std::string(op) + ": overflow");
    return v;
}

// Monotone inversion of an increasing f with f(0) = 0: bracket by doubling/halving, then
// Newton steps kept inside the bracket (bisection when Newton leaves it).
template <class F, class DF>
double invert_monotone(const F& f, const DF& df, double y, const char* op) {
    if (y == 0.0) return 0.0;
    double lo = 0.0, hi = 1.0;
    double fhi = f(hi);
    if (fhi < y) {
        while (fhi < y) {
            lo = hi;
            hi *= 2.0;
            if (hi > NFunction::kMaxArgument)
                throw RangeError(std::string(op) + ": preimage above 1e30");
            fhi = f(hi);
        }
    } else {
        while (true) {
            const double half = 0.5 * hi;
            if (half < 1e-300) {
                lo = 0.0;
                break;
            }
            if (f(half) < y) {
                lo = half;
                break;
            }
            hi = half;
        }
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 400; ++it) {
        const double fx = f(x) - y;
        if (fx == 0.0) return x;
        if (fx < 0.0)
            lo = x;
        else
            hi = x;
        if (hi - lo <= 4e-16 * hi) return 0.5 * (lo + hi);
        const double d = df(x);
        double next = (d > 0.0) ? x - fx / d : lo;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-16 * x) return next;
        x = next;
    }
    throw ConvergenceError(std::string(op) + ": iteration cap reached", lo, hi);
}

struct PowerImpl final : NFunction::Impl {
    int fast = 0;  // 2, 3 or 15 for p = 2, 3, 1.5

    explicit PowerImpl(double p_) {
        p = q = p_;
        if (p_ == 2.0) fast = 2;
        if (p_ == 3.0) fast = 3;
        if (p_ == 1.5) fast = 15;
    }
    double g(double t) const override {
        check_argument(t, "g");
        switch (fast) {
            case 2: return t;
            case 3: return t * t;
            case 15: return std::sqrt(t);
            default: return finite_or_throw(std::pow(t, p - 1.0), "g");
        }
    }
    double G(double t) const override {
        check_argument(t, "G");
        switch (fast) {
            case 2: return 0.5 * t * t;
            case 3: return t * t * t / 3.0;
            case 15: return t * std::sqrt(t) / 1.5;
            default: return finite_or_throw(std::pow(t, p) / p, "G");
        }
    }
    double inv_g(double y) const override {
        check_argument(y, "inv_g");
        if (fast == 2) return y;
        if (fast == 3) return std::sqrt(y);
        const double t = std::pow(y, 1.0 / (p - 1.0));
        if (t > NFunction::kMaxArgument) throw RangeError("inv_g: preimage above 1e30");
        return t;
    }
    double inv_G(double y) const override {
        if (std::isnan(y) || y < 0.0) throw DomainError("inv_G: negative argument");
        if (!std::isfinite(y)) throw RangeError("inv_G: non-finite argument");
        const double t = (fast == 2) ? std::sqrt(2.0 * y) : std::pow(p * y, 1.0 / p);
        if (t > NFunction::kMaxArgument) throw RangeError("inv_G: preimage above 1e30");
        return t;
    }
    double conjugate(double t) const override {
        check_argument(t, "conjugate");
        if (fast == 2) return 0.5 * t * t;
        const double pc = p / (p - 1.0);
        return finite_or_throw(std::pow(t, pc) / pc, "conjugate");
    }
};

struct PowerLogImpl final : NFunction::Impl {
    explicit PowerLogImpl(double p_, double tol) {
        p = p_;
        q = p_ + 1.0;
        quad_tol = tol;
        G_half = small_series(0.5);
        G_two = G_half + middle(0.5, 2.0);
    }
    double raw_g(double t) const {
        if (p == 2.0) return t * std::log1p(t);
        return std::pow(t, p - 1.0) * std::log1p(t);
    }
    double raw_dg(double t) const {
        return (p - 1.0) * std::pow(t, p - 2.0) * std::log1p(t) + std::pow(t, p - 1.0) / (1.0 + t);
    }
    // G on [0, 1/2]: sum_k (-1)^{k+1} t^{p+k} / (k (p+k)).
    double small_series(double t) const {
        const double tp = std::pow(t, p);
        double tk = 1.0, acc = 0.0;
        for (int k = 1; k < 200; ++k) {
            tk *= t;
            const double term = tp * tk / (k * (p + k));
            acc += (k % 2 ? term : -term);
            if (term <= 1e-18 * acc) break;
        }
        return acc;
    }
    // int_a^b g by a fixed Gauss-Legendre rule, for 1/2 <= a <= b <= 2 where g is analytic.
    double middle(double a, double b) const {
        const GaussRule& rule = gauss_legendre(24);
        const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
        Neumaier acc;
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) acc.add(rule.weights[k] * raw_g(c + hw * rule.nodes[k]));
        return hw * acc.value();
    }
    // int_2^t g with log(1 + x) = log x + sum_k (-1)^{k+1} x^{-k} / k.
    double large_series(double t) const {
        const double lt = std::log(t), l2 = std::log(2.0);
        Neumaier acc;
        acc.add(std::pow(t, p) * (lt / p - 1.0 / (p * p)));
        acc.add(-std::pow(2.0, p) * (l2 / p - 1.0 / (p * p)));
        const double ratio_t = 1.0 / t;
        double tpk = std::pow(t, p), twopk = std::pow(2.0, p);
        for (int k = 1; k < 400; ++k) {
            tpk *= ratio_t;
            twopk *= 0.5;
            const double e = p - k;
            const double part = std::abs(e) < 1e-12 ? std::log(t / 2.0) : (tpk - twopk) / e;
            const double term = part / k;
            acc.add(k % 2 ? term : -term);
            if (k > p + 1.0 && std::abs(term) <= 1e-18 * std::abs(acc.value())) break;
        }
        return acc.value();
    }
    double raw_G(double t) const {
        if (t == 0.0) return 0.0;
        if (t <= 0.5) return small_series(t);
        if (t <= 2.0) return G_half + middle(0.5, t);
        return G_two + large_series(t);
    }
    double G_half = 0.0, G_two = 0.0;
    double g(double t) const override {
        check_argument(t, "g");
        return finite_or_throw(raw_g(t), "g");
    }
    double G(double t) const override {
        check_argument(t, "G");
        return finite_or_throw(raw_G(t), "G");
    }
    double inv_g(double y) const override {
        if (std::isnan(y) || y < 0.0) throw DomainError("inv_g: negative argument");
        if (!std::isfinite(y)) throw RangeError("inv_g: non-finite argument");
        return invert_monotone([this](double t) { return raw_g(t); },
                               [this](double t) { return raw_dg(t); }, y, "inv_g");
    }
    double inv_G(double y) const override {
        if (std::isnan(y) || y < 0.0) throw DomainError("inv_G: negative argument");
        if (!std::isfinite(y)) throw RangeError("inv_G: non-finite argument");
        return invert_monotone([this](double t) { return raw_G(t); },
                               [this](double t) { return raw_g(t); }, y, "inv_G");
    }
};

struct TableImpl final : NFunction::Impl {
    std::vector<double> ts, gs, Gs;  // Gs[i] = G(ts[i])

    explicit TableImpl(const std::vector<std::pair<double, double>>& pts) {
        if (pts.empty()) throw DomainError("table: no samples");
        for (const auto& [t, v] : pts)
            if (!std::isfinite(t) || !std::isfinite(v))
                throw DomainError("table: non-finite sample");
        if (pts.front().first < 0.0) throw DomainError("table: negative abscissa");
        if (pts.front().first == 0.0) {
            if (pts.front().second != 0.0) throw DomainError("table: g(0) must be 0");
        } else {
            ts.push_back(0.0);
            gs.push_back(0.0);
        }
        for (const auto& [t, v] : pts) {
            if (!ts.empty() && (t <= ts.back() || v <= gs.back()))
                throw DomainError("table: samples must be strictly increasing in t and g");
            ts.push_back(t);
            gs.push_back(v);
        }
        if (ts.size() < 2) throw DomainError("table: need a positive sample");
        Gs.assign(ts.size(), 0.0);
        for (std::size_t i = 1; i < ts.size(); ++i)
            Gs[i] = Gs[i - 1] + 0.5 * (gs[i] + gs[i - 1]) * (ts[i] - ts[i - 1]);
    }
    double t_max() const override { return ts.back(); }
    std::size_t segment(const std::vector<double>& xs, double x) const {
        auto it = std::upper_bound(xs.begin(), xs.end(), x);
        std::size_t i = static_cast<std::size_t>(it - xs.begin());
        if (i == 0) return 0;
        return std::min(i - 1, xs.size() - 2);
    }
    double g(double t) const override {
        check_argument(t, "g");
        if (t > ts.back()) throw RangeError("g: argument outside table");
        const std::size_t i = segment(ts, t);
        const double m = (gs[i + 1] - gs[i]) / (ts[i + 1] - ts[i]);
        return gs[i] + m * (t - ts[i]);
    }
    double G(double t) const override {
        check_argument(t, "G");
        if (t > ts.back()) throw RangeError("G: argument outside table");
        const std::size_t i = segment(ts, t);
        const double m = (gs[i + 1] - gs[i]) / (ts[i + 1] - ts[i]);
        const double d = t - ts[i];
        return Gs[i] + gs[i] * d + 0.5 * m * d * d;
    }
    double inv_g(double y) const override {
        if (std::isnan(y) || y < 0.0) throw DomainError("inv_g: negative argument");
        if (y > gs.back()) throw RangeError("inv_g: value outside table");
        const std::size_t i = segment(gs, y);
        const double m = (gs[i + 1] - gs[i]) / (ts[i + 1] - ts[i]);
        return ts[i] + (y - gs[i]) / m;
    }
    double inv_G(double y) const override {
        if (std::isnan(y) || y < 0.0) throw DomainError("inv_G: negative argument");
        if (y > Gs.back()) throw RangeError("inv_G: value outside table");
        const std::size_t i = segment(Gs, y);
        const double m = (gs[i + 1] - gs[i]) / (ts[i + 1] - ts[i]);
        const double r = y - Gs[i];
        // Root of m d^2 / 2 + g_i d - r = 0 in cancellation-free form.
        const double d = 2.0 * r / (gs[i] + std::sqrt(gs[i] * gs[i] + 2.0 * m * r));
        return std::min(ts[i] + (std::isfinite(d) ? d : 0.0), ts[i + 1]);
    }
};

void estimate_table_indices(TableImpl& impl, const NFunctionOptions& opts) {
    const double hi = std::min(1e6, impl.ts.back());
    const double lo = 1e-6;
    if (hi < lo) throw DomainError("table: samples do not reach 1e-6");
    std::vector<double> grid = logspace(lo, hi, 2001);
    for (double t : impl.ts)
        if (t >= lo && t <= hi) grid.push_back(t);
    double pmin = std::numeric_limits<double>::infinity();
    double qmax = 0.0;
    for (double t : grid) {
        const double r = t * impl.g(t) / impl.G(t);
        pmin = std::min(pmin, r);
        qmax = std::max(qmax, r);
    }
    constexpr double slack = 1e-9;
    if (opts.declared_p) {
        if (*opts.declared_p > pmin * (1.0 + slack)) {
            std::ostringstream os;
            os << "table: declared p = " << *opts.declared_p << " exceeds estimated " << pmin;
            throw DomainError(os.str());
        }
        pmin = *opts.declared_p;
    }
    if (opts.declared_q) {
        if (*opts.declared_q < qmax * (1.0 - slack)) {
            std::ostringstream os;
            os << "table: declared q = " << *opts.declared_q << " below estimated " << qmax;
            throw DomainError(os.str());
        }
        qmax = *opts.declared_q;
    }
    impl.p = pmin;
    impl.q = qmax;
}

}  // namespace

NFunction::NFunction(const GrowthFunction& gf, const NFunctionOptions& opts) {
    if (!(opts.quadrature_tol > 0.0)) throw DomainError("NFunction: quadrature_tol must be > 0");
    std::shared_ptr<Impl> impl;
    switch (gf.family) {
        case Family::Power:
            if (!(gf.p > 1.0) || !std::isfinite(gf.p)) throw DomainError("power: need p > 1");
            impl = std::make_shared<PowerImpl>(gf.p);
            break;
        case Family::PowerLog:
            if (!(gf.p > 1.0) || !std::isfinite(gf.p)) throw DomainError("power_log: need p > 1");
            impl = std::make_shared<PowerLogImpl>(gf.p, opts.quadrature_tol);
            break;
        case Family::Table: {
            auto t = std::make_shared<TableImpl>(gf.table);
            estimate_table_indices(*t, opts);
            impl = t;
            break;
        }
    }
    impl->growth = gf;
    impl->quad_tol = opts.quadrature_tol;
    if (!(impl->p > 1.0) || !(impl->q >= impl->p) || !std::isfinite(impl->q))
        throw DomainError("NFunction: indices must satisfy 1 < p <= q < inf");
    impl_ = std::move(impl);
}

NFunction NFunction::from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("family")) throw ConfigError("nfunction: missing family");
    const std::string fam = j.at("family").get<std::string>();
    NFunctionOptions opts;
    if (j.contains("quadrature_tol")) opts.quadrature_tol = j.at("quadrature_tol").get<double>();
    if (fam == "power") return NFunction(GrowthFunction::power(j.at("p").get<double>()), opts);
    if (fam == "power_log")
        return NFunction(GrowthFunction::power_log(j.at("p").get<double>()), opts);
    if (fam == "table") {
        std::vector<std::pair<double, double>> pts;
        for (const auto& row : j.at("points")) {
            if (!row.is_array() || row.size() != 2) throw ConfigError("table: rows must be [t, g]");
            pts.emplace_back(row[0].get<double>(), row[1].get<double>());
        }
        if (j.contains("p")) opts.declared_p = j.at("p").get<double>();
        if (j.contains("q")) opts.declared_q = j.at("q").get<double>();
        return NFunction(GrowthFunction::tabulated(std::move(pts)), opts);
    }
    throw ConfigError("nfunction: unknown family '" + fam + "'");
}

double NFunction::g(double t) const { return impl_->g(t); }
double NFunction::G(double t) const { return impl_->G(t); }
double NFunction::inv_G(double y) const { return impl_->inv_G(y); }
double NFunction::inv_g(double y) const { return impl_->inv_g(y); }
double NFunction::conjugate(double t) const {
    if (std::isnan(t) || t < 0.0) throw DomainError("conjugate: negative argument");
    return impl_->conjugate(t);
}
ConjugateFunction NFunction::conj() const { return ConjugateFunction(*this); }
double NFunction::p() const { return impl_->p; }
double NFunction::q() const { return impl_->q; }
double NFunction::kappa() const { return std::exp2(impl_->q); }
double NFunction::ell() const { return std::exp2(1.0 / (impl_->p - 1.0)); }
double NFunction::quadrature_tol() const { return impl_->quad_tol; }
Family NFunction::family() const { return impl_->growth.family; }
const GrowthFunction& NFunction::growth() const { return impl_->growth; }
double NFunction::t_max() const { return impl_->t_max(); }
double NFunction::g_max() const {
    const double tm = impl_->t_max();
    return tm >= kMaxArgument ? std::numeric_limits<double>::infinity() : impl_->g(tm);
}

nlohmann::ordered_json NFunction::to_json() const {
    nlohmann::ordered_json j;
    j["family"] = to_string(family());
    if (family() == Family::Table) {
        auto pts = nlohmann::ordered_json::array();
        for (const auto& [t, v] : impl_->growth.table) pts.push_back({t, v});
        j["points"] = pts;
    }
    j["p"] = p();
    j["q"] = q();
    j["kappa"] = kappa();
    j["ell"] = ell();
    j["quadrature_tol"] = quadrature_tol();
    return j;
}

// ---------------------------------------------------------------------------
// Structural checks

namespace {

std::string label(const char* what, double a, double b) {
    std::ostringstream os;
    os.precision(10);
    os << what << "(" << a << ", " << b << ")";
    return os.str();
}

EstimateReport make_report(const std::string& name, double tol) {
    EstimateReport r;
    r.name = name;
    r.tolerance = tol;
    r.constant_bound = 1.0;
    return r;
}

}  // namespace

EstimateReport check_growth_sandwich(const NFunction& nf, const std::vector<double>& grid,
                                     double tol) {
    EstimateReport r = make_report("growth_sandwich", tol);
    double rmin = std::numeric_limits<double>::infinity();
    double rmax = 0.0;
    std::size_t skipped = 0;
    for (double t : grid) {
        if (!(t > 0.0)) throw DomainError("check_growth_sandwich: grid points must be positive");
        if (t > nf.t_max()) {
            ++skipped;
            continue;
        }
        const double ratio = t * nf.g(t) / nf.G(t);
        rmin = std::min(rmin, ratio);
        rmax = std::max(rmax, ratio);
        // Absolute band [p - tol, q + tol].
        r.record_outcome(nf.p(), ratio, ratio >= nf.p() - tol, label("p<=tg/G", t, ratio));
        r.record_outcome(ratio, nf.q(), ratio <= nf.q() + tol, label("tg/G<=q", t, ratio));
    }
    r.add_diagnostic("min_ratio", rmin);
    r.add_diagnostic("max_ratio", rmax);
    r.add_diagnostic("p", nf.p());
    r.add_diagnostic("q", nf.q());
    r.add_diagnostic("skipped_out_of_range", static_cast<double>(skipped));
    return r;
}

EstimateReport check_young(const NFunction& nf,
                           const std::vector<std::pair<double, double>>& pairs, double eps,
                           double tol) {
    if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("check_young: eps must lie in (0, 1]");
    EstimateReport r = make_report("young", tol);
    const double q = nf.q();
    const double eps_pow = std::pow(eps, 1.0 - q);
    std::size_t skipped = 0;
    for (const auto& [t, s] : pairs) {
        if (t < 0.0 || s < 0.0) throw DomainError("check_young: negative argument");
        try {
            const double Gt = nf.G(t);
            const double Gs = nf.conjugate(s);
            r.record(t * s, Gt + Gs, label("young", t, s));
            r.record(t * s, eps_pow * Gt + eps * Gs, label("young_eps", t, s));
            const double gt = nf.g(t);
            const double lhs = nf.conjugate(gt);
            const double rhs = t * gt - Gt;
            r.record(lhs, rhs, label("conjugate_identity_le", t, gt));
            r.record(rhs, lhs, label("conjugate_identity_ge", t, gt));
            r.record(lhs, (q - 1.0) * Gt, label("conjugate_q_bound", t, gt));
        } catch (const RangeError&) {
            ++skipped;
        }
    }
    r.add_diagnostic("eps", eps);
    r.add_diagnostic("skipped_out_of_range", static_cast<double>(skipped));
    return r;
}

EstimateReport check_scaling(const NFunction& nf,
                             const std::vector<std::pair<double, double>>& samples, double tol) {
    EstimateReport r = make_report("scaling", tol);
    const double p = nf.p(), q = nf.q();
    const double pc = p / (p - 1.0), qc = q / (q - 1.0);
    std::size_t skipped = 0;
    for (const auto& [a, t] : samples) {
        if (!(a > 0.0) || t < 0.0) throw DomainError("check_scaling: need a > 0, t >= 0");
        try {
            const double Gt = nf.G(t);
            const double Gat = nf.G(a * t);
            const double lo = (a <= 1.0) ? std::pow(a, q) : std::pow(a, p);
            const double hi = (a <= 1.0) ? std::pow(a, p) : std::pow(a, q);
            r.record(lo * Gt, Gat, label("G_lower", a, t));
            r.record(Gat, hi * Gt, label("G_upper", a, t));
            const double Ct = nf.conjugate(t);
            const double Cat = nf.conjugate(a * t);
            const double clo = (a <= 1.0) ? std::pow(a, pc) : std::pow(a, qc);
            const double chi = (a <= 1.0) ? std::pow(a, qc) : std::pow(a, pc);
            r.record(clo * Ct, Cat, label("Gstar_lower", a, t));
            r.record(Cat, chi * Ct, label("Gstar_upper", a, t));
        } catch (const RangeError&) {
            ++skipped;
        }
    }
    r.add_diagnostic("skipped_out_of_range", static_cast<double>(skipped));
    return r;
}

EstimateReport check_doubling(const NFunction& nf,
                              const std::vector<std::pair<double, double>>& pairs, double tol) {
    EstimateReport r = make_report("doubling", tol);
    const double kappa = nf.kappa(), ell = nf.ell();
    const double upper = std::exp2(nf.q() - 1.0);
    std::size_t skipped = 0;
    for (const auto& [t, s] : pairs) {
        if (t < 0.0 || s < 0.0) throw DomainError("check_doubling: negative argument");
        try {
            const double Gt = nf.G(t), Gs = nf.G(s);
            r.record(nf.G(2.0 * t), kappa * Gt, label("delta2", t, kappa));
            r.record(Gt, nf.G(ell * t) / (2.0 * ell), label("nabla2", t, ell));
            r.record(nf.G(0.5 * (t + s)), 0.5 * (Gt + Gs), label("midpoint_convexity", t, s));
            const double Gts = nf.G(t + s);
            r.record(0.5 * (Gt + Gs), Gts, label("sum_lower", t, s));
            r.record(Gts, upper * (Gt + Gs), label("sum_upper", t, s));
        } catch (const RangeError&) {
            ++skipped;
        }
    }
    r.add_diagnostic("kappa", kappa);
    r.add_diagnostic("ell", ell);
    r.add_diagnostic("skipped_out_of_range", static_cast<double>(skipped));
    return r;
}

EstimateReport check_inverse_consistency(const NFunction& nf, const std::vector<double>& ts,
                                         double tol) {
    EstimateReport r = make_report("inverse_consistency", tol);
    auto both = [&](double a, double b, const std::string& lab) {
        r.record(a, b, lab);
        r.record(b, a, lab);
    };
    std::size_t skipped = 0;
    for (double t : ts) {
        try {
            const double Gt = nf.G(t);
            both(nf.inv_G(Gt), t, label("invG_G", t, Gt));
            both(nf.G(nf.inv_G(t)), t, label("G_invG", t, t));
            const double gt = nf.g(t);
            both(nf.inv_g(gt), t, label("invg_g", t, gt));
            both(nf.g(nf.inv_g(t)), t, label("g_invg", t, t));
        } catch (const RangeError&) {
            ++skipped;
        }
    }
    r.add_diagnostic("skipped_out_of_range", static_cast<double>(skipped));
    return r;
}

}  // namespace fracg
