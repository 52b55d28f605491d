#include "fracg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <numbers>
#include <optional>

#include "fracg/error.hpp"
#include "fracg/funcspace.hpp"
#include "fracg/numerics.hpp"

namespace fracg {

namespace {

constexpr double kCutFactor = 1e6;
constexpr int kFarPanels = 16;
constexpr int kFarOrder = 8;
constexpr int kFarDirections2d = 32;

double sgn(double x) { return (x > 0.0) - (x < 0.0); }

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    Neumaier acc;
    for (std::size_t i = 0; i < a.size(); ++i) acc.add(a[i] * b[i]);
    return acc.value();
}

double norm_inf(const std::vector<double>& a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

using Objective = std::function<double(const std::vector<double>&, std::vector<double>&)>;

struct Descent {
    int iterations = 0;
    int line_search_failures = 0;
    std::string message;
};

// Preconditioned nonlinear CG (or steepest descent) with an interpolating step and Armijo
// backtracking. Stops on the gradient test, on a stagnated line search, or (with
// detect_stall) when 100 steps fail to halve the best gradient norm seen so far.
Descent descend(const Objective& f, const std::vector<double>& D, std::vector<double>& x, double& E,
                std::vector<double>& g, const SolveOptions& opts, double stop, int max_iter,
                std::vector<double>& history, bool detect_stall) {
    const std::size_t N = x.size();
    const bool cg = opts.method == SolveMethod::ConjugateGradient;
    Descent out;
    auto precond = [&](const std::vector<double>& v) {
        std::vector<double> z(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) z[i] = v[i] / D[i];
        return z;
    };
    std::vector<double> z = precond(g);
    std::vector<double> d(N);
    for (std::size_t i = 0; i < N; ++i) d[i] = -z[i];
    double gz = dot(g, z);
    double alpha_prev = 1.0;
    bool restarted = true;
    int since_restart = 0;
    double best_before = norm_inf(g), best_window = best_before;
    std::vector<double> xt(N), gt, xn(N), gn;

    int it = 0;
    for (; it < max_iter; ++it) {
        const double gnorm = norm_inf(g);
        if (gnorm <= stop) break;
        best_window = std::min(best_window, gnorm);
        if (detect_stall && it > 0 && it % 100 == 0) {
            if (best_window > 0.5 * best_before) {
                out.message = "gradient stalled";
                break;
            }
            best_before = best_window;
        }
        double slope = dot(g, d);
        if (!(slope < 0.0)) {
            for (std::size_t i = 0; i < N; ++i) d[i] = -z[i];
            slope = -gz;
            restarted = true;
            since_restart = 0;
        }
        const double at = (it == 0) ? 1.0 : alpha_prev;
        for (std::size_t i = 0; i < N; ++i) xt[i] = x[i] + at * d[i];
        const double Et = f(xt, gt);
        const double st = dot(gt, d);
        double a;
        if (std::isfinite(Et) && st > slope)
            a = std::min(at * slope / (slope - st), 16.0 * at);
        else
            a = std::isfinite(Et) ? 2.0 * at : 0.5 * at;
        if (!(a > 0.0)) a = at;

        const double slack = 1e-13 * std::abs(E);
        auto armijo = [&](double alpha, double En) {
            return std::isfinite(En) && En <= E + opts.armijo_c1 * alpha * slope + slack;
        };
        bool accepted = false;
        double En = 0.0;
        for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
            for (std::size_t i = 0; i < N; ++i) xn[i] = x[i] + a * d[i];
            En = f(xn, gn);
            if (armijo(a, En)) {
                accepted = true;
                break;
            }
            if (bt == 0 && a != at && armijo(at, Et) && Et <= En) {
                a = at;
                xn = xt;
                gn = gt;
                En = Et;
                accepted = true;
                break;
            }
            a *= opts.backtrack;
        }
        if (!accepted) {
            ++out.line_search_failures;
            if (restarted) {
                out.message = "line search stagnated";
                break;
            }
            for (std::size_t i = 0; i < N; ++i) d[i] = -z[i];
            restarted = true;
            since_restart = 0;
            continue;
        }
        x.swap(xn);
        E = En;
        history.push_back(E);
        const std::vector<double> z_old = z;
        const double gz_old = gz;
        g.swap(gn);
        z = precond(g);
        gz = dot(g, z);
        ++since_restart;
        double beta = 0.0;
        if (cg && since_restart < static_cast<int>(N) && gz_old > 0.0) {
            Neumaier num;
            for (std::size_t i = 0; i < N; ++i) num.add(g[i] * (z[i] - z_old[i]));
            beta = std::max(0.0, num.value() / gz_old);
        }
        if (beta == 0.0) since_restart = 0;
        for (std::size_t i = 0; i < N; ++i) d[i] = -z[i] + beta * d[i];
        restarted = beta == 0.0;
        alpha_prev = a;
    }
    out.iterations = it;
    return out;
}

// g Lipschitz near 0, so coinciding values leave no gradient floor.
bool nf_is_at_least_quadratic(const NFunction& nf) { return nf.p() >= 2.0; }

// Positions grouped by chaining sorted values with gaps <= tau. A group within tau of an
// anchor (a fixed datum value) is pinned to it.
struct Tying {
    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::optional<double>> pinned;
    bool trivial = true;  // no ties and no pins
};

Tying tie_values(const std::vector<double>& x, double tau, const std::vector<double>& anchors) {
    std::vector<std::size_t> order(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    Tying t;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (k > 0 && x[order[k]] - x[order[k - 1]] <= tau) {
            t.groups.back().push_back(order[k]);
            t.trivial = false;
        } else {
            t.groups.push_back({order[k]});
        }
    }
    for (const auto& grp : t.groups) {
        double m = 0.0;
        for (std::size_t i : grp) m += x[i];
        m /= static_cast<double>(grp.size());
        std::optional<double> pin;
        const auto it = std::lower_bound(anchors.begin(), anchors.end(), m);
        for (auto c = it == anchors.begin() ? it : it - 1; c != anchors.end() && c <= it; ++c)
            if (std::abs(*c - m) <= tau && (!pin || std::abs(*c - m) < std::abs(*pin - m))) pin = *c;
        if (pin) t.trivial = false;
        t.pinned.push_back(pin);
    }
    return t;
}

std::vector<std::pair<Point, double>> far_directions(int dim) {
    std::vector<std::pair<Point, double>> out;
    if (dim == 1) {
        out.push_back({{1.0, 0.0, 0.0}, 1.0});
        out.push_back({{-1.0, 0.0, 0.0}, 1.0});
    } else if (dim == 2) {
        for (int k = 0; k < kFarDirections2d; ++k) {
            const double th = 2.0 * std::numbers::pi * (k + 0.5) / kFarDirections2d;
            out.push_back({{std::cos(th), std::sin(th), 0.0}, 2.0 * std::numbers::pi / kFarDirections2d});
        }
    } else {
        const GaussRule& rule = gauss_legendre(8);
        const int N = 16;
        for (std::size_t a = 0; a < rule.nodes.size(); ++a) {
            const double mu = rule.nodes[a];
            const double sn = std::sqrt(1.0 - mu * mu);
            for (int k = 0; k < N; ++k) {
                const double ph = 2.0 * std::numbers::pi * (k + 0.5) / N;
                out.push_back({{sn * std::cos(ph), sn * std::sin(ph), mu},
                               rule.weights[a] * 2.0 * std::numbers::pi / N});
            }
        }
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// NonlocalProblem

NonlocalProblem::NonlocalProblem(Lattice lattice, std::vector<char> omega_mask, NFunction nf,
                                 Kernel kernel, double s, GridFunction exterior_datum,
                                 double R_ext)
    : lattice_(std::move(lattice)),
      omega_(std::move(omega_mask)),
      nf_(std::move(nf)),
      kernel_(std::move(kernel)),
      s_(s),
      datum_(std::move(exterior_datum)),
      R_ext_(R_ext) {
    if (omega_.size() != lattice_.size())
        throw PreconditionError("NonlocalProblem: omega mask size does not match lattice");
    for (std::size_t i = 0; i < omega_.size(); ++i)
        if (omega_[i]) omega_nodes_.push_back(i);
    validate();
}

NonlocalProblem NonlocalProblem::build(const DomainSpec& dom, NFunction nf, Kernel kernel,
                                       double s, ExteriorModel ext,
                                       const std::function<double(const Point&)>& halo_data) {
    const int n = dom.dim;
    if (n < 1 || n > 3) throw PreconditionError("domain: dimension must be 1, 2 or 3");
    if (!(dom.h > 0.0)) throw PreconditionError("domain: h must be positive");
    Index3 inner{1, 1, 1};
    double diam = 0.0;
    if (dom.shape == DomainSpec::Shape::Box) {
        for (int k = 0; k < n; ++k) {
            if (dom.counts[k] < 1) throw PreconditionError("domain: counts must be positive");
            inner[k] = dom.counts[k];
            diam += std::pow(dom.h * (dom.counts[k] - 1), 2);
        }
        diam = std::sqrt(diam);
    } else {
        if (!(dom.radius >= 0.0)) throw PreconditionError("domain: radius must be >= 0");
        const int half = static_cast<int>(std::floor(dom.radius / dom.h * (1.0 + 1e-12)));
        for (int k = 0; k < n; ++k) inner[k] = 2 * half + 1;
        diam = 2.0 * dom.radius;
    }
    const double R_ext = dom.R_ext.value_or(8.0 * std::max(diam, dom.h));
    if (!(R_ext >= dom.h)) throw PreconditionError("domain: R_ext must be at least h");
    const int pad = static_cast<int>(std::ceil(R_ext / dom.h - 1e-9)) + 1;
    Index3 counts{1, 1, 1};
    Point origin{0.0, 0.0, 0.0};
    for (int k = 0; k < n; ++k) {
        counts[k] = inner[k] + 2 * pad;
        origin[k] = -0.5 * dom.h * (inner[k] - 1) - dom.h * pad;
    }
    Lattice lat(n, dom.h, origin, counts);
    std::vector<char> omega(lat.size(), 0);
    for (std::size_t i = 0; i < lat.size(); ++i) {
        const Index3 idx = lat.multi_index(i);
        bool inside = true;
        for (int k = 0; k < n; ++k)
            if (idx[k] < pad || idx[k] >= pad + inner[k]) inside = false;
        if (inside && dom.shape == DomainSpec::Shape::Ball)
            inside = Ball{{0.0, 0.0, 0.0}, dom.radius}.contains(lat.coord(i), n);
        omega[i] = inside ? 1 : 0;
    }
    std::vector<double> vals(lat.size(), 0.0);
    for (std::size_t i = 0; i < lat.size(); ++i) {
        if (omega[i]) continue;
        const Point x = lat.coord(i);
        vals[i] = halo_data ? halo_data(x) : ext.value(x, n);
    }
    GridFunction datum(lat, std::move(vals), ext);
    return NonlocalProblem(lat, std::move(omega), std::move(nf), std::move(kernel), s,
                           std::move(datum), R_ext);
}

std::vector<char> NonlocalProblem::halo_mask() const {
    std::vector<char> h(omega_.size());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = omega_[i] ? 0 : 1;
    return h;
}

void NonlocalProblem::validate() const {
    if (!(s_ > 0.0 && s_ < 1.0)) throw PreconditionError("problem: s must lie in (0, 1)");
    if (omega_nodes_.empty()) throw PreconditionError("problem: Omega has no nodes");
    if (!(datum_.lattice() == lattice_))
        throw PreconditionError("problem: exterior datum lives on a different lattice");
    if (!(R_ext_ >= lattice_.h()) || !std::isfinite(R_ext_))
        throw PreconditionError("problem: R_ext must be finite and at least h");
    const int m = static_cast<int>(std::floor(R_ext_ / lattice_.h() * (1.0 + 1e-12)));
    for (std::size_t i : omega_nodes_) {
        const Index3 idx = lattice_.multi_index(i);
        for (int k = 0; k < lattice_.dim(); ++k)
            if (idx[k] - m < 0 || idx[k] + m > lattice_.counts()[k] - 1)
                throw PreconditionError("problem: an Omega node lacks a full halo up to R_ext");
    }
    for (std::size_t i = 0; i < lattice_.size(); ++i)
        if (!omega_[i] && !std::isfinite(datum_[i]))
            throw PreconditionError("problem: non-finite exterior datum");
}

GridFunction NonlocalProblem::extend(const std::vector<double>& omega_values) const {
    if (omega_values.size() != omega_nodes_.size())
        throw PreconditionError("extend: value count does not match Omega");
    GridFunction v = datum_;
    for (std::size_t a = 0; a < omega_nodes_.size(); ++a) v.values()[omega_nodes_[a]] = omega_values[a];
    return v;
}

std::vector<double> NonlocalProblem::restrict_to_omega(const GridFunction& v) const {
    if (v.size() != lattice_.size()) throw PreconditionError("restrict: lattice mismatch");
    std::vector<double> out(omega_nodes_.size());
    for (std::size_t a = 0; a < omega_nodes_.size(); ++a) out[a] = v[omega_nodes_[a]];
    return out;
}

void NonlocalProblem::check_admissible(const GridFunction& v) const {
    if (!(v.lattice() == lattice_)) throw PreconditionError("inadmissible: lattice mismatch");
    for (std::size_t i = 0; i < lattice_.size(); ++i)
        if (!omega_[i] && v[i] != datum_[i])
            throw PreconditionError("inadmissible: v differs from the datum off Omega");
}

NonlocalProblem NonlocalProblem::with_affine_data(double c, double b) const {
    ExteriorModel e = datum_.exterior();
    switch (e.kind) {
        case ExteriorKind::Zero:
            if (b != 0.0) e = ExteriorModel::constant(b);
            break;
        case ExteriorKind::Constant: e.M = c * e.M + b; break;
        case ExteriorKind::RadialPower:
            if (b != 0.0) throw PreconditionError("with_affine_data: cannot shift a radial power model");
            e.M *= c;
            break;
        case ExteriorKind::Front:
            e.A *= c;
            e.B = c * e.B + b;
            break;
    }
    std::vector<double> vals = datum_.values();
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = omega_[i] ? 0.0 : c * vals[i] + b;
    return NonlocalProblem(lattice_, omega_, nf_, kernel_, s_, GridFunction(lattice_, vals, e), R_ext_);
}

nlohmann::ordered_json NonlocalProblem::to_json() const {
    nlohmann::ordered_json j;
    j["lattice"] = lattice_.to_json();
    j["omega_nodes"] = omega_nodes_.size();
    j["s"] = s_;
    j["R_ext"] = R_ext_;
    j["nfunction"] = nf_.to_json();
    j["kernel"] = kernel_.to_json();
    j["exterior"] = datum_.exterior().to_json();
    return j;
}

// ---------------------------------------------------------------------------
// EnergyModel

EnergyModel::EnergyModel(const NonlocalProblem& prob) : nf_(prob.nf()) {
    const Lattice& lat = prob.lattice();
    const int n = lat.dim();
    const double s = prob.s();
    const double hn = lat.cell_volume();
    const double R = prob.R_ext();
    power_ = nf_.family() == Family::Power;
    p_ = nf_.p();
    nodes_ = prob.omega_nodes();
    const std::size_t N = nodes_.size();
    std::vector<std::size_t> pos(lat.size(), std::numeric_limits<std::size_t>::max());
    for (std::size_t a = 0; a < N; ++a) pos[nodes_[a]] = a;

    omega_links_.assign(N, {});
    halo_links_.assign(N, {});
    far_samples_.assign(N, {});
    dmin_ = std::numeric_limits<double>::infinity();
    dmax_ = -std::numeric_limits<double>::infinity();
    auto see = [this](double v) {
        dmin_ = std::min(dmin_, v);
        dmax_ = std::max(dmax_, v);
    };

    for (std::size_t a = 0; a < N; ++a) {
        const Point xa = lat.coord(nodes_[a]);
        for (std::size_t j : lat.nodes_in(Ball{xa, R})) {
            if (j == nodes_[a]) continue;
            const Point xj = lat.coord(j);
            const double d = distance(xa, xj, n);
            const double w = prob.kernel()(xa, xj, n) * hn * hn;
            const double ids = std::pow(d, -s);
            if (prob.in_omega(j)) {
                if (pos[j] > a) omega_links_[a].push_back({pos[j], w, ids, 0.0});
            } else {
                const double val = prob.exterior_datum()[j];
                halo_links_[a].push_back({0, w, ids, val});
                see(val);
            }
        }
    }

    const ExteriorModel& ext = prob.exterior_datum().exterior();
    const double a_far = prob.kernel().far_coefficient();
    if (ext.is_constant()) {
        const double M = ext.constant_value();
        const double weight = hn * a_far * sphere_measure(n) / s;
        for (std::size_t a = 0; a < N; ++a) far_samples_[a].push_back({weight, M, std::pow(R, -s), true});
        see(M);
    } else {
        const GaussRule& rule = gauss_legendre(kFarOrder);
        const double u0 = std::log(R);
        const double u1 = std::log(R * kCutFactor);
        const double du = (u1 - u0) / kFarPanels;
        const auto dirs = far_directions(n);
        for (std::size_t a = 0; a < N; ++a) {
            const Point xa = lat.coord(nodes_[a]);
            auto at = [&](const Point& d, double rho) {
                Point y = xa;
                for (int k = 0; k < n; ++k) y[k] += rho * d[k];
                return prob.exterior_datum().exterior_value(y);
            };
            for (const auto& [d, dw] : dirs) {
                for (int pnl = 0; pnl < kFarPanels; ++pnl) {
                    const double mid = u0 + du * (pnl + 0.5);
                    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
                        const double u = mid + 0.5 * du * rule.nodes[k];
                        const double rho = std::exp(u);
                        const double val = at(d, rho);
                        far_samples_[a].push_back(
                            {dw * 0.5 * du * rule.weights[k] * a_far * hn, val, std::pow(rho, -s), false});
                        see(val);
                    }
                }
                const double rc = R * kCutFactor;
                const double val = at(d, rc);
                far_samples_[a].push_back({dw * a_far * hn / s, val, std::pow(rc, -s), true});
                see(val);
            }
        }
    }

    if (!power_) {
        // Phi(tau) = int_0^1 2 G(tau v^2) / v dv on two 16-point panels.
        const GaussRule& rule = gauss_legendre(16);
        for (int pnl = 0; pnl < 2; ++pnl) {
            for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
                phi_nodes_.push_back(0.25 + 0.5 * pnl + 0.25 * rule.nodes[k]);
                phi_weights_.push_back(0.25 * rule.weights[k]);
            }
        }
    }

    osc_ = (dmax_ > dmin_) ? dmax_ - dmin_ : 0.0;
    diag_.assign(N, 0.0);
    std::vector<double> scale_rows(N, 0.0);
    for (std::size_t a = 0; a < N; ++a) {
        for (const Link& l : omega_links_[a]) {
            diag_[a] += 2.0 * l.w * l.ids * l.ids;
            diag_[l.other] += 2.0 * l.w * l.ids * l.ids;
            if (osc_ > 0.0) {
                const double c = 2.0 * l.w * l.ids * nf_.g(osc_ * l.ids);
                scale_rows[a] += c;
                scale_rows[l.other] += c;
            }
        }
        for (const Link& l : halo_links_[a]) {
            diag_[a] += 2.0 * l.w * l.ids * l.ids;
            if (osc_ > 0.0) scale_rows[a] += 2.0 * l.w * l.ids * nf_.g(osc_ * l.ids);
        }
        for (const FarSample& f : far_samples_[a]) {
            diag_[a] += 2.0 * f.weight * f.ids * f.ids * (f.frozen ? 0.5 : 1.0);
            if (osc_ > 0.0) {
                const double tau = osc_ * f.ids;
                scale_rows[a] += 2.0 * f.weight * f.ids * (f.frozen ? dPhi(tau) : nf_.g(tau));
            }
        }
        if (!(diag_[a] > 0.0)) diag_[a] = 1.0;
    }
    scale_ = norm_inf(scale_rows);
}

double EnergyModel::Phi(double tau) const {
    if (tau == 0.0) return 0.0;
    if (power_) return std::pow(tau, p_) / (p_ * p_);
    double acc = 0.0;
    for (std::size_t k = 0; k < phi_nodes_.size(); ++k) {
        const double v = phi_nodes_[k];
        acc += phi_weights_[k] * 2.0 * nf_.G(tau * v * v) / v;
    }
    return acc;
}

double EnergyModel::dPhi(double tau) const {
    if (tau == 0.0) return 0.0;
    if (power_) return std::pow(tau, p_ - 1.0) / p_;
    double acc = 0.0;
    for (std::size_t k = 0; k < phi_nodes_.size(); ++k) {
        const double v = phi_nodes_[k];
        acc += phi_weights_[k] * 2.0 * nf_.g(tau * v * v) * v;
    }
    return acc;
}

double EnergyModel::far_value(std::size_t a, double v) const {
    Neumaier acc;
    for (const FarSample& f : far_samples_[a]) {
        const double tau = std::abs(v - f.value) * f.ids;
        acc.add(f.weight * (f.frozen ? Phi(tau) : nf_.G(tau)));
    }
    return acc.value();
}

double EnergyModel::far_derivative(std::size_t a, double v) const {
    Neumaier acc;
    for (const FarSample& f : far_samples_[a]) {
        const double diff = v - f.value;
        const double tau = std::abs(diff) * f.ids;
        acc.add(f.weight * (f.frozen ? dPhi(tau) : nf_.g(tau)) * sgn(diff) * f.ids);
    }
    return acc.value();
}

double EnergyModel::energy_gradient(const std::vector<double>& v, std::vector<double>& grad) const {
    const std::size_t N = nodes_.size();
    if (v.size() != N) throw PreconditionError("energy: value count does not match Omega");
    std::vector<Neumaier> gacc(N);
    std::vector<double> rows(N, 0.0);
    for (std::size_t a = 0; a < N; ++a) {
        Neumaier e;
        for (const Link& l : omega_links_[a]) {
            const double diff = v[a] - v[l.other];
            const double tau = std::abs(diff) * l.ids;
            e.add(2.0 * l.w * nf_.G(tau));
            const double gv = 2.0 * l.w * nf_.g(tau) * sgn(diff) * l.ids;
            gacc[a].add(gv);
            gacc[l.other].add(-gv);
        }
        for (const Link& l : halo_links_[a]) {
            const double diff = v[a] - l.value;
            const double tau = std::abs(diff) * l.ids;
            e.add(2.0 * l.w * nf_.G(tau));
            gacc[a].add(2.0 * l.w * nf_.g(tau) * sgn(diff) * l.ids);
        }
        e.add(2.0 * far_value(a, v[a]));
        gacc[a].add(2.0 * far_derivative(a, v[a]));
        rows[a] = e.value();
    }
    grad.resize(N);
    for (std::size_t a = 0; a < N; ++a) grad[a] = gacc[a].value();
    return pairwise_sum(rows);
}

double EnergyModel::energy(const std::vector<double>& v) const {
    std::vector<double> g;
    return energy_gradient(v, g);
}

std::vector<double> EnergyModel::gradient(const std::vector<double>& v) const {
    std::vector<double> g;
    energy_gradient(v, g);
    return g;
}

double energy(const NonlocalProblem& prob, const GridFunction& v) {
    prob.check_admissible(v);
    return EnergyModel(prob).energy(prob.restrict_to_omega(v));
}

GridFunction gradient(const NonlocalProblem& prob, const GridFunction& v) {
    prob.check_admissible(v);
    const auto g = EnergyModel(prob).gradient(prob.restrict_to_omega(v));
    GridFunction out(prob.lattice(), std::vector<double>(prob.lattice().size(), 0.0));
    for (std::size_t a = 0; a < g.size(); ++a) out.values()[prob.omega_nodes()[a]] = g[a];
    return out;
}

// ---------------------------------------------------------------------------
// Weak form, by direct enumeration of ordered pairs.

namespace {

// Calls visit(x, y, F(x, y)) for every ordered lattice pair in the interaction set.
template <class Visit>
void sweep_pairs(const NonlocalProblem& prob, const GridFunction& v, Visit&& visit) {
    const Lattice& lat = prob.lattice();
    const int n = lat.dim();
    const double s = prob.s();
    const double hn = lat.cell_volume();
    const NFunction& nf = prob.nf();
    auto F = [&](std::size_t x, std::size_t y) {
        const Point px = lat.coord(x), py = lat.coord(y);
        const double d = distance(px, py, n);
        const double diff = v[x] - v[y];
        return nf.g(std::abs(diff) / std::pow(d, s)) * sgn(diff) * prob.kernel()(px, py, n) *
               std::pow(d, -s) * hn * hn;
    };
    for (std::size_t x : prob.omega_nodes()) {
        for (std::size_t y : lat.nodes_in(Ball{lat.coord(x), prob.R_ext()})) {
            if (y == x) continue;
            visit(x, y, F(x, y));
            if (!prob.in_omega(y)) visit(y, x, F(y, x));
        }
    }
}

}  // namespace

double weak_form(const NonlocalProblem& prob, const GridFunction& v, const std::vector<double>& eta) {
    prob.check_admissible(v);
    const auto& nodes = prob.omega_nodes();
    if (eta.size() != nodes.size()) throw PreconditionError("weak_form: eta must live on Omega");
    std::vector<double> eta_full(prob.lattice().size(), 0.0);
    for (std::size_t a = 0; a < nodes.size(); ++a) eta_full[nodes[a]] = eta[a];
    Neumaier acc;
    sweep_pairs(prob, v, [&](std::size_t x, std::size_t y, double F) {
        acc.add(F * (eta_full[x] - eta_full[y]));
    });
    EnergyModel em(prob);
    for (std::size_t a = 0; a < nodes.size(); ++a)
        acc.add(2.0 * em.far_derivative(a, v[nodes[a]]) * eta[a]);
    return acc.value();
}

std::vector<double> weak_residual_vector(const NonlocalProblem& prob, const GridFunction& v) {
    prob.check_admissible(v);
    const auto& nodes = prob.omega_nodes();
    std::vector<std::size_t> pos(prob.lattice().size(), std::numeric_limits<std::size_t>::max());
    for (std::size_t a = 0; a < nodes.size(); ++a) pos[nodes[a]] = a;
    std::vector<Neumaier> acc(nodes.size());
    sweep_pairs(prob, v, [&](std::size_t x, std::size_t y, double F) {
        if (prob.in_omega(x)) acc[pos[x]].add(F);
        if (prob.in_omega(y)) acc[pos[y]].add(-F);
    });
    EnergyModel em(prob);
    std::vector<double> out(nodes.size());
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        acc[a].add(2.0 * em.far_derivative(a, v[nodes[a]]));
        out[a] = acc[a].value();
    }
    return out;
}

double weak_residual(const NonlocalProblem& prob, const GridFunction& v) {
    return norm_inf(weak_residual_vector(prob, v));
}

// ---------------------------------------------------------------------------
// Convexity

nlohmann::ordered_json ConvexityReport::to_json() const {
    nlohmann::ordered_json j;
    j["thetas"] = thetas;
    j["defects"] = defects;
    j["min_defect"] = min_defect;
    j["convex"] = convex;
    j["strict"] = strict;
    j["identical"] = identical;
    j["zero_data_energy_of_difference"] = zero_data_energy_of_difference;
    return j;
}

ConvexityReport convexity_probe(const NonlocalProblem& prob, const GridFunction& v1,
                                const GridFunction& v2, const std::vector<double>& thetas,
                                double tol) {
    prob.check_admissible(v1);
    prob.check_admissible(v2);
    EnergyModel em(prob);
    const auto a = prob.restrict_to_omega(v1);
    const auto b = prob.restrict_to_omega(v2);
    const double E1 = em.energy(a), E2 = em.energy(b);
    ConvexityReport rep;
    rep.identical = (a == b);
    rep.thetas = thetas;
    rep.min_defect = std::numeric_limits<double>::infinity();
    const double scale = std::max({E1, E2, 1e-300});
    for (double th : thetas) {
        if (!(th >= 0.0 && th <= 1.0)) throw DomainError("convexity_probe: theta must lie in [0, 1]");
        std::vector<double> m(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) m[i] = th * a[i] + (1.0 - th) * b[i];
        const double defect = th * E1 + (1.0 - th) * E2 - em.energy(m);
        rep.defects.push_back(defect);
        rep.min_defect = std::min(rep.min_defect, defect);
        if (defect < -tol * scale) rep.convex = false;
        if (!rep.identical && th > 0.0 && th < 1.0 && !(defect > 0.0)) rep.strict = false;
    }
    if (rep.identical) rep.strict = false;
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    const NonlocalProblem zero = prob.with_affine_data(0.0, 0.0);
    rep.zero_data_energy_of_difference = EnergyModel(zero).energy(diff);
    return rep;
}

// ---------------------------------------------------------------------------
// Solve

GridFunction initial_guess(const NonlocalProblem& prob, InitialGuess kind) {
    const auto& nodes = prob.omega_nodes();
    std::vector<double> vals(nodes.size(), 0.0);
    if (kind == InitialGuess::HaloHarmonic) {
        const Lattice& lat = prob.lattice();
        const int n = lat.dim();
        Neumaier mean;
        std::size_t count = 0;
        for (std::size_t i = 0; i < lat.size(); ++i)
            if (!prob.in_omega(i)) {
                mean.add(prob.exterior_datum()[i]);
                ++count;
            }
        const double fallback = count ? mean.value() / static_cast<double>(count) : 0.0;
        for (std::size_t a = 0; a < nodes.size(); ++a) {
            const Point xa = lat.coord(nodes[a]);
            Neumaier num, den;
            for (std::size_t j : lat.nodes_in(Ball{xa, prob.R_ext()})) {
                if (j == nodes[a] || prob.in_omega(j)) continue;
                const double d = distance(xa, lat.coord(j), n);
                const double w = prob.kernel()(xa, lat.coord(j), n) * std::pow(d, -2.0 * prob.s());
                num.add(w * prob.exterior_datum()[j]);
                den.add(w);
            }
            vals[a] = den.value() > 0.0 ? num.value() / den.value() : fallback;
        }
    }
    return prob.extend(vals);
}

nlohmann::ordered_json SolveReport::to_json(bool with_history) const {
    nlohmann::ordered_json j;
    j["converged"] = converged;
    j["method"] = method;
    j["iterations"] = iterations;
    j["line_search_failures"] = line_search_failures;
    j["final_energy"] = json_number(final_energy);
    j["residual_norm"] = json_number(residual_norm);
    j["relative_residual"] = json_number(relative_residual);
    j["gradient_norm"] = json_number(gradient_norm);
    j["gradient_scale"] = json_number(gradient_scale);
    j["tol"] = tol;
    j["message"] = message;
    if (with_history) j["energy_history"] = energy_history;
    return j;
}

SolveReport solve(const NonlocalProblem& prob, const SolveOptions& opts) {
    prob.validate();
    if (!(opts.tol > 0.0)) throw PreconditionError("solve: tol must be positive");
    EnergyModel em(prob);
    const std::size_t N = em.size();
    SolveReport rep;
    rep.tol = opts.tol;

    auto finish = [&](const std::vector<double>& x) {
        rep.minimizer = prob.extend(x);
        std::vector<double> g;
        rep.final_energy = em.energy_gradient(x, g);
        rep.gradient_norm = norm_inf(g);
        rep.residual_norm = weak_residual(prob, rep.minimizer);
        if (!(rep.gradient_scale > 0.0)) rep.gradient_scale = std::max(rep.gradient_norm, 1e-300);
        rep.relative_residual = rep.residual_norm / rep.gradient_scale;
        return rep;
    };

    rep.gradient_scale = em.gradient_scale();
    if (em.data_constant()) {
        rep.method = "constant_data";
        rep.converged = true;
        rep.message = "data constant; minimizer equals the datum";
        std::vector<double> x(N, em.data_min());
        rep.energy_history.push_back(em.energy(x));
        finish(x);
        rep.relative_residual = 0.0;
        return rep;
    }

    std::vector<double> x = prob.restrict_to_omega(initial_guess(prob, opts.initial));
    std::vector<double> g;
    double E = em.energy_gradient(x, g);
    rep.energy_history.push_back(E);
    const double stop = opts.tol * rep.gradient_scale;

    if (N == 1) {
        rep.method = "scalar_bisection";
        double lo = em.data_min(), hi = em.data_max();
        for (int it = 0; it < 400; ++it) {
            const double mid = 0.5 * (lo + hi);
            std::vector<double> xm{mid};
            const double d = em.gradient(xm)[0];
            rep.iterations = it + 1;
            x[0] = mid;
            if (std::abs(d) <= stop) break;
            if (d > 0.0)
                hi = mid;
            else
                lo = mid;
            if (!(hi > lo) || hi - lo <= 1e-16 * std::max(std::abs(lo), std::abs(hi))) break;
        }
        E = em.energy(x);
        rep.energy_history.push_back(E);
        finish(x);
        rep.converged = rep.gradient_norm <= stop;
        rep.message = rep.converged ? "converged" : "bisection interval exhausted";
        return rep;
    }

    const bool cg = opts.method == SolveMethod::ConjugateGradient;
    rep.method = cg ? "preconditioned_cg" : "steepest_descent";
    const Objective full = [&em](const std::vector<double>& v, std::vector<double>& grad) {
        return em.energy_gradient(v, grad);
    };
    const bool may_tie = em.size() > 1 && !(nf_is_at_least_quadratic(prob.nf()));
    const Descent first =
        descend(full, em.diagonal(), x, E, g, opts, stop, opts.max_iter, rep.energy_history, may_tie);
    rep.iterations = first.iterations;
    rep.line_search_failures = first.line_search_failures;
    rep.message = first.message;

    // Below p = 2 the gradient is only Hoelder near v_a = v_b, so values that coincide at the
    // minimizer leave a rounding-level gap and a gradient floor of order (eps |v|)^{p-1}.
    // Retry with near-equal values tied together, then check the full gradient.
    if (may_tie && norm_inf(g) > stop && rep.iterations < opts.max_iter) {
        std::vector<double> anchors;
        const auto halo = prob.halo_mask();
        for (std::size_t i = 0; i < halo.size(); ++i)
            if (halo[i]) anchors.push_back(prob.exterior_datum()[i]);
        std::sort(anchors.begin(), anchors.end());
        anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
        for (double tau_rel : {1e-12, 1e-10, 1e-8, 1e-6}) {
            const Tying tie = tie_values(x, tau_rel * em.data_oscillation(), anchors);
            if (tie.trivial) continue;
            std::vector<std::size_t> free_groups;
            std::vector<double> xx(N), gg;
            for (std::size_t c = 0; c < tie.groups.size(); ++c) {
                if (tie.pinned[c])
                    for (std::size_t i : tie.groups[c]) xx[i] = *tie.pinned[c];
                else
                    free_groups.push_back(c);
            }
            const std::size_t M = free_groups.size();
            std::vector<double> y(M, 0.0), Dr(M, 0.0);
            for (std::size_t k = 0; k < M; ++k) {
                const auto& grp = tie.groups[free_groups[k]];
                for (std::size_t i : grp) {
                    y[k] += x[i];
                    Dr[k] += em.diagonal()[i];
                }
                y[k] /= static_cast<double>(grp.size());
            }
            auto expand = [&](const std::vector<double>& yy) {
                for (std::size_t k = 0; k < M; ++k)
                    for (std::size_t i : tie.groups[free_groups[k]]) xx[i] = yy[k];
            };
            const Objective reduced = [&](const std::vector<double>& yy, std::vector<double>& gy) {
                expand(yy);
                const double Ev = em.energy_gradient(xx, gg);
                gy.assign(M, 0.0);
                for (std::size_t k = 0; k < M; ++k)
                    for (std::size_t i : tie.groups[free_groups[k]]) gy[k] += gg[i];
                return Ev;
            };
            std::vector<double> gy;
            double Ey = reduced(y, gy);
            std::vector<double> scratch_history;
            const Descent second = descend(reduced, Dr, y, Ey, gy, opts, stop, opts.max_iter - rep.iterations,
                                           scratch_history, true);
            rep.iterations += second.iterations;
            rep.line_search_failures += second.line_search_failures;
            expand(y);
            const double Ef = em.energy_gradient(xx, gg);
            if (norm_inf(gg) <= stop && Ef <= E + 1e-14 * std::abs(E)) {
                x = xx;
                g = gg;
                E = Ef;
                rep.energy_history.push_back(E);
                rep.message = "converged with " + std::to_string(N - M) + " tied values";
                break;
            }
            if (rep.iterations >= opts.max_iter) break;
        }
    }
    if (norm_inf(g) > stop && rep.iterations < opts.max_iter && may_tie) {
        const Descent rest = descend(full, em.diagonal(), x, E, g, opts, stop, opts.max_iter - rep.iterations,
                                     rep.energy_history, false);
        rep.iterations += rest.iterations;
        rep.line_search_failures += rest.line_search_failures;
        rep.message = rest.message;
    }
    finish(x);
    rep.converged = rep.gradient_norm <= stop;
    if (rep.converged && rep.message.empty()) rep.message = "converged";
    if (!rep.converged && (rep.message.empty() || rep.message.rfind("converged", 0) == 0))
        rep.message = "iteration limit reached";
    return rep;
}

}  // namespace fracg
