#include "fracg/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fracg/error.hpp"

namespace fracg {

double distance(const Point& a, const Point& b, int dim) {
    double acc = 0.0;
    for (int k = 0; k < dim; ++k) {
        const double d = a[k] - b[k];
        acc += d * d;
    }
    return std::sqrt(acc);
}

double norm(const Point& a, int dim) { return distance(a, Point{0.0, 0.0, 0.0}, dim); }

bool Ball::contains(const Point& x, int dim) const {
    return distance(x, center, dim) <= radius * (1.0 + 1e-12);
}

Lattice::Lattice(int dim, double h, Point origin, Index3 counts)
    : dim_(dim), h_(h), origin_(origin), counts_(counts) {
    if (dim < 1 || dim > 3) throw DomainError("Lattice: dimension must be 1, 2 or 3");
    if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("Lattice: spacing must be positive");
    size_ = 1;
    for (int k = 0; k < 3; ++k) {
        if (k >= dim) {
            counts_[k] = 1;
            origin_[k] = 0.0;
        }
        if (counts_[k] < 1) throw DomainError("Lattice: counts must be positive");
        size_ *= static_cast<std::size_t>(counts_[k]);
    }
}

Lattice Lattice::centered(int dim, double h, int half) {
    if (half < 0) throw DomainError("Lattice::centered: negative half-width");
    Index3 counts{1, 1, 1};
    Point origin{0.0, 0.0, 0.0};
    for (int k = 0; k < dim; ++k) {
        counts[k] = 2 * half + 1;
        origin[k] = -h * half;
    }
    return Lattice(dim, h, origin, counts);
}

double Lattice::cell_volume() const { return std::pow(h_, dim_); }

Index3 Lattice::multi_index(std::size_t i) const {
    Index3 idx{0, 0, 0};
    idx[0] = static_cast<int>(i % counts_[0]);
    i /= counts_[0];
    idx[1] = static_cast<int>(i % counts_[1]);
    idx[2] = static_cast<int>(i / counts_[1]);
    return idx;
}

std::size_t Lattice::flat(const Index3& idx) const {
    return static_cast<std::size_t>(idx[0]) +
           static_cast<std::size_t>(counts_[0]) *
               (static_cast<std::size_t>(idx[1]) +
                static_cast<std::size_t>(counts_[1]) * static_cast<std::size_t>(idx[2]));
}

Point Lattice::coord(std::size_t i) const {
    const Index3 idx = multi_index(i);
    Point x{0.0, 0.0, 0.0};
    for (int k = 0; k < dim_; ++k) x[k] = origin_[k] + h_ * idx[k];
    return x;
}

std::vector<std::size_t> Lattice::nodes_in(const Ball& b) const {
    Index3 lo{0, 0, 0}, hi{0, 0, 0};
    for (int k = 0; k < 3; ++k) {
        if (k >= dim_) continue;
        const double a = (b.center[k] - b.radius - origin_[k]) / h_;
        const double c = (b.center[k] + b.radius - origin_[k]) / h_;
        lo[k] = std::max(0, static_cast<int>(std::floor(a)) - 1);
        hi[k] = std::min(counts_[k] - 1, static_cast<int>(std::ceil(c)) + 1);
    }
    std::vector<std::size_t> out;
    if (hi[0] < lo[0] || hi[1] < lo[1] || hi[2] < lo[2]) return out;
    for (int k2 = lo[2]; k2 <= hi[2]; ++k2)
        for (int k1 = lo[1]; k1 <= hi[1]; ++k1)
            for (int k0 = lo[0]; k0 <= hi[0]; ++k0) {
                const std::size_t i = flat({k0, k1, k2});
                if (b.contains(coord(i), dim_)) out.push_back(i);
            }
    return out;
}

Point Lattice::cover_lo() const {
    Point p{0.0, 0.0, 0.0};
    for (int k = 0; k < dim_; ++k) p[k] = origin_[k] - 0.5 * h_;
    return p;
}

Point Lattice::cover_hi() const {
    Point p{0.0, 0.0, 0.0};
    for (int k = 0; k < dim_; ++k) p[k] = origin_[k] + h_ * (counts_[k] - 1) + 0.5 * h_;
    return p;
}

bool Lattice::in_cover(const Point& x) const {
    const Point lo = cover_lo(), hi = cover_hi();
    for (int k = 0; k < dim_; ++k)
        if (x[k] < lo[k] || x[k] > hi[k]) return false;
    return true;
}

double Lattice::exit_distance(const Point& x, const Point& dir) const {
    const Point lo = cover_lo(), hi = cover_hi();
    double t = std::numeric_limits<double>::infinity();
    for (int k = 0; k < dim_; ++k) {
        if (dir[k] > 0.0)
            t = std::min(t, (hi[k] - x[k]) / dir[k]);
        else if (dir[k] < 0.0)
            t = std::min(t, (lo[k] - x[k]) / dir[k]);
    }
    return std::max(0.0, t);
}

bool Lattice::operator==(const Lattice& o) const {
    return dim_ == o.dim_ && h_ == o.h_ && origin_ == o.origin_ && counts_ == o.counts_;
}

nlohmann::ordered_json Lattice::to_json() const {
    nlohmann::ordered_json j;
    j["dim"] = dim_;
    j["h"] = h_;
    j["origin"] = point_to_json(origin_, dim_);
    auto c = nlohmann::ordered_json::array();
    for (int k = 0; k < dim_; ++k) c.push_back(counts_[k]);
    j["counts"] = c;
    return j;
}

// ---------------------------------------------------------------------------

ExteriorModel ExteriorModel::constant(double m) {
    ExteriorModel e;
    e.kind = ExteriorKind::Constant;
    e.M = m;
    return e;
}

ExteriorModel ExteriorModel::radial_power(double m, double gamma, Point center) {
    ExteriorModel e;
    e.kind = ExteriorKind::RadialPower;
    e.M = m;
    e.gamma = gamma;
    e.center = center;
    return e;
}

ExteriorModel ExteriorModel::front(double a, double b, double width, Point direction,
                                   Point center) {
    if (!(width > 0.0)) throw DomainError("front exterior: width must be positive");
    ExteriorModel e;
    e.kind = ExteriorKind::Front;
    e.A = a;
    e.B = b;
    e.width = width;
    const double n = norm(direction, 3);
    if (!(n > 0.0)) throw DomainError("front exterior: zero direction");
    for (int k = 0; k < 3; ++k) direction[k] /= n;
    e.direction = direction;
    e.center = center;
    return e;
}

double ExteriorModel::value(const Point& y, int dim) const {
    switch (kind) {
        case ExteriorKind::Zero: return 0.0;
        case ExteriorKind::Constant: return M;
        case ExteriorKind::RadialPower: return M * std::pow(distance(y, center, dim), gamma);
        case ExteriorKind::Front: {
            double proj = 0.0;
            for (int k = 0; k < dim; ++k) proj += (y[k] - center[k]) * direction[k];
            return B + A * std::tanh(proj / width);
        }
    }
    return 0.0;
}

Point point_from_json(const nlohmann::json& j, int dim) {
    Point p{0.0, 0.0, 0.0};
    if (j.is_number()) {
        p[0] = j.get<double>();
        return p;
    }
    if (!j.is_array() || static_cast<int>(j.size()) != dim)
        throw ConfigError("point: expected an array of length " + std::to_string(dim));
    for (int k = 0; k < dim; ++k) p[k] = j[k].get<double>();
    return p;
}

nlohmann::ordered_json point_to_json(const Point& p, int dim) {
    auto a = nlohmann::ordered_json::array();
    for (int k = 0; k < dim; ++k) a.push_back(p[k]);
    return a;
}

ExteriorModel ExteriorModel::from_json(const nlohmann::json& j, int dim) {
    const std::string kind = j.value("kind", std::string("zero"));
    Point center{0.0, 0.0, 0.0};
    if (j.contains("center")) center = point_from_json(j.at("center"), dim);
    if (kind == "zero") return zero();
    if (kind == "constant") return constant(j.at("M").get<double>());
    if (kind == "radial_power")
        return radial_power(j.at("M").get<double>(), j.at("gamma").get<double>(), center);
    if (kind == "front") {
        Point dir{1.0, 0.0, 0.0};
        if (j.contains("direction")) dir = point_from_json(j.at("direction"), dim);
        return front(j.at("A").get<double>(), j.value("B", 0.0), j.value("width", 1.0), dir,
                     center);
    }
    throw ConfigError("exterior: unknown kind '" + kind + "'");
}

nlohmann::ordered_json ExteriorModel::to_json() const {
    nlohmann::ordered_json j;
    switch (kind) {
        case ExteriorKind::Zero: j["kind"] = "zero"; break;
        case ExteriorKind::Constant:
            j["kind"] = "constant";
            j["M"] = M;
            break;
        case ExteriorKind::RadialPower:
            j["kind"] = "radial_power";
            j["M"] = M;
            j["gamma"] = gamma;
            j["center"] = point_to_json(center, 3);
            break;
        case ExteriorKind::Front:
            j["kind"] = "front";
            j["A"] = A;
            j["B"] = B;
            j["width"] = width;
            j["direction"] = point_to_json(direction, 3);
            j["center"] = point_to_json(center, 3);
            break;
    }
    return j;
}

// ---------------------------------------------------------------------------

GridFunction::GridFunction(Lattice lat, std::vector<double> values, ExteriorModel ext)
    : lat_(std::move(lat)), values_(std::move(values)), ext_(ext) {
    if (values_.size() != lat_.size())
        throw DomainError("GridFunction: value count does not match lattice size");
}

GridFunction GridFunction::sample(const Lattice& lat,
                                  const std::function<double(const Point&)>& f,
                                  ExteriorModel ext) {
    std::vector<double> v(lat.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(lat.coord(i));
    return GridFunction(lat, std::move(v), ext);
}

double GridFunction::exterior_value(const Point& y) const {
    const double v = ext_.value(y, lat_.dim());
    return ext_map_ ? ext_map_(v) : v;
}

GridFunction GridFunction::map(const std::function<double(double)>& fn) const {
    GridFunction out = *this;
    for (double& v : out.values_) v = fn(v);
    if (ext_map_) {
        auto inner = ext_map_;
        out.ext_map_ = [inner, fn](double v) { return fn(inner(v)); };
    } else {
        out.ext_map_ = fn;
    }
    return out;
}

GridFunction GridFunction::scaled(double c) const {
    return map([c](double v) { return c * v; });
}

double GridFunction::collar_mismatch() const {
    double worst = 0.0;
    const int n = lat_.dim();
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const Index3 idx = lat_.multi_index(i);
        bool outer = false;
        for (int k = 0; k < n; ++k)
            if (idx[k] == 0 || idx[k] == lat_.counts()[k] - 1) outer = true;
        if (outer) worst = std::max(worst, std::abs(values_[i] - exterior_value(lat_.coord(i))));
    }
    return worst;
}

bool GridFunction::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace fracg
