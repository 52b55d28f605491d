#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace fracg {

using Point = std::array<double, 3>;
using Index3 = std::array<int, 3>;

double distance(const Point& a, const Point& b, int dim);
double norm(const Point& a, int dim);

struct Ball {
    Point center{0.0, 0.0, 0.0};
    double radius = 1.0;

    // Closed ball with a 1e-12 relative guard so node-centre inclusion is reproducible.
    bool contains(const Point& x, int dim) const;
};

// Regular grid origin + h * multi-index, 0 <= index_k < counts_k, in dimension 1..3.
class Lattice {
public:
    Lattice() = default;
    Lattice(int dim, double h, Point origin, Index3 counts);

    // 2 * half + 1 nodes per axis with a node at the origin.
    static Lattice centered(int dim, double h, int half);

    int dim() const { return dim_; }
    double h() const { return h_; }
    const Point& origin() const { return origin_; }
    const Index3& counts() const { return counts_; }
    std::size_t size() const { return size_; }
    double cell_volume() const;  // h^n

    Point coord(std::size_t i) const;
    Index3 multi_index(std::size_t i) const;
    std::size_t flat(const Index3& idx) const;

    // Node indices whose coordinates lie in the closed ball, in increasing order.
    std::vector<std::size_t> nodes_in(const Ball& b) const;

    // Bounding box of the union of node cells [x_i - h/2, x_i + h/2]^n.
    Point cover_lo() const;
    Point cover_hi() const;
    bool in_cover(const Point& x) const;
    // Distance from x (inside the cover) along the unit vector dir to the cover boundary.
    double exit_distance(const Point& x, const Point& dir) const;

    bool operator==(const Lattice& o) const;

    nlohmann::ordered_json to_json() const;

private:
    int dim_ = 1;
    double h_ = 1.0;
    Point origin_{0.0, 0.0, 0.0};
    Index3 counts_{1, 1, 1};
    std::size_t size_ = 1;
};

enum class ExteriorKind { Zero, Constant, RadialPower, Front };

// Description of a function outside the lattice's cell cover.
//   Zero:        0
//   Constant:    M
//   RadialPower: M |y - center|^gamma
//   Front:       B + A tanh(((y - center) . direction) / width)
struct ExteriorModel {
    ExteriorKind kind = ExteriorKind::Zero;
    double M = 0.0;
    double gamma = 0.0;
    double A = 0.0;
    double B = 0.0;
    double width = 1.0;
    Point center{0.0, 0.0, 0.0};
    Point direction{1.0, 0.0, 0.0};

    static ExteriorModel zero() { return {}; }
    static ExteriorModel constant(double m);
    static ExteriorModel radial_power(double m, double gamma, Point center = {0.0, 0.0, 0.0});
    static ExteriorModel front(double a, double b, double width, Point direction,
                               Point center = {0.0, 0.0, 0.0});

    double value(const Point& y, int dim) const;
    bool is_constant() const { return kind == ExteriorKind::Zero || kind == ExteriorKind::Constant; }
    double constant_value() const { return kind == ExteriorKind::Constant ? M : 0.0; }

    static ExteriorModel from_json(const nlohmann::json& j, int dim);
    nlohmann::ordered_json to_json() const;
};

// Node values on a lattice plus the exterior description used by far-field integrals.
// `map`, when set, is applied to exterior values as well (used for u_-, w_+ and scaling).
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(Lattice lat, std::vector<double> values, ExteriorModel ext = {});

    // Samples f at every node; exterior from `ext`.
    static GridFunction sample(const Lattice& lat, const std::function<double(const Point&)>& f,
                               ExteriorModel ext = {});

    const Lattice& lattice() const { return lat_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::size_t size() const { return values_.size(); }
    const ExteriorModel& exterior() const { return ext_; }
    void set_exterior(ExteriorModel e) { ext_ = e; }

    // Value of the function at a point outside the cover.
    double exterior_value(const Point& y) const;

    // Pointwise transform applied to node values and, lazily, to exterior values.
    GridFunction map(const std::function<double(double)>& fn) const;
    GridFunction scaled(double c) const;

    // Largest |value - exterior model| over the outermost layer of nodes.
    double collar_mismatch() const;

    bool all_finite() const;

private:
    Lattice lat_;
    std::vector<double> values_;
    ExteriorModel ext_;
    std::function<double(double)> ext_map_;
};

Point point_from_json(const nlohmann::json& j, int dim);
nlohmann::ordered_json point_to_json(const Point& p, int dim);

}  // namespace fracg
