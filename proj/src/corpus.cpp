#include "fracg/corpus.hpp"

#include <cmath>
#include <numbers>

#include "fracg/error.hpp"
#include "fracg/numerics.hpp"

namespace fracg {

std::string to_string(CorpusFamily f) {
    switch (f) {
        case CorpusFamily::RandomSmooth: return "random_smooth";
        case CorpusFamily::PowerCusp: return "power_cusp";
        case CorpusFamily::TwoLevel: return "two_level";
    }
    return "?";
}

CorpusFamily corpus_family_from_string(const std::string& name) {
    if (name == "random_smooth") return CorpusFamily::RandomSmooth;
    if (name == "power_cusp") return CorpusFamily::PowerCusp;
    if (name == "two_level") return CorpusFamily::TwoLevel;
    throw ConfigError("unknown corpus family '" + name + "'");
}

CorpusSpec CorpusSpec::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("corpus: expected an object");
    CorpusSpec c;
    try {
        c.family = corpus_family_from_string(j.at("family").get<std::string>());
        c.dim = j.value("dim", c.dim);
        c.h = j.value("h", c.h);
        c.half = j.value("half", c.half);
        c.count = j.value("count", c.count);
        c.modes = j.value("modes", c.modes);
        c.gamma = j.value("gamma", c.gamma);
        if (j.contains("center")) c.center = point_from_json(j.at("center"), c.dim);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("corpus: ") + e.what());
    }
    if (c.dim < 1 || c.dim > 3) throw ConfigError("corpus: dim must be 1, 2 or 3");
    if (!(c.h > 0.0) || c.half < 1 || c.modes < 1) throw ConfigError("corpus: bad lattice or modes");
    if (!(c.gamma > 0.0)) throw ConfigError("corpus: gamma must be positive");
    return c;
}

nlohmann::ordered_json CorpusSpec::to_json() const {
    nlohmann::ordered_json j;
    j["family"] = to_string(family);
    j["dim"] = dim;
    j["h"] = h;
    j["half"] = half;
    j["count"] = count;
    j["modes"] = modes;
    j["gamma"] = gamma;
    if (center) j["center"] = point_to_json(*center, dim);
    return j;
}

namespace {

GridFunction random_smooth(const Lattice& lat, int modes, Rng& rng) {
    const int n = lat.dim();
    struct Mode {
        Point k;
        double amp, phase;
    };
    std::vector<Mode> ms;
    for (int m = 0; m < modes; ++m) {
        Mode md{};
        for (int d = 0; d < n; ++d) md.k[d] = rng.uniform(-1.0, 1.0) * std::numbers::pi * (m + 1);
        md.amp = rng.normal() / (m + 1);
        md.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        ms.push_back(md);
    }
    const double offset = rng.normal();
    return GridFunction::sample(lat, [&](const Point& x) {
        double v = offset;
        for (const Mode& md : ms) {
            double arg = md.phase;
            for (int d = 0; d < n; ++d) arg += md.k[d] * x[d];
            v += md.amp * std::sin(arg);
        }
        return v;
    });
}

Point random_node_near_origin(const Lattice& lat, int half, Rng& rng) {
    Point c{};
    const int span = std::max(half / 4, 0);
    for (int d = 0; d < lat.dim(); ++d)
        c[d] = lat.h() * (static_cast<double>(rng.index(2 * span + 1)) - span);
    return c;
}

}  // namespace

std::vector<GridFunction> generate_corpus(const CorpusSpec& spec, std::uint64_t seed) {
    const Lattice lat = Lattice::centered(spec.dim, spec.h, spec.half);
    Rng rng(seed);
    std::vector<GridFunction> out;
    out.reserve(spec.count);
    for (std::size_t c = 0; c < spec.count; ++c) {
        switch (spec.family) {
            case CorpusFamily::RandomSmooth: out.push_back(random_smooth(lat, spec.modes, rng)); break;
            case CorpusFamily::PowerCusp: {
                const Point x0 = spec.center ? *spec.center : random_node_near_origin(lat, spec.half, rng);
                const double gamma = spec.gamma;
                const int n = spec.dim;
                out.push_back(GridFunction::sample(
                    lat, [x0, gamma, n](const Point& x) { return std::pow(distance(x, x0, n), gamma); }));
                break;
            }
            case CorpusFamily::TwoLevel: {
                const double lo = rng.normal();
                const double hi = lo + rng.uniform(0.1, 2.0);
                Point x0 = random_node_near_origin(lat, spec.half, rng);
                // radius strictly between node shells so both levels occur
                const double r = lat.h() * (std::floor(rng.uniform(1.0, 0.5 * spec.half)) + 0.5);
                const int n = spec.dim;
                out.push_back(GridFunction::sample(lat, [=](const Point& x) {
                    return distance(x, x0, n) <= r ? hi : lo;
                }));
                break;
            }
        }
    }
    return out;
}

}  // namespace fracg
