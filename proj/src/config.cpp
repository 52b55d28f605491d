#include "fracg/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "fracg/error.hpp"

namespace fracg {

namespace {

const std::vector<std::string> kEstimates = {
    "boundedness", "caccioppoli", "convexity",  "de_giorgi", "holder",   "log_estimate",
    "luxemburg",   "membership",  "nfunction",  "oracle",    "sobolev_poincare", "tail",
    "weak_residual"};

const std::set<std::string> kSeeded = {"convexity", "luxemburg", "nfunction"};

void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

StageSpec parse_stage(const std::string& text) {
    StageSpec st;
    if (text == "solve") return st;
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ConfigError("pipeline: bad stage '" + text + "'");
    const std::string head = text.substr(0, colon);
    st.name = text.substr(colon + 1);
    if (st.name.empty()) throw ConfigError("pipeline: empty name in '" + text + "'");
    if (head == "verify")
        st.kind = StageSpec::Kind::Verify;
    else if (head == "sweep")
        st.kind = StageSpec::Kind::Sweep;
    else
        throw ConfigError("pipeline: bad stage '" + text + "'");
    return st;
}

}  // namespace

std::string StageSpec::label() const {
    switch (kind) {
        case Kind::Solve: return "solve";
        case Kind::Verify: return "verify:" + name;
        case Kind::Sweep: return "sweep:" + name;
    }
    return "?";
}

const std::vector<std::string>& estimate_names() { return kEstimates; }

bool estimate_is_known(const std::string& name) {
    return std::find(kEstimates.begin(), kEstimates.end(), name) != kEstimates.end();
}

bool estimate_uses_seed(const std::string& name) { return kSeeded.count(name) > 0; }

RunConfig RunConfig::parse(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: expected an object");
    require_keys(j, {"problem", "pipeline", "seed", "output_dir", "tolerances", "estimates", "sweeps",
                     "solver"},
                 "config");
    RunConfig c;
    try {
        if (!j.contains("problem") || !j.at("problem").is_object())
            throw ConfigError("config: 'problem' object is required");
        c.problem = j.at("problem");
        if (!j.contains("pipeline") || !j.at("pipeline").is_array() || j.at("pipeline").empty())
            throw ConfigError("config: 'pipeline' must be a nonempty array");
        for (const auto& s : j.at("pipeline")) {
            if (!s.is_string()) throw ConfigError("pipeline: stages are strings");
            c.pipeline.push_back(parse_stage(s.get<std::string>()));
        }
        if (j.contains("seed")) {
            if (!j.at("seed").is_number_unsigned()) throw ConfigError("config: seed must be a nonnegative integer");
            c.seed = j.at("seed").get<std::uint64_t>();
        }
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("tolerances")) {
            if (!j.at("tolerances").is_object()) throw ConfigError("tolerances: expected an object");
            for (auto it = j.at("tolerances").begin(); it != j.at("tolerances").end(); ++it) {
                if (it.key() != "solve" && !estimate_is_known(it.key()))
                    throw ConfigError("tolerances: unknown stage '" + it.key() + "'");
                const double v = it.value().get<double>();
                if (!(v > 0.0)) throw ConfigError("tolerances: values must be positive");
                c.tolerances[it.key()] = v;
            }
        }
        if (j.contains("estimates")) {
            if (!j.at("estimates").is_object()) throw ConfigError("estimates: expected an object");
            for (auto it = j.at("estimates").begin(); it != j.at("estimates").end(); ++it) {
                if (!estimate_is_known(it.key())) throw ConfigError("estimates: unknown estimate '" + it.key() + "'");
                if (!it.value().is_object()) throw ConfigError("estimates: parameters must be objects");
                c.estimates[it.key()] = it.value();
            }
        }
        if (j.contains("sweeps")) {
            if (!j.at("sweeps").is_object()) throw ConfigError("sweeps: expected an object");
            for (auto it = j.at("sweeps").begin(); it != j.at("sweeps").end(); ++it) {
                const auto& sj = it.value();
                require_keys(sj, {"estimate", "parameter", "values", "base"}, "sweep " + it.key());
                SweepSpec sw;
                sw.estimate = sj.at("estimate").get<std::string>();
                if (!estimate_is_known(sw.estimate))
                    throw ConfigError("sweep " + it.key() + ": unknown estimate '" + sw.estimate + "'");
                sw.parameter = sj.at("parameter").get<std::string>();
                sw.values = sj.at("values").get<std::vector<double>>();
                if (sw.values.empty()) throw ConfigError("sweep " + it.key() + ": no values");
                if (sj.contains("base")) {
                    if (!sj.at("base").is_object()) throw ConfigError("sweep " + it.key() + ": base must be an object");
                    sw.base = sj.at("base");
                }
                c.sweeps[it.key()] = sw;
            }
        }
        if (j.contains("solver")) {
            c.solver = j.at("solver");
            if (!c.solver.is_object()) throw ConfigError("solver: expected an object");
            require_keys(c.solver, {"max_iter", "method", "initial"}, "solver");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    for (const StageSpec& st : c.pipeline) {
        if (st.kind == StageSpec::Kind::Verify && !estimate_is_known(st.name))
            throw ConfigError("pipeline: unknown estimate '" + st.name + "'");
        if (st.kind == StageSpec::Kind::Sweep && !c.sweeps.count(st.name))
            throw ConfigError("pipeline: undefined sweep '" + st.name + "'");
    }
    solve_options(c);
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open config '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return parse(j);
}

bool RunConfig::samples_randomly() const {
    for (const StageSpec& st : pipeline) {
        if (st.kind == StageSpec::Kind::Verify && estimate_uses_seed(st.name)) return true;
        if (st.kind == StageSpec::Kind::Sweep && estimate_uses_seed(sweeps.at(st.name).estimate)) return true;
    }
    return false;
}

void RunConfig::validate() const {
    if (samples_randomly() && !seed) throw ConfigError("config: a seed is required by a sampling stage");
    build_problem(problem);
}

double RunConfig::tolerance(const std::string& key, double fallback) const {
    const auto it = tolerances.find(key);
    return it == tolerances.end() ? fallback : it->second;
}

NonlocalProblem build_problem(const nlohmann::json& pj) {
    try {
        require_keys(pj, {"dim", "h", "domain", "R_ext", "s", "nfunction", "kernel", "exterior"}, "problem");
        const int dim = pj.at("dim").get<int>();
        if (dim < 1 || dim > 3) throw ConfigError("problem: dim must be 1, 2 or 3");
        const double h = pj.at("h").get<double>();
        if (!(h > 0.0)) throw ConfigError("problem: h must be positive");
        const auto& dj = pj.at("domain");
        require_keys(dj, {"shape", "counts", "radius"}, "domain");
        const std::string shape = dj.value("shape", std::string("box"));
        DomainSpec dom;
        if (shape == "box") {
            const auto counts = dj.at("counts").get<std::vector<int>>();
            if (static_cast<int>(counts.size()) != dim) throw ConfigError("domain: counts needs one entry per axis");
            Index3 c{1, 1, 1};
            for (int k = 0; k < dim; ++k) {
                if (counts[k] < 1) throw ConfigError("domain: counts must be positive");
                c[k] = counts[k];
            }
            dom = DomainSpec::box(dim, h, c);
        } else if (shape == "ball") {
            dom = DomainSpec::ball(dim, h, dj.at("radius").get<double>());
        } else {
            throw ConfigError("domain: unknown shape '" + shape + "'");
        }
        if (pj.contains("R_ext")) dom.R_ext = pj.at("R_ext").get<double>();
        const double s = pj.at("s").get<double>();
        NFunction nf = NFunction::from_json(pj.at("nfunction"));
        Kernel kernel = pj.contains("kernel") ? Kernel::from_json(pj.at("kernel"), dim) : Kernel::pure();
        ExteriorModel ext = pj.contains("exterior") ? ExteriorModel::from_json(pj.at("exterior"), dim)
                                                    : ExteriorModel::zero();
        return NonlocalProblem::build(dom, std::move(nf), std::move(kernel), s, ext);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("problem: ") + e.what());
    } catch (const PreconditionError& e) {
        throw ConfigError(std::string("problem: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(std::string("problem: ") + e.what());
    }
}

SolveOptions solve_options(const RunConfig& cfg) {
    SolveOptions o;
    o.tol = cfg.tolerance("solve", o.tol);
    try {
        o.max_iter = cfg.solver.value("max_iter", o.max_iter);
        const std::string method = cfg.solver.value("method", std::string("cg"));
        if (method == "cg")
            o.method = SolveMethod::ConjugateGradient;
        else if (method == "steepest")
            o.method = SolveMethod::SteepestDescent;
        else
            throw ConfigError("solver: unknown method '" + method + "'");
        const std::string init = cfg.solver.value("initial", std::string("halo_harmonic"));
        if (init == "halo_harmonic")
            o.initial = InitialGuess::HaloHarmonic;
        else if (init == "zero_extension")
            o.initial = InitialGuess::ZeroExtension;
        else
            throw ConfigError("solver: unknown initial guess '" + init + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("solver: ") + e.what());
    }
    if (o.max_iter < 1) throw ConfigError("solver: max_iter must be positive");
    return o;
}

std::string run_config_schema() {
    nlohmann::ordered_json point = {{"oneOf", {{{"type", "number"}}, {{"type", "array"}, {"items", {{"type", "number"}}}, {"minItems", 1}, {"maxItems", 3}}}}};
    nlohmann::ordered_json nfunction = {
        {"type", "object"},
        {"required", {"family"}},
        {"properties",
         {{"family", {{"enum", {"power", "power_log", "table"}}}},
          {"p", {{"type", "number"}, {"exclusiveMinimum", 1}}},
          {"q", {{"type", "number"}}},
          {"points", {{"type", "array"}, {"items", {{"type", "array"}, {"items", {{"type", "number"}}}, {"minItems", 2}, {"maxItems", 2}}}}},
          {"quadrature_tol", {{"type", "number"}, {"exclusiveMinimum", 0}}}}}};
    nlohmann::ordered_json kernel = {
        {"type", "object"},
        {"properties",
         {{"form", {{"enum", {"pure", "radial_decay", "bump"}}}},
          {"c", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"lambda", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"Lambda", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"length", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"center", point}}}};
    nlohmann::ordered_json exterior = {
        {"type", "object"},
        {"properties",
         {{"kind", {{"enum", {"zero", "constant", "radial_power", "front"}}}},
          {"M", {{"type", "number"}}},
          {"gamma", {{"type", "number"}}},
          {"A", {{"type", "number"}}},
          {"B", {{"type", "number"}}},
          {"width", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"direction", point},
          {"center", point}}}};
    nlohmann::ordered_json problem = {
        {"type", "object"},
        {"required", {"dim", "h", "domain", "s", "nfunction"}},
        {"additionalProperties", false},
        {"properties",
         {{"dim", {{"enum", {1, 2, 3}}}},
          {"h", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"domain",
           {{"type", "object"},
            {"properties",
             {{"shape", {{"enum", {"box", "ball"}}}},
              {"counts", {{"type", "array"}, {"items", {{"type", "integer"}, {"minimum", 1}}}}},
              {"radius", {{"type", "number"}, {"minimum", 0}}}}}}},
          {"R_ext", {{"type", "number"}, {"exclusiveMinimum", 0}}},
          {"s", {{"type", "number"}, {"exclusiveMinimum", 0}, {"exclusiveMaximum", 1}}},
          {"nfunction", nfunction},
          {"kernel", kernel},
          {"exterior", exterior}}}};
    nlohmann::ordered_json stage_pattern = "^(solve|verify:(" + [] {
        std::string alt;
        for (const auto& n : kEstimates) alt += (alt.empty() ? "" : "|") + n;
        return alt;
    }() + ")|sweep:[A-Za-z0-9_.-]+)$";
    nlohmann::ordered_json estimate_names_json = kEstimates;
    nlohmann::ordered_json schema = {
        {"$schema", "https://json-schema.org/draft/2020-12/schema"},
        {"title", "fracg run configuration"},
        {"type", "object"},
        {"required", {"problem", "pipeline"}},
        {"additionalProperties", false},
        {"properties",
         {{"problem", problem},
          {"pipeline", {{"type", "array"}, {"minItems", 1}, {"items", {{"type", "string"}, {"pattern", stage_pattern}}}}},
          {"seed", {{"type", "integer"}, {"minimum", 0}}},
          {"output_dir", {{"type", "string"}}},
          {"tolerances", {{"type", "object"}, {"additionalProperties", {{"type", "number"}, {"exclusiveMinimum", 0}}}}},
          {"estimates", {{"type", "object"}, {"propertyNames", {{"enum", estimate_names_json}}}, {"additionalProperties", {{"type", "object"}}}}},
          {"sweeps",
           {{"type", "object"},
            {"additionalProperties",
             {{"type", "object"},
              {"required", {"estimate", "parameter", "values"}},
              {"additionalProperties", false},
              {"properties",
               {{"estimate", {{"enum", estimate_names_json}}},
                {"parameter", {{"type", "string"}}},
                {"values", {{"type", "array"}, {"minItems", 1}, {"items", {{"type", "number"}}}}},
                {"base", {{"type", "object"}}}}}}}}},
          {"solver",
           {{"type", "object"},
            {"additionalProperties", false},
            {"properties",
             {{"max_iter", {{"type", "integer"}, {"minimum", 1}}},
              {"method", {{"enum", {"cg", "steepest"}}}},
              {"initial", {{"enum", {"halo_harmonic", "zero_extension"}}}}}}}}}}};
    return schema.dump(2);
}

}  // namespace fracg
