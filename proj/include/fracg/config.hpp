#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fracg/solver.hpp"

namespace fracg {

struct StageSpec {
    enum class Kind { Solve, Verify, Sweep };
    Kind kind = Kind::Solve;
    std::string name;  // estimate name (verify) or sweep name (sweep)

    std::string label() const;  // "solve", "verify:<name>", "sweep:<name>"
};

struct SweepSpec {
    std::string estimate;
    std::string parameter;
    std::vector<double> values;
    nlohmann::json base = nlohmann::json::object();  // parameters shared by all points
};

struct RunConfig {
    nlohmann::json problem;
    std::vector<StageSpec> pipeline;
    std::optional<std::uint64_t> seed;
    std::string output_dir;
    std::map<std::string, double> tolerances;
    std::map<std::string, nlohmann::json> estimates;
    std::map<std::string, SweepSpec> sweeps;
    nlohmann::json solver = nlohmann::json::object();

    // Throws ConfigError on any schema violation.
    static RunConfig parse(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);  // std::ios_base::failure on I/O

    // Cross-field checks (seed present when a stage samples randomly).
    void validate() const;
    bool samples_randomly() const;
    double tolerance(const std::string& key, double fallback) const;
};

// Estimates callable from verify/sweep stages.
const std::vector<std::string>& estimate_names();
bool estimate_is_known(const std::string& name);
bool estimate_uses_seed(const std::string& name);

NonlocalProblem build_problem(const nlohmann::json& problem);  // ConfigError on bad input
SolveOptions solve_options(const RunConfig& cfg);

// JSON Schema for RunConfig.
std::string run_config_schema();

}  // namespace fracg
