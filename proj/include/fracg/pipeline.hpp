#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fracg/config.hpp"
#include "fracg/report.hpp"
#include "fracg/solver.hpp"

namespace fracg {

enum ExitCode : int {
    kExitOk = 0,
    kExitSchema = 2,
    kExitNonConvergence = 3,
    kExitEstimateFailure = 4,
    kExitIo = 5,
};

// Minimizer of the quadratic energy (g(t) = t, constant exterior model) by a dense solve.
GridFunction linear_oracle(const NonlocalProblem& prob);

// N-function suite on seeded samples; tol defaults to 1e-8 (1e-6 for quadrature families).
std::vector<EstimateReport> nfunction_suite(const NFunction& nf, std::size_t samples,
                                            std::uint64_t seed, std::optional<double> tol = {});

struct EstimateInputs {
    const NonlocalProblem* problem = nullptr;
    const SolveReport* solved = nullptr;  // required by estimates on the minimizer
    std::optional<std::uint64_t> seed;
    double tol = 0.0;  // from tolerances[name], 0 = estimate default
};

struct EstimateOutcome {
    std::string name;
    nlohmann::ordered_json params;
    std::vector<EstimateReport> reports;
    nlohmann::ordered_json extra = nlohmann::ordered_json::object();
    bool pass = true;

    nlohmann::ordered_json to_json() const;
};

// Throws PreconditionError / ConfigError for unusable parameters.
EstimateOutcome evaluate_estimate(const std::string& name, const nlohmann::json& params,
                                  const EstimateInputs& in);

enum class RunMode { All, Solve, Verify, Sweep };

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<double> tol;
    unsigned jobs = 1;
};

struct RunResult {
    int exit_code = kExitOk;
    std::filesystem::path output_dir;
    std::vector<std::string> written;   // file names, in write order
    std::vector<std::string> messages;  // one line per stage outcome
};

// Output directory: override, config, $FRACG_OUTPUT_DIR, then "fracg_out".
RunResult run(const RunConfig& cfg, RunMode mode, const RunOverrides& ov);
// Loads and runs; maps load/parse/I-O errors to exit codes and logs one line per message.
int run_file(const std::filesystem::path& config, RunMode mode, const RunOverrides& ov,
             std::ostream& log);

std::string iso_timestamp();

}  // namespace fracg
