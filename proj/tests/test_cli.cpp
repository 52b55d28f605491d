#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fracg/config.hpp"
#include "fracg/corpus.hpp"
#include "fracg/error.hpp"
#include "fracg/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fracg;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("fracg_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path write_config(const fs::path& dir, const json& cfg) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << cfg.dump(2);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FRACG_EXE) + " " + args + " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

json small_problem() {
    return {{"dim", 1},
            {"h", 0.125},
            {"domain", {{"shape", "box"}, {"counts", {8}}}},
            {"R_ext", 1.0},
            {"s", 0.5},
            {"nfunction", {{"family", "power"}, {"p", 2}}},
            {"exterior", {{"kind", "front"}, {"A", 1.0}, {"B", 0.0}, {"width", 0.3}}}};
}

std::string without_timestamp(const std::string& text) {
    std::istringstream is(text);
    std::string line, out;
    while (std::getline(is, line))
        if (line.find("\"timestamp\"") == std::string::npos) out += line + "\n";
    return out;
}

}  // namespace

TEST(Cli, ConstantDataSolve) {
    const auto dir = scratch("constant");
    json cfg = {{"problem", small_problem()}, {"pipeline", {"solve"}}};
    cfg["problem"]["exterior"] = {{"kind", "constant"}, {"M", 2.5}};
    ASSERT_EQ(run_cli("solve " + write_config(dir, cfg).string() + " --out " + (dir / "out").string()), 0);
    std::istringstream csv(slurp(dir / "out" / "minimizer.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "i0,x0,omega,value");
    int omega_rows = 0;
    while (std::getline(csv, line)) {
        const auto last = line.rfind(',');
        EXPECT_EQ(std::stod(line.substr(last + 1)), 2.5);
        const auto prev = line.rfind(',', last - 1);
        omega_rows += line.substr(prev + 1, last - prev - 1) == "1";
    }
    EXPECT_EQ(omega_rows, 8);
}

TEST(Cli, OracleStage) {
    const auto dir = scratch("oracle");
    const json cfg = {{"problem", small_problem()}, {"pipeline", {"solve", "verify:oracle"}}, {"tolerances", {{"solve", 1e-12}}}};
    ASSERT_EQ(run_cli("run " + write_config(dir, cfg).string() + " --out " + (dir / "out").string()), 0);
    const json rep = json::parse(slurp(dir / "out" / "estimate_oracle.json"));
    EXPECT_TRUE(rep["pass"].get<bool>());
    EXPECT_LE(rep["extra"]["sup_error"].get<double>(), 1e-8);
}

TEST(Cli, SchemaErrors) {
    const auto dir = scratch("schema");
    json unknown = {{"problem", small_problem()}, {"pipeline", {"verify:harnack"}}};
    EXPECT_EQ(run_cli("run " + write_config(dir, unknown).string() + " --out " + dir.string()), 2);
    json extra = {{"problem", small_problem()}, {"pipeline", {"solve"}}, {"colour", "blue"}};
    EXPECT_EQ(run_cli("run " + write_config(dir, extra).string() + " --out " + dir.string()), 2);
    json noseed = {{"problem", small_problem()}, {"pipeline", {"verify:luxemburg"}}};
    EXPECT_EQ(run_cli("verify " + write_config(dir, noseed).string() + " --out " + dir.string()), 2);
    EXPECT_EQ(run_cli("verify " + write_config(dir, noseed).string() + " --seed 4 --out " + (dir / "o").string()), 0);
    json bad_s = {{"problem", small_problem()}, {"pipeline", {"solve"}}};
    bad_s["problem"]["s"] = 1.5;
    EXPECT_EQ(run_cli("run " + write_config(dir, bad_s).string() + " --out " + dir.string()), 2);
    std::ofstream(dir / "broken.json") << "{\"problem\": ";
    EXPECT_EQ(run_cli("run " + (dir / "broken.json").string() + " --out " + dir.string()), 2);
    EXPECT_EQ(run_cli("run " + (dir / "missing.json").string() + " --out " + dir.string()), 5);
    EXPECT_EQ(run_cli("frobnicate"), 2);
}

TEST(Cli, NonConvergence) {
    const auto dir = scratch("nonconv");
    json cfg = {{"problem", small_problem()}, {"pipeline", {"solve"}}, {"solver", {{"max_iter", 1}}}, {"tolerances", {{"solve", 1e-14}}}};
    cfg["problem"]["nfunction"] = {{"family", "power"}, {"p", 3}};
    EXPECT_EQ(run_cli("solve " + write_config(dir, cfg).string() + " --out " + (dir / "out").string()), 3);
    const json rep = json::parse(slurp(dir / "out" / "SolveReport.json"));
    EXPECT_FALSE(rep["report"]["converged"].get<bool>());
}

TEST(Cli, EstimateFailure) {
    const auto dir = scratch("failure");
    const json cfg = {{"problem", small_problem()},
                      {"pipeline", {"solve", "verify:oracle"}},
                      {"tolerances", {{"solve", 1e-12}, {"oracle", 1e-30}}}};
    EXPECT_EQ(run_cli("run " + write_config(dir, cfg).string() + " --out " + (dir / "out").string()), 4);
    const json summary = json::parse(slurp(dir / "out" / "summary.json"));
    EXPECT_EQ(summary["exit_code"].get<int>(), 4);
}

TEST(Cli, IoFailure) {
    const auto dir = scratch("io");
    const json cfg = {{"problem", small_problem()}, {"pipeline", {"solve"}}};
    std::ofstream(dir / "plain_file") << "x";
    EXPECT_EQ(run_cli("solve " + write_config(dir, cfg).string() + " --out " + (dir / "plain_file" / "sub").string()), 5);
}

TEST(Cli, SchemaCommand) {
    const auto dir = scratch("schema_cmd");
    const std::string cmd = std::string(FRACG_EXE) + " schema > " + (dir / "schema.json").string();
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    const json schema = json::parse(slurp(dir / "schema.json"));
    EXPECT_TRUE(schema.contains("$schema"));
    EXPECT_TRUE(schema["properties"].contains("pipeline"));
}

TEST(Cli, DeterministicReports) {
    const fs::path cfg = fs::path(FRACG_TEST_DATA) / "linear_1d.json";
    const auto a = scratch("det_a"), b = scratch("det_b");
    ASSERT_EQ(run_cli("run " + cfg.string() + " --out " + a.string() + " --jobs 1"), 0);
    ASSERT_EQ(run_cli("run " + cfg.string() + " --out " + b.string() + " --jobs 3"), 0);
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(a)) names.insert(e.path().filename().string());
    for (const auto& e : fs::directory_iterator(b)) EXPECT_TRUE(names.count(e.path().filename().string()));
    EXPECT_GE(names.size(), 10u);
    for (const auto& n : names)
        EXPECT_EQ(without_timestamp(slurp(a / n)), without_timestamp(slurp(b / n))) << n;
}

TEST(Cli, EnvironmentOutputDir) {
    const auto dir = scratch("env");
    const json cfg = {{"problem", small_problem()}, {"pipeline", {"solve"}}};
    const std::string cmd = "FRACG_OUTPUT_DIR=" + (dir / "envout").string() + " " + FRACG_EXE + " solve " +
                            write_config(dir, cfg).string() + " >/dev/null 2>&1";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_TRUE(fs::exists(dir / "envout" / "SolveReport.json"));
}

TEST(Corpus, Determinism) {
    CorpusSpec spec;
    spec.family = CorpusFamily::RandomSmooth;
    const auto a = generate_corpus(spec, 42), b = generate_corpus(spec, 42), c = generate_corpus(spec, 43);
    ASSERT_EQ(a.size(), spec.count);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].values(), b[k].values());
    EXPECT_NE(a[0].values(), c[0].values());
}

TEST(Corpus, TwoLevelHasTwoValues) {
    CorpusSpec spec;
    spec.family = CorpusFamily::TwoLevel;
    spec.dim = 2;
    spec.half = 6;
    for (const auto& f : generate_corpus(spec, 7)) {
        const std::set<double> vals(f.values().begin(), f.values().end());
        EXPECT_EQ(vals.size(), 2u);
    }
}

TEST(Corpus, PowerCuspOscillation) {
    CorpusSpec spec;
    spec.family = CorpusFamily::PowerCusp;
    spec.gamma = 0.5;
    spec.half = 64;
    spec.count = 1;
    spec.center = Point{0.0, 0.0, 0.0};
    const auto f = generate_corpus(spec, 1).front();
    for (int k : {1, 4, 16, 64}) {
        const double r = k * spec.h;
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t i : f.lattice().nodes_in(Ball{{0.0, 0.0, 0.0}, r})) {
            lo = std::min(lo, f[i]);
            hi = std::max(hi, f[i]);
        }
        EXPECT_NEAR(hi - lo, std::sqrt(r), 1e-14) << r;
    }
}

TEST(Corpus, UnknownFamily) {
    EXPECT_THROW(corpus_family_from_string("fractal"), ConfigError);
    EXPECT_THROW(CorpusSpec::from_json({{"family", "fractal"}}), ConfigError);
}

TEST(Config, ParseAndValidate) {
    const auto cfg = RunConfig::load(fs::path(FRACG_TEST_DATA) / "nonlinear_2d.json");
    EXPECT_EQ(cfg.pipeline.size(), 6u);
    EXPECT_EQ(cfg.pipeline.back().label(), "sweep:levels");
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_THROW(RunConfig::parse(json{{"problem", small_problem()}, {"pipeline", {"sweep:nothing"}}}).validate(),
                 ConfigError);
}
