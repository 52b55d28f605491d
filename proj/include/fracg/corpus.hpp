#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fracg/lattice.hpp"

namespace fracg {

enum class CorpusFamily { RandomSmooth, PowerCusp, TwoLevel };

std::string to_string(CorpusFamily f);
CorpusFamily corpus_family_from_string(const std::string& name);  // ConfigError when unknown

struct CorpusSpec {
    CorpusFamily family = CorpusFamily::RandomSmooth;
    int dim = 1;
    double h = 0.0625;
    int half = 16;  // 2 half + 1 nodes per axis
    std::size_t count = 8;
    int modes = 4;                 // RandomSmooth
    double gamma = 0.5;            // PowerCusp
    std::optional<Point> center;   // PowerCusp; random node near the origin when absent

    static CorpusSpec from_json(const nlohmann::json& j);
    nlohmann::ordered_json to_json() const;
};

// Deterministic for a given seed.
std::vector<GridFunction> generate_corpus(const CorpusSpec& spec, std::uint64_t seed);

}  // namespace fracg
