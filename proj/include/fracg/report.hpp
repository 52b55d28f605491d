#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace fracg {

struct NamedValue {
    std::string name;
    double value = 0.0;
};

// Outcome of checking one inequality, possibly over many samples.
//
// For single-instance checks `lhs` and `rhs_terms` are the two sides and
// `empirical_constant` = lhs / sum(rhs_terms). For suites over many samples `lhs` is the
// worst observed ratio LHS/RHS and `constant_bound` is 1.
struct EstimateReport {
    std::string name;
    double lhs = 0.0;
    std::vector<NamedValue> rhs_terms;
    double empirical_constant = 0.0;
    double constant_bound = std::numeric_limits<double>::infinity();
    double tolerance = 0.0;
    bool pass = true;
    std::size_t samples = 0;
    std::size_t violations = 0;
    std::vector<NamedValue> witnesses;
    std::vector<NamedValue> diagnostics;
    std::vector<std::string> failures;  // first few human-readable violation records

    double rhs_sum() const;
    void add_rhs(std::string n, double v) { rhs_terms.push_back({std::move(n), v}); }
    void add_witness(std::string n, double v) { witnesses.push_back({std::move(n), v}); }
    void add_diagnostic(std::string n, double v) { diagnostics.push_back({std::move(n), v}); }
    double diagnostic(const std::string& n) const;  // NaN when absent
    double rhs(const std::string& n) const;         // NaN when absent

    // Records one sample of `lhs_value <= rhs_value`; returns whether it held.
    bool record(double lhs_value, double rhs_value, const std::string& label = {});
    // Same bookkeeping with the verdict decided by the caller.
    bool record_outcome(double lhs_value, double rhs_value, bool ok, const std::string& label = {});

    // Computes empirical_constant from lhs / rhs_sum and sets pass against constant_bound.
    void finalize_single();
};

// Whether a <= b up to relative tolerance tol.
bool leq_tol(double a, double b, double tol);

nlohmann::ordered_json to_json(const EstimateReport& r);

// Infinite / NaN-safe number conversion: non-finite values become strings.
nlohmann::ordered_json json_number(double v);

}  // namespace fracg
