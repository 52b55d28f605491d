#include "fracg/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fracg {

namespace {
constexpr std::size_t kMaxFailureRecords = 8;
constexpr double kTiny = 1e-300;
}  // namespace

bool leq_tol(double a, double b, double tol) {
    if (a <= b) return true;
    const double scale = std::max({std::abs(a), std::abs(b), kTiny});
    return a - b <= tol * scale;
}

double EstimateReport::rhs_sum() const {
    double acc = 0.0;
    for (const auto& t : rhs_terms) acc += t.value;
    return acc;
}

double EstimateReport::diagnostic(const std::string& n) const {
    for (const auto& d : diagnostics)
        if (d.name == n) return d.value;
    return std::numeric_limits<double>::quiet_NaN();
}

double EstimateReport::rhs(const std::string& n) const {
    for (const auto& d : rhs_terms)
        if (d.name == n) return d.value;
    return std::numeric_limits<double>::quiet_NaN();
}

bool EstimateReport::record(double lhs_value, double rhs_value, const std::string& label) {
    const bool ok = std::isfinite(lhs_value) && std::isfinite(rhs_value) &&
                    leq_tol(lhs_value, rhs_value, tolerance);
    return record_outcome(lhs_value, rhs_value, ok, label);
}

bool EstimateReport::record_outcome(double lhs_value, double rhs_value, bool ok,
                                    const std::string& label) {
    ++samples;
    if (rhs_value > 0.0)
        lhs = std::max(lhs, lhs_value / rhs_value);
    else if (lhs_value > 0.0)
        lhs = std::max(lhs, std::numeric_limits<double>::infinity());
    if (!ok) {
        ++violations;
        pass = false;
        if (failures.size() < kMaxFailureRecords) {
            std::ostringstream os;
            os.precision(17);
            os << (label.empty() ? name : label) << ": " << lhs_value << " > " << rhs_value;
            failures.push_back(os.str());
        }
    }
    empirical_constant = lhs;
    constant_bound = 1.0;
    return ok;
}

void EstimateReport::finalize_single() {
    const double r = rhs_sum();
    if (lhs == 0.0)
        empirical_constant = 0.0;
    else if (r > 0.0)
        empirical_constant = lhs / r;
    else
        empirical_constant = std::numeric_limits<double>::infinity();
    samples = std::max<std::size_t>(samples, 1);
    pass = std::isfinite(empirical_constant) &&
           (empirical_constant <= constant_bound || leq_tol(empirical_constant, constant_bound, tolerance));
    if (!pass) violations = std::max<std::size_t>(violations, 1);
}

nlohmann::ordered_json json_number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

nlohmann::ordered_json to_json(const EstimateReport& r) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["lhs"] = json_number(r.lhs);
    auto terms = nlohmann::ordered_json::object();
    for (const auto& t : r.rhs_terms) terms[t.name] = json_number(t.value);
    j["rhs_terms"] = terms;
    j["empirical_constant"] = json_number(r.empirical_constant);
    j["constant_bound"] = json_number(r.constant_bound);
    j["tolerance"] = r.tolerance;
    j["pass"] = r.pass;
    j["samples"] = r.samples;
    j["violations"] = r.violations;
    auto wit = nlohmann::ordered_json::object();
    for (const auto& t : r.witnesses) wit[t.name] = json_number(t.value);
    j["witnesses"] = wit;
    auto diag = nlohmann::ordered_json::object();
    for (const auto& t : r.diagnostics) diag[t.name] = json_number(t.value);
    j["diagnostics"] = diag;
    j["failures"] = r.failures;
    return j;
}

}  // namespace fracg
