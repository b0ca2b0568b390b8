#pragma once

// Rendering of evaluation reports: an aligned text table and a JSON document
// with fixed field names (subset, n, pearson, spearman).

#include "metaemb/eval.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <sstream>
#include <string>

namespace metaemb {

inline nlohmann::ordered_json to_json(const std::string& subset, const Correlations& c) {
    nlohmann::ordered_json j;
    j["subset"] = subset;
    j["n"] = c.n_pairs;
    j["pearson"] = c.pearson;
    j["spearman"] = c.spearman;
    return j;
}

inline nlohmann::ordered_json to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["subsets"] = nlohmann::ordered_json::array();
    for (const auto& s : report.per_subset) j["subsets"].push_back(to_json(s.name, s.scores));
    j["aggregate_mean"] = to_json("mean", report.aggregate_mean);
    j["aggregate_pooled"] = to_json("pooled", report.aggregate_pooled);
    return j;
}

inline std::string format_cell(const Correlations& c) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f/%.1f", 100.0 * c.pearson, 100.0 * c.spearman);
    return buf;
}

inline std::string format_table(const EvalReport& report) {
    std::size_t width = 24;
    for (const auto& s : report.per_subset) width = std::max(width, s.name.size() + 2);

    std::ostringstream os;
    char line[256];
    auto row = [&](const std::string& name, const Correlations& c) {
        std::snprintf(line, sizeof line, "%-*s %8zu %9.4f %9.4f\n", static_cast<int>(width),
                      name.c_str(), c.n_pairs, c.pearson, c.spearman);
        os << line;
    };
    std::snprintf(line, sizeof line, "%-*s %8s %9s %9s\n", static_cast<int>(width), "subset", "n",
                  "pearson", "spearman");
    os << line;
    for (const auto& s : report.per_subset) row(s.name, s.scores);
    os << std::string(width + 29, '-') << '\n';
    row("mean (STS12-16 style)", report.aggregate_mean);
    row("pooled (STS-B style)", report.aggregate_pooled);
    return os.str();
}

}  // namespace metaemb
