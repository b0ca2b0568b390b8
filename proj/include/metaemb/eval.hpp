#pragma once

// STS evaluation: cosine predictions, Pearson / Spearman, per-subset reports.

#include "metaemb/core.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace metaemb {

struct StsRecord {
    Index index_a = 0;
    Index index_b = 0;
    double gold = 0.0;
};

struct StsSubset {
    std::string name;
    std::vector<StsRecord> records;
};

/// Sentence pairs as row indices into a table of unique-sentence embeddings,
/// grouped into named subsets (kept in order of first appearance).
struct StsDataset {
    std::vector<StsSubset> subsets;

    std::size_t record_count() const {
        std::size_t n = 0;
        for (const auto& s : subsets) n += s.records.size();
        return n;
    }

    StsSubset& subset(const std::string& name) {
        for (auto& s : subsets) {
            if (s.name == name) return s;
        }
        subsets.push_back({name, {}});
        return subsets.back();
    }
};

struct Correlations {
    double pearson = 0.0;
    double spearman = 0.0;
    std::size_t n_pairs = 0;
};

struct SubsetScore {
    std::string name;
    Correlations scores;
};

struct EvalReport {
    std::vector<SubsetScore> per_subset;
    Correlations aggregate_mean;    // unweighted mean over subsets (STS12-16 style)
    Correlations aggregate_pooled;  // all pairs pooled (STS Benchmark style)
};

inline std::vector<double> predict_similarities(const EmbeddingView& emb,
                                                const std::vector<StsRecord>& records) {
    const Matrix& m = emb.matrix();
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (r.index_a < 0 || r.index_a >= m.rows() || r.index_b < 0 || r.index_b >= m.rows()) {
            throw InvalidInput("sentence index (" + std::to_string(r.index_a) + ", " +
                               std::to_string(r.index_b) + ") out of range for " +
                               std::to_string(m.rows()) + " embeddings");
        }
        out.push_back(cosine(m.row(r.index_a), m.row(r.index_b)));
    }
    return out;
}

inline std::vector<double> predict_similarities(const EmbeddingView& emb, const StsDataset& ds) {
    std::vector<double> out;
    for (const auto& s : ds.subsets) {
        auto part = predict_similarities(emb, s.records);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

namespace detail {

inline void check_correlation_inputs(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidInput("correlation inputs differ in length");
    if (x.size() < 2) throw InvalidInput("correlation needs at least two points");
}

}  // namespace detail

/// Sample Pearson correlation (two-pass, centered).
inline double pearson(std::span<const double> x, std::span<const double> y) {
    detail::check_correlation_inputs(x, y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("correlation of a constant vector");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Ranks starting at 1; tied values share the mean of their rank range.
inline std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i + 1;
        while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j + 1);  // mean of i+1 .. j
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
        i = j;
    }
    return ranks;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
    detail::check_correlation_inputs(x, y);
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

inline Correlations correlate(std::span<const double> predicted, std::span<const double> gold) {
    return {pearson(predicted, gold), spearman(predicted, gold), predicted.size()};
}

inline EvalReport evaluate(const EmbeddingView& emb, const StsDataset& ds) {
    if (ds.subsets.empty()) throw InvalidInput("STS dataset has no subsets");
    EvalReport report;
    std::vector<double> all_pred, all_gold;
    double sum_p = 0.0, sum_s = 0.0;
    for (const auto& s : ds.subsets) {
        if (s.records.empty()) throw InvalidInput("STS subset '" + s.name + "' is empty");
        const auto pred = predict_similarities(emb, s.records);
        std::vector<double> gold;
        gold.reserve(s.records.size());
        for (const auto& r : s.records) gold.push_back(r.gold);
        const Correlations c = correlate(pred, gold);
        report.per_subset.push_back({s.name, c});
        sum_p += c.pearson;
        sum_s += c.spearman;
        all_pred.insert(all_pred.end(), pred.begin(), pred.end());
        all_gold.insert(all_gold.end(), gold.begin(), gold.end());
    }
    const double k = static_cast<double>(ds.subsets.size());
    report.aggregate_mean = {sum_p / k, sum_s / k, all_pred.size()};
    report.aggregate_pooled = correlate(all_pred, all_gold);
    return report;
}

}  // namespace metaemb
