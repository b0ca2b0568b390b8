#pragma once

// Concatenation and averaging of length-normalized views.

#include "metaemb/core.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace metaemb {

enum class NaiveKind { Conc, Avg };

inline const char* to_string(NaiveKind k) { return k == NaiveKind::Conc ? "conc" : "avg"; }

struct NaiveModel {
    NaiveKind kind = NaiveKind::Conc;
    std::vector<std::string> encoder_ids;
    std::vector<Index> expected_dims;
    Index output_dim = 0;
};

inline Index naive_output_dim(NaiveKind kind, const std::vector<Index>& dims) {
    Index out = 0;
    for (Index d : dims) {
        if (d < 1) throw InvalidInput("view dims must be positive");
        out = kind == NaiveKind::Conc ? out + d : std::max(out, d);
    }
    return out;
}

/// Horizontal concatenation of the normalized views, in ensemble order.
inline Matrix concat_normalized(const EnsembleBatch& batch) {
    Matrix out(batch.n_sentences(), batch.total_dim());
    Index col = 0;
    for (const auto& v : batch.views()) {
        out.middleCols(col, v.dim()) = length_normalize_rows(v.matrix());
        col += v.dim();
    }
    return out;
}

inline EmbeddingView fuse_conc(const EnsembleBatch& batch) {
    return EmbeddingView("meta:conc", concat_normalized(batch));
}

/// Normalizes each view, zero-pads it on the right to the widest view and
/// averages over J.
inline EmbeddingView fuse_avg(const EnsembleBatch& batch) {
    const Index width = naive_output_dim(NaiveKind::Avg, batch.dims());
    Matrix out = Matrix::Zero(batch.n_sentences(), width);
    for (const auto& v : batch.views()) {
        out.leftCols(v.dim()) += length_normalize_rows(v.matrix());
    }
    out /= static_cast<double>(batch.size());
    return EmbeddingView("meta:avg", std::move(out));
}

inline NaiveModel make_naive(NaiveKind kind, const EnsembleBatch& batch) {
    NaiveModel m;
    m.kind = kind;
    m.encoder_ids = batch.encoder_ids();
    m.expected_dims = batch.dims();
    m.output_dim = naive_output_dim(kind, m.expected_dims);
    return m;
}

inline EmbeddingView apply_naive(const NaiveModel& model, const EnsembleBatch& batch) {
    check_dims(batch, model.expected_dims, std::string("apply ") + to_string(model.kind));
    return model.kind == NaiveKind::Conc ? fuse_conc(batch) : fuse_avg(batch);
}

}  // namespace metaemb
