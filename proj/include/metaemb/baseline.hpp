#pragma once

// Random up-projection control: a fixed d x d_j matrix with entries drawn
// from U(-1/sqrt(d_j), 1/sqrt(d_j)), applied to every row.

#include "metaemb/core.hpp"

#include <cmath>
#include <cstdint>
#include <string>

namespace metaemb {

struct UpProjection {
    Matrix matrix;  // target_dim x source_dim
    std::uint64_t seed = 0;
    Index source_dim = 0;
    Index target_dim = 0;

    double bound() const { return 1.0 / std::sqrt(static_cast<double>(source_dim)); }
};

/// Entries are filled row by row from a generator seeded with `seed`.
inline UpProjection make_up_projection(Index source_dim, Index target_dim, std::uint64_t seed) {
    if (source_dim < 1 || target_dim < 1) throw InvalidInput("up-projection dims must be positive");
    UpProjection p;
    p.seed = seed;
    p.source_dim = source_dim;
    p.target_dim = target_dim;
    p.matrix.resize(target_dim, source_dim);
    const double b = p.bound();
    Rng rng(seed);
    for (Index r = 0; r < target_dim; ++r) {
        for (Index c = 0; c < source_dim; ++c) p.matrix(r, c) = rng.uniform(-b, b);
    }
    return p;
}

inline EmbeddingView apply_up_projection(const UpProjection& p, const EmbeddingView& view) {
    if (view.dim() != p.source_dim) {
        throw InvalidInput("up-projection expects dim " + std::to_string(p.source_dim) + ", got " +
                           std::to_string(view.dim()));
    }
    return EmbeddingView(view.encoder_id() + ":up" + std::to_string(p.target_dim),
                         view.matrix() * p.matrix.transpose());
}

inline EmbeddingView up_project(const EmbeddingView& view, Index d, std::uint64_t seed) {
    return apply_up_projection(make_up_projection(view.dim(), d, seed), view);
}

}  // namespace metaemb
