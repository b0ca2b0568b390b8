#pragma once

// Truncated SVD of the centered concatenation of normalized views.

#include "metaemb/core.hpp"
#include "metaemb/naive.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <string>
#include <vector>

namespace metaemb {

struct SvdModel {
    std::vector<Index> view_dims;
    Matrix projection;  // D x d, orthonormal columns
    Vector mean;        // D
    Index d = 0;
    Vector singular_values;  // d, descending
};

namespace detail {

/// Flip each column so that its largest-magnitude entry is positive.
inline void fix_column_signs(Matrix& m) {
    for (Index c = 0; c < m.cols(); ++c) {
        Index arg = 0;
        m.col(c).cwiseAbs().maxCoeff(&arg);
        if (m(arg, c) < 0) m.col(c) = -m.col(c);
    }
}

/// Replaces columns [from, cols) of `basis` by an orthonormal completion of
/// the span of the first `from` columns.
inline void complete_orthonormal(Matrix& basis, Index from) {
    const Index rows = basis.rows();
    if (from == 0) {
        basis = Matrix::Identity(rows, basis.cols());
        return;
    }
    Eigen::HouseholderQR<Matrix> qr(basis.leftCols(from));
    Matrix q = qr.householderQ() * Matrix::Identity(rows, rows);
    basis.rightCols(basis.cols() - from) = q.middleCols(from, basis.cols() - from);
}

/// Top-d right singular vectors and singular values of `x`, computed from
/// whichever Gram matrix is smaller.
inline std::pair<Matrix, Vector> top_right_singular(const Matrix& x, Index d) {
    const Index n = x.rows();
    const Index dim = x.cols();
    Matrix v(dim, d);
    Vector sigma(d);
    if (n > dim) {
        Matrix gram = x.transpose() * x;
        Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
        if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of XtX failed");
        for (Index k = 0; k < d; ++k) {
            const Index src = dim - 1 - k;
            v.col(k) = es.eigenvectors().col(src);
            sigma(k) = std::sqrt(std::max(0.0, es.eigenvalues()(src)));
        }
        return {v, sigma};
    }

    Matrix gram = x * x.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of XXt failed");
    const double top = std::sqrt(std::max(0.0, es.eigenvalues()(n - 1)));
    const double cutoff = std::max(top, 1.0) * 1e-10;
    Index good = 0;
    for (Index k = 0; k < d; ++k) {
        const Index src = n - 1 - k;
        sigma(k) = std::sqrt(std::max(0.0, es.eigenvalues()(src)));
        if (sigma(k) > cutoff && good == k) {
            v.col(k) = x.transpose() * es.eigenvectors().col(src) / sigma(k);
            ++good;
        }
    }
    // Null directions of the centered data: any orthonormal completion works.
    if (good < d) complete_orthonormal(v, good);
    return {v, sigma};
}

}  // namespace detail

inline SvdModel fit_svd(const EnsembleBatch& batch, Index d = kDefaultDim) {
    const Matrix conc = concat_normalized(batch);
    if (d < 1 || d > std::min(conc.rows(), conc.cols())) {
        throw InvalidInput("svd target dim " + std::to_string(d) + " must lie in [1, min(" +
                           std::to_string(conc.rows()) + ", " + std::to_string(conc.cols()) + ")]");
    }
    SvdModel model;
    model.view_dims = batch.dims();
    model.d = d;
    model.mean = column_means(conc);
    const Matrix centered = conc.rowwise() - model.mean.transpose();
    auto [v, sigma] = detail::top_right_singular(centered, d);
    if (!v.allFinite() || !sigma.allFinite()) throw NumericalError("svd produced non-finite values");
    detail::fix_column_signs(v);
    model.projection = std::move(v);
    model.singular_values = std::move(sigma);
    return model;
}

inline EmbeddingView apply_svd(const SvdModel& model, const EnsembleBatch& batch) {
    check_dims(batch, model.view_dims, "apply svd");
    const Matrix conc = concat_normalized(batch);
    Matrix out = (conc.rowwise() - model.mean.transpose()) * model.projection;
    return EmbeddingView("meta:svd", std::move(out));
}

}  // namespace metaemb
