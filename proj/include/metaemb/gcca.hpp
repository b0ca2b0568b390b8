#pragma once

// Generalized CCA as a block generalized eigenproblem
//
//     B theta = rho A theta
//
// where A = blockdiag(S_11 + r_1 I, ..., S_JJ + r_J I) and B holds the
// cross-covariances S_jk (j != k) off the diagonal. The ridge r_j is tau times
// the mean diagonal entry of S_jj. Views are used raw (not normalized).

#include "metaemb/core.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace metaemb {

inline constexpr double kDefaultTau = 10.0;

struct GccaModel {
    std::vector<Matrix> thetas;  // J matrices, d x d_j
    std::vector<Vector> means;   // J vectors, d_j
    double tau = kDefaultTau;
    Index d = 0;
    Vector eigenvalues;  // d, non-increasing
};

/// Empirical cross-covariance with 1/n normalization.
inline Matrix cross_covariance(const EnsembleBatch& batch, std::size_t j, std::size_t k) {
    if (j >= batch.size() || k >= batch.size()) {
        throw InvalidInput("cross_covariance: view index out of range");
    }
    const Matrix& xj = batch.view(j).matrix();
    const Matrix& xk = batch.view(k).matrix();
    const Matrix cj = xj.rowwise() - xj.colwise().mean();
    const Matrix ck = xk.rowwise() - xk.colwise().mean();
    return cj.transpose() * ck / static_cast<double>(batch.n_sentences());
}

/// The assembled (A, B) pair, exposed so that solvers can be cross-checked.
struct GccaProblem {
    Matrix a;
    Matrix b;
    std::vector<Index> offsets;  // start row of each view's block
    std::vector<Index> dims;
};

inline GccaProblem assemble_gcca(const EnsembleBatch& batch, double tau) {
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw InvalidInput("tau must be finite and >= 0");
    GccaProblem p;
    p.dims = batch.dims();
    const Index total = batch.total_dim();
    p.offsets.resize(batch.size());
    std::exclusive_scan(p.dims.begin(), p.dims.end(), p.offsets.begin(), Index{0});

    std::vector<Matrix> centered;
    centered.reserve(batch.size());
    for (const auto& v : batch.views()) {
        centered.emplace_back(v.matrix().rowwise() - v.matrix().colwise().mean());
    }
    const double inv_n = 1.0 / static_cast<double>(batch.n_sentences());

    p.a = Matrix::Zero(total, total);
    p.b = Matrix::Zero(total, total);
    for (std::size_t j = 0; j < batch.size(); ++j) {
        Matrix sjj = centered[j].transpose() * centered[j] * inv_n;
        const double ridge = tau * sjj.diagonal().mean();
        sjj.diagonal().array() += ridge;
        p.a.block(p.offsets[j], p.offsets[j], p.dims[j], p.dims[j]) = sjj;
        for (std::size_t k = j + 1; k < batch.size(); ++k) {
            const Matrix sjk = centered[j].transpose() * centered[k] * inv_n;
            p.b.block(p.offsets[j], p.offsets[k], p.dims[j], p.dims[k]) = sjk;
            p.b.block(p.offsets[k], p.offsets[j], p.dims[k], p.dims[j]) = sjk.transpose();
        }
    }
    return p;
}

struct GeneralizedEigen {
    Vector values;   // descending
    Matrix vectors;  // columns, normalized so that v' A v = 1
};

/// Solves B v = rho A v for symmetric B and SPD A through A = L L'.
/// Returns all eigenpairs, largest first; each vector's first clearly
/// nonzero entry is made positive.
inline GeneralizedEigen solve_generalized_symmetric(const Matrix& a, const Matrix& b) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("regularized block-diagonal covariance is not positive definite");
    }
    const auto& lower = llt.matrixL();
    Matrix bs = 0.5 * (b + b.transpose());
    // C = L^-1 B L^-T
    Matrix c = lower.solve(bs);
    c = lower.solve(c.transpose()).transpose();
    c = 0.5 * (c + c.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> es(c);
    if (es.info() != Eigen::Success) throw NumericalError("symmetric eigensolver did not converge");
    Matrix vecs = llt.matrixU().solve(es.eigenvectors());

    const Index n = a.rows();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index x, Index y) { return es.eigenvalues()(x) > es.eigenvalues()(y); });

    GeneralizedEigen out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Index k = 0; k < n; ++k) {
        const Index src = order[static_cast<std::size_t>(k)];
        out.values(k) = es.eigenvalues()(src);
        Vector v = vecs.col(src);
        const double scale = v.cwiseAbs().maxCoeff();
        for (Index i = 0; i < n; ++i) {
            if (std::abs(v(i)) > 1e-8 * scale) {
                if (v(i) < 0) v = -v;
                break;
            }
        }
        out.vectors.col(k) = v;
    }
    if (!out.values.allFinite() || !out.vectors.allFinite()) {
        throw NumericalError("generalized eigensolve produced non-finite values");
    }
    return out;
}

inline GccaModel fit_gcca(const EnsembleBatch& batch, Index d = kDefaultDim,
                          double tau = kDefaultTau) {
    if (batch.size() < 2) {
        throw InvalidInput("gcca needs at least two views (got " + std::to_string(batch.size()) + ")");
    }
    if (d < 1 || d > batch.total_dim()) {
        throw InvalidInput("gcca target dim " + std::to_string(d) + " must lie in [1, " +
                           std::to_string(batch.total_dim()) + "]");
    }
    const GccaProblem p = assemble_gcca(batch, tau);
    const GeneralizedEigen ge = solve_generalized_symmetric(p.a, p.b);

    GccaModel model;
    model.tau = tau;
    model.d = d;
    model.eigenvalues = ge.values.head(d);
    for (std::size_t j = 0; j < batch.size(); ++j) {
        model.thetas.emplace_back(ge.vectors.block(p.offsets[j], 0, p.dims[j], d).transpose());
        model.means.emplace_back(column_means(batch.view(j)));
    }
    return model;
}

inline EmbeddingView apply_gcca(const GccaModel& model, const EnsembleBatch& batch) {
    std::vector<Index> dims;
    for (const auto& t : model.thetas) dims.push_back(t.cols());
    check_dims(batch, dims, "apply gcca");
    Matrix out = Matrix::Zero(batch.n_sentences(), model.d);
    for (std::size_t j = 0; j < batch.size(); ++j) {
        out += (batch.view(j).matrix().rowwise() - model.means[j].transpose()) *
               model.thetas[j].transpose();
    }
    return EmbeddingView("meta:gcca", std::move(out));
}

}  // namespace metaemb
