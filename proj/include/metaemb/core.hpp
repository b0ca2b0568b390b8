#pragma once

// Shared types for sentence meta-embeddings: error classes, the per-encoder
// embedding matrix, the aligned multi-view batch and a couple of row/column
// utilities every combiner needs.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace metaemb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct InvalidInput : Error {
    explicit InvalidInput(const std::string& what) : Error("InvalidInput", what) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error("NumericalError", what) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& what) : Error("FormatError", what) {}
};

struct DegenerateInput : Error {
    explicit DegenerateInput(const std::string& what) : Error("DegenerateInput", what) {}
};

inline constexpr double kZeroNormEps = 1e-12;
inline constexpr Index kDefaultDim = 1024;

/// One encoder's output over a list of sentences: rows = sentences, cols = dims.
class EmbeddingView {
public:
    EmbeddingView(std::string encoder_id, Matrix matrix)
        : encoder_id_(std::move(encoder_id)), matrix_(std::move(matrix)) {
        if (matrix_.rows() < 1 || matrix_.cols() < 1) {
            throw InvalidInput("embedding view '" + encoder_id_ + "' is empty (" +
                               std::to_string(matrix_.rows()) + "x" +
                               std::to_string(matrix_.cols()) + ")");
        }
        if (!matrix_.allFinite()) {
            throw InvalidInput("embedding view '" + encoder_id_ + "' contains non-finite entries");
        }
    }

    const std::string& encoder_id() const noexcept { return encoder_id_; }
    const Matrix& matrix() const noexcept { return matrix_; }
    Index rows() const noexcept { return matrix_.rows(); }
    Index dim() const noexcept { return matrix_.cols(); }

private:
    std::string encoder_id_;
    Matrix matrix_;
};

/// J views over the same sentences, in ensemble order.
class EnsembleBatch {
public:
    explicit EnsembleBatch(std::vector<EmbeddingView> views) : views_(std::move(views)) {
        if (views_.empty()) {
            throw InvalidInput("ensemble needs at least one view");
        }
        std::set<std::string> seen;
        for (const auto& v : views_) {
            if (v.rows() != views_.front().rows()) {
                throw InvalidInput("view '" + v.encoder_id() + "' has " + std::to_string(v.rows()) +
                                   " rows, expected " + std::to_string(views_.front().rows()));
            }
            if (!seen.insert(v.encoder_id()).second) {
                throw InvalidInput("duplicate encoder id '" + v.encoder_id() + "'");
            }
        }
    }

    const std::vector<EmbeddingView>& views() const noexcept { return views_; }
    const EmbeddingView& view(std::size_t j) const { return views_.at(j); }
    std::size_t size() const noexcept { return views_.size(); }
    Index n_sentences() const noexcept { return views_.front().rows(); }

    std::vector<Index> dims() const {
        std::vector<Index> out;
        out.reserve(views_.size());
        for (const auto& v : views_) out.push_back(v.dim());
        return out;
    }

    Index total_dim() const {
        Index total = 0;
        for (const auto& v : views_) total += v.dim();
        return total;
    }

    std::vector<std::string> encoder_ids() const {
        std::vector<std::string> out;
        for (const auto& v : views_) out.push_back(v.encoder_id());
        return out;
    }

    /// Copy of the batch with view `j` removed.
    EnsembleBatch without(std::size_t j) const {
        std::vector<EmbeddingView> rest;
        for (std::size_t k = 0; k < views_.size(); ++k) {
            if (k != j) rest.push_back(views_[k]);
        }
        return EnsembleBatch(std::move(rest));
    }

private:
    std::vector<EmbeddingView> views_;
};

/// Scales each row to unit L2 norm. Rows with norm below 1e-12 pass through.
inline Matrix length_normalize_rows(const Matrix& m) {
    Matrix out = m;
    for (Index r = 0; r < out.rows(); ++r) {
        const double norm = out.row(r).norm();
        if (norm >= kZeroNormEps) out.row(r) /= norm;
    }
    return out;
}

inline EmbeddingView length_normalize(const EmbeddingView& view) {
    return EmbeddingView(view.encoder_id(), length_normalize_rows(view.matrix()));
}

inline Vector column_means(const Matrix& m) {
    if (m.rows() < 1 || m.cols() < 1) throw InvalidInput("column_means of an empty matrix");
    return m.colwise().mean().transpose();
}

inline Vector column_means(const EmbeddingView& view) { return column_means(view.matrix()); }

inline double cosine(const Eigen::Ref<const RowVector>& a, const Eigen::Ref<const RowVector>& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na < kZeroNormEps || nb < kZeroNormEps) return 0.0;
    return a.dot(b) / (na * nb);
}

inline void check_dims(const EnsembleBatch& batch, const std::vector<Index>& expected,
                       const std::string& what) {
    const auto got = batch.dims();
    if (got.size() != expected.size()) {
        throw InvalidInput(what + ": expected " + std::to_string(expected.size()) + " views, got " +
                           std::to_string(got.size()));
    }
    for (std::size_t j = 0; j < got.size(); ++j) {
        if (got[j] != expected[j]) {
            throw InvalidInput(what + ": view " + std::to_string(j) + " ('" +
                               batch.view(j).encoder_id() + "') has dim " +
                               std::to_string(got[j]) + ", expected " +
                               std::to_string(expected[j]));
        }
    }
}

/// Seeded generator with platform-independent draws (the std distributions
/// are implementation-defined, so they are avoided for anything persisted).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    /// Uniform in {0, ..., n-1}.
    std::uint64_t index(std::uint64_t n) { return engine_() % n; }

    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            std::swap(first[i - 1], first[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace metaemb
