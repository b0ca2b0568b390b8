#pragma once

// Cross-view autoencoder meta-embedding. Each view j gets an encoder
// E_j: R^{d_j} -> R^d and a decoder D_j: R^d -> R^{d_j}. Training minimizes
//
//     L(x_1..x_J) = sum_j sum_k loss(x_k, D_k(E_j(x_j)))
//
// (J^2 terms) with Adam. The meta-embedding is sum_j E_j(x_j).

#include "metaemb/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace metaemb {

enum class LossKind { Mse, Mae, Kld, CosSq };

inline const char* to_string(LossKind k) {
    switch (k) {
        case LossKind::Mse: return "mse";
        case LossKind::Mae: return "mae";
        case LossKind::Kld: return "kld";
        case LossKind::CosSq: return "cossq";
    }
    return "?";
}

inline LossKind parse_loss_kind(const std::string& s) {
    if (s == "mse") return LossKind::Mse;
    if (s == "mae") return LossKind::Mae;
    if (s == "kld") return LossKind::Kld;
    if (s == "cossq" || s == "cos") return LossKind::CosSq;
    throw InvalidInput("unknown loss '" + s + "' (expected mse, mae, kld or cossq)");
}

struct Layer {
    Matrix weight;  // out x in
    Vector bias;    // out
};

/// Fully connected net; ReLU after every hidden layer, linear output.
struct FeedForwardNet {
    std::vector<Layer> layers;

    Index input_dim() const { return layers.front().weight.cols(); }
    Index output_dim() const { return layers.back().weight.rows(); }
    Index hidden_count() const { return static_cast<Index>(layers.size()) - 1; }

    /// Rows of `x` are samples.
    Matrix forward(const Matrix& x) const {
        Matrix a = x;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            Matrix pre = (a * layers[l].weight.transpose()).rowwise() + layers[l].bias.transpose();
            a = l + 1 < layers.size() ? Matrix(pre.cwiseMax(0.0)) : std::move(pre);
        }
        return a;
    }
};

struct AeConfig {
    Index d = kDefaultDim;
    LossKind loss = LossKind::Kld;
    int hidden_count = 1;
    int epochs = 500;
    Index batch_size = 10000;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
};

struct AeModel {
    std::vector<FeedForwardNet> encoders;
    std::vector<FeedForwardNet> decoders;
    LossKind loss_kind = LossKind::Kld;
    Index d = 0;
    AeConfig config;  // echo of the fitting configuration
    std::vector<double> train_log;
};

namespace detail {

inline void check_finite_loss(double v) {
    if (!std::isfinite(v)) throw NumericalError("reconstruction loss is not finite");
}

/// Row-wise log-softmax.
inline Matrix log_softmax_rows(const Matrix& x) {
    const Eigen::VectorXd m = x.rowwise().maxCoeff();
    Matrix shifted = x.colwise() - m;
    const Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix();
    return shifted.colwise() - lse;
}

/// Sum over rows of loss(target_row, recon_row). When `grad` is given it
/// receives d(sum)/d(recon), scaled by `grad_scale`.
inline double batch_loss(LossKind kind, const Matrix& t, const Matrix& r, Matrix* grad,
                         double grad_scale = 1.0) {
    const double n = static_cast<double>(t.cols());
    switch (kind) {
        case LossKind::Mse: {
            const Matrix diff = r - t;
            if (grad) *grad = (2.0 * grad_scale / n) * diff;
            return diff.squaredNorm() / n;
        }
        case LossKind::Mae: {
            const Matrix diff = r - t;
            if (grad) *grad = (grad_scale / n) * diff.array().sign().matrix();
            return diff.cwiseAbs().sum() / n;
        }
        case LossKind::Kld: {
            const Matrix log_p = log_softmax_rows(t);
            const Matrix log_q = log_softmax_rows(r);
            const Matrix p = log_p.array().exp().matrix();
            if (grad) *grad = grad_scale * (log_q.array().exp().matrix() - p);
            return (p.array() * (log_p - log_q).array()).sum();
        }
        case LossKind::CosSq: {
            const Eigen::VectorXd nt = t.rowwise().norm();
            const Eigen::VectorXd nr = r.rowwise().norm();
            if (grad) grad->resize(r.rows(), r.cols());
            double total = 0.0;
            for (Index s = 0; s < t.rows(); ++s) {
                if (nt(s) < kZeroNormEps || nr(s) < kZeroNormEps) {
                    // cos is taken as 0 for a zero vector
                    total += 1.0;
                    if (grad) grad->row(s).setZero();
                    continue;
                }
                const double c = t.row(s).dot(r.row(s)) / (nt(s) * nr(s));
                total += (1.0 - c) * (1.0 - c);
                if (grad) {
                    grad->row(s) = (-2.0 * (1.0 - c) * grad_scale) *
                                   (t.row(s) / (nt(s) * nr(s)) - c * r.row(s) / (nr(s) * nr(s)));
                }
            }
            return total;
        }
    }
    return 0.0;
}

struct NetCache {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
    Matrix output;
};

inline NetCache forward_cached(const FeedForwardNet& net, const Matrix& x) {
    NetCache c;
    Matrix a = x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        c.inputs.push_back(a);
        Matrix pre = (a * net.layers[l].weight.transpose()).rowwise() +
                     net.layers[l].bias.transpose();
        a = l + 1 < net.layers.size() ? Matrix(pre.cwiseMax(0.0)) : pre;
        c.pre.push_back(std::move(pre));
    }
    c.output = std::move(a);
    return c;
}

/// Accumulates parameter gradients into `grad` and returns d loss / d input.
inline Matrix backward(const FeedForwardNet& net, const NetCache& c, Matrix d_out,
                       FeedForwardNet& grad) {
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        if (l + 1 < net.layers.size()) {
            d_out = d_out.cwiseProduct((c.pre[l].array() > 0.0).cast<double>().matrix());
        }
        grad.layers[l].weight += d_out.transpose() * c.inputs[l];
        grad.layers[l].bias += d_out.colwise().sum().transpose();
        d_out = d_out * net.layers[l].weight;
    }
    return d_out;
}

inline FeedForwardNet zeros_like(const FeedForwardNet& net) {
    FeedForwardNet z;
    for (const auto& layer : net.layers) {
        z.layers.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                            Vector::Zero(layer.bias.size())});
    }
    return z;
}

inline FeedForwardNet init_net(Index in, Index out, Index width, int hidden, Rng& rng) {
    FeedForwardNet net;
    Index fan_in = in;
    for (int l = 0; l <= hidden; ++l) {
        const Index fan_out = l == hidden ? out : width;
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Layer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
        for (Index r = 0; r < fan_out; ++r) {
            for (Index c = 0; c < fan_in; ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
        }
        net.layers.push_back(std::move(layer));
        fan_in = fan_out;
    }
    return net;
}

template <typename F>
void for_each_net(AeModel& m, F&& f) {
    for (auto& n : m.encoders) f(n);
    for (auto& n : m.decoders) f(n);
}

template <typename F>
void for_each_net(const AeModel& m, F&& f) {
    for (const auto& n : m.encoders) f(n);
    for (const auto& n : m.decoders) f(n);
}

}  // namespace detail

/// Single-pair reconstruction loss, exposed for testing and diagnostics.
inline double reconstruction_loss(LossKind kind, const Vector& target, const Vector& recon) {
    if (target.size() != recon.size()) throw InvalidInput("reconstruction_loss: length mismatch");
    if (!target.allFinite() || !recon.allFinite()) {
        throw NumericalError("reconstruction_loss: non-finite input");
    }
    const double v = detail::batch_loss(kind, target.transpose(), recon.transpose(), nullptr);
    detail::check_finite_loss(v);
    return v;
}

inline Index parameter_count(const AeModel& model) {
    Index n = 0;
    detail::for_each_net(model, [&](const FeedForwardNet& net) {
        for (const auto& l : net.layers) n += l.weight.size() + l.bias.size();
    });
    return n;
}

/// Parameters in a fixed order: encoders then decoders, per layer the
/// weight (column-major) then the bias.
inline Vector flatten_parameters(const AeModel& model) {
    Vector out(parameter_count(model));
    Index pos = 0;
    detail::for_each_net(model, [&](const FeedForwardNet& net) {
        for (const auto& l : net.layers) {
            out.segment(pos, l.weight.size()) = l.weight.reshaped();
            pos += l.weight.size();
            out.segment(pos, l.bias.size()) = l.bias;
            pos += l.bias.size();
        }
    });
    return out;
}

inline void assign_parameters(AeModel& model, const Vector& flat) {
    if (flat.size() != parameter_count(model)) throw InvalidInput("parameter vector has wrong size");
    Index pos = 0;
    detail::for_each_net(model, [&](FeedForwardNet& net) {
        for (auto& l : net.layers) {
            l.weight.reshaped() = flat.segment(pos, l.weight.size());
            pos += l.weight.size();
            l.bias = flat.segment(pos, l.bias.size());
            pos += l.bias.size();
        }
    });
}

namespace detail {

inline void check_ae_inputs(const AeModel& model, const std::vector<Matrix>& xs) {
    if (xs.size() != model.encoders.size()) {
        throw InvalidInput("autoencoder expects " + std::to_string(model.encoders.size()) +
                           " views, got " + std::to_string(xs.size()));
    }
    for (std::size_t j = 0; j < xs.size(); ++j) {
        if (xs[j].cols() != model.encoders[j].input_dim()) {
            throw InvalidInput("autoencoder view " + std::to_string(j) + " has dim " +
                               std::to_string(xs[j].cols()) + ", expected " +
                               std::to_string(model.encoders[j].input_dim()));
        }
        if (xs[j].rows() != xs.front().rows()) throw InvalidInput("autoencoder views misaligned");
    }
}

}  // namespace detail

struct LossAndGradient {
    double loss = 0.0;  // mean over samples of the J^2-term objective
    Vector gradient;    // flattened like flatten_parameters
};

/// Objective averaged over the rows of `xs` (one matrix per view, rows aligned).
inline LossAndGradient loss_and_gradient(const AeModel& model, const std::vector<Matrix>& xs,
                                         bool with_gradient = true) {
    detail::check_ae_inputs(model, xs);
    const std::size_t views = xs.size();
    const Index n = xs.front().rows();
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<FeedForwardNet> enc_grad, dec_grad;
    for (std::size_t j = 0; j < views; ++j) {
        enc_grad.push_back(detail::zeros_like(model.encoders[j]));
        dec_grad.push_back(detail::zeros_like(model.decoders[j]));
    }

    double total = 0.0;
    for (std::size_t j = 0; j < views; ++j) {
        const detail::NetCache enc = detail::forward_cached(model.encoders[j], xs[j]);
        Matrix d_code = Matrix::Zero(enc.output.rows(), enc.output.cols());
        for (std::size_t k = 0; k < views; ++k) {
            const detail::NetCache dec = detail::forward_cached(model.decoders[k], enc.output);
            Matrix d_recon;
            total += detail::batch_loss(model.loss_kind, xs[k], dec.output,
                                        with_gradient ? &d_recon : nullptr, inv_n);
            if (with_gradient) d_code += detail::backward(model.decoders[k], dec, d_recon, dec_grad[k]);
        }
        if (with_gradient) detail::backward(model.encoders[j], enc, d_code, enc_grad[j]);
    }

    LossAndGradient out;
    out.loss = total * inv_n;
    if (with_gradient) {
        AeModel shaped;
        shaped.encoders = std::move(enc_grad);
        shaped.decoders = std::move(dec_grad);
        out.gradient = flatten_parameters(shaped);
    }
    return out;
}

/// Sum of all J^2 reconstruction terms for one aligned sample (one row per view).
inline double total_loss(const AeModel& model, const std::vector<Vector>& rows) {
    std::vector<Matrix> xs;
    for (const auto& r : rows) xs.emplace_back(r.transpose());
    const double v = loss_and_gradient(model, xs, false).loss;
    detail::check_finite_loss(v);
    return v;
}

inline AeModel init_ae(const std::vector<Index>& dims, const AeConfig& config) {
    if (config.d < 1) throw InvalidInput("autoencoder dim must be positive");
    if (config.hidden_count < 0 || config.hidden_count > 2) {
        throw InvalidInput("hidden layer count must be 0, 1 or 2");
    }
    Rng rng(config.seed);
    AeModel model;
    model.loss_kind = config.loss;
    model.d = config.d;
    model.config = config;
    for (Index dj : dims) {
        model.encoders.push_back(detail::init_net(dj, config.d, config.d, config.hidden_count, rng));
    }
    for (Index dj : dims) {
        model.decoders.push_back(detail::init_net(config.d, dj, config.d, config.hidden_count, rng));
    }
    return model;
}

/// Adam on the J^2 objective; one epoch is a full shuffled pass over the rows.
inline AeModel fit_ae(const EnsembleBatch& batch, const AeConfig& config) {
    if (config.epochs < 1) throw InvalidInput("epochs must be >= 1");
    if (config.batch_size < 1) throw InvalidInput("batch size must be >= 1");
    if (!(config.lr > 0.0)) throw InvalidInput("learning rate must be positive");

    AeModel model = init_ae(batch.dims(), config);
    const Index n = batch.n_sentences();
    const Index bs = std::min(config.batch_size, n);

    Vector params = flatten_parameters(model);
    Vector m = Vector::Zero(params.size());
    Vector v = Vector::Zero(params.size());
    std::uint64_t step = 0;

    // Shuffling draws from its own stream so that init stays comparable across runs.
    Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});

    std::vector<Matrix> xs(batch.size());
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order.begin(), order.end());
        double epoch_sum = 0.0;
        for (Index start = 0; start < n; start += bs) {
            const Index count = std::min(bs, n - start);
            for (std::size_t j = 0; j < batch.size(); ++j) {
                const Matrix& full = batch.view(j).matrix();
                xs[j].resize(count, full.cols());
                for (Index s = 0; s < count; ++s) {
                    xs[j].row(s) = full.row(order[static_cast<std::size_t>(start + s)]);
                }
            }
            const LossAndGradient lg = loss_and_gradient(model, xs);
            if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) {
                throw NumericalError("autoencoder training diverged at epoch " +
                                     std::to_string(epoch + 1));
            }
            epoch_sum += lg.loss * static_cast<double>(count);

            ++step;
            m = config.beta1 * m + (1.0 - config.beta1) * lg.gradient;
            v = config.beta2 * v + (1.0 - config.beta2) * lg.gradient.cwiseAbs2();
            const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
            params.array() -= config.lr * (m.array() / bc1) /
                              ((v.array() / bc2).sqrt() + config.adam_eps);
            assign_parameters(model, params);
        }
        const double epoch_loss = epoch_sum / static_cast<double>(n);
        if (!std::isfinite(epoch_loss) || !params.allFinite()) {
            throw NumericalError("autoencoder training diverged at epoch " + std::to_string(epoch + 1));
        }
        model.train_log.push_back(epoch_loss);
    }
    return model;
}

inline EmbeddingView apply_ae(const AeModel& model, const EnsembleBatch& batch) {
    std::vector<Index> dims;
    for (const auto& e : model.encoders) dims.push_back(e.input_dim());
    check_dims(batch, dims, "apply ae");
    Matrix out = Matrix::Zero(batch.n_sentences(), model.d);
    for (std::size_t j = 0; j < batch.size(); ++j) {
        out += model.encoders[j].forward(batch.view(j).matrix());
    }
    return EmbeddingView("meta:ae", std::move(out));
}

}  // namespace metaemb
