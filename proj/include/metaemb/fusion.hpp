#pragma once

// One fitted combiner of any kind, plus fit/apply dispatch over the methods.

#include "metaemb/autoenc.hpp"
#include "metaemb/core.hpp"
#include "metaemb/gcca.hpp"
#include "metaemb/naive.hpp"
#include "metaemb/svd.hpp"

#include <string>
#include <variant>

namespace metaemb {

enum class Method { Conc, Avg, Svd, Gcca, Ae };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::Conc: return "conc";
        case Method::Avg: return "avg";
        case Method::Svd: return "svd";
        case Method::Gcca: return "gcca";
        case Method::Ae: return "ae";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    if (s == "conc") return Method::Conc;
    if (s == "avg") return Method::Avg;
    if (s == "svd") return Method::Svd;
    if (s == "gcca") return Method::Gcca;
    if (s == "ae") return Method::Ae;
    throw InvalidInput("unknown method '" + s + "' (expected conc, avg, svd, gcca or ae)");
}

using FusionModel = std::variant<NaiveModel, SvdModel, GccaModel, AeModel>;

inline Method method_of(const FusionModel& model) {
    struct Visitor {
        Method operator()(const NaiveModel& m) const {
            return m.kind == NaiveKind::Conc ? Method::Conc : Method::Avg;
        }
        Method operator()(const SvdModel&) const { return Method::Svd; }
        Method operator()(const GccaModel&) const { return Method::Gcca; }
        Method operator()(const AeModel&) const { return Method::Ae; }
    };
    return std::visit(Visitor{}, model);
}

struct FitOptions {
    Index d = kDefaultDim;
    double tau = kDefaultTau;
    AeConfig ae;
};

inline FusionModel fit_model(Method method, const EnsembleBatch& batch, const FitOptions& opts) {
    switch (method) {
        case Method::Conc: return make_naive(NaiveKind::Conc, batch);
        case Method::Avg: return make_naive(NaiveKind::Avg, batch);
        case Method::Svd: return fit_svd(batch, opts.d);
        case Method::Gcca: return fit_gcca(batch, opts.d, opts.tau);
        case Method::Ae: {
            AeConfig cfg = opts.ae;
            cfg.d = opts.d;
            return fit_ae(batch, cfg);
        }
    }
    throw InvalidInput("unknown method");
}

inline EmbeddingView apply_model(const FusionModel& model, const EnsembleBatch& batch) {
    struct Visitor {
        const EnsembleBatch& batch;
        EmbeddingView operator()(const NaiveModel& m) const { return apply_naive(m, batch); }
        EmbeddingView operator()(const SvdModel& m) const { return apply_svd(m, batch); }
        EmbeddingView operator()(const GccaModel& m) const { return apply_gcca(m, batch); }
        EmbeddingView operator()(const AeModel& m) const { return apply_ae(m, batch); }
    };
    return std::visit(Visitor{batch}, model);
}

}  // namespace metaemb
