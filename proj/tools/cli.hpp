#pragma once

// Command implementations behind the `metaemb` executable. Kept in a header
// so the test suite can drive the commands in-process.

#include "metaemb/metaemb.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace metaemb::cli {

namespace fs = std::filesystem;

struct RunConfig {
    std::vector<std::string> methods;
    std::vector<std::string> view_paths;
    std::vector<std::string> eval_view_paths;
    Index d = kDefaultDim;
    double tau = kDefaultTau;
    std::string loss = "kld";
    int hidden = 1;
    int epochs = 500;
    Index batch_size = 10000;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::uint64_t seed = 0;
    std::string model_path;
    std::string out_path;
    std::string sts_path;
    std::string report_path;
    std::string aggregate = "pooled";
    std::string embeddings_path;
    std::vector<std::uint64_t> seeds;
    std::string dtype = "f64";
};

struct MethodOptions {
    CLI::Option* d = nullptr;
    CLI::Option* tau = nullptr;
    std::vector<CLI::Option*> ae;
};

inline MethodOptions add_fit_options(CLI::App& cmd, RunConfig& cfg) {
    MethodOptions o;
    o.d = cmd.add_option("--d", cfg.d, "Target dimensionality (svd, gcca, ae)")->check(CLI::PositiveNumber);
    o.tau = cmd.add_option("--tau", cfg.tau, "GCCA ridge strength")->check(CLI::NonNegativeNumber);
    o.ae.push_back(cmd.add_option("--loss", cfg.loss, "AE reconstruction loss")
                       ->check(CLI::IsMember({"mse", "mae", "kld", "cossq"})));
    o.ae.push_back(cmd.add_option("--hidden", cfg.hidden, "AE hidden layers")->check(CLI::Range(0, 2)));
    o.ae.push_back(cmd.add_option("--epochs", cfg.epochs, "AE epochs")->check(CLI::PositiveNumber));
    o.ae.push_back(cmd.add_option("--batch-size", cfg.batch_size, "AE mini-batch size")->check(CLI::PositiveNumber));
    o.ae.push_back(cmd.add_option("--lr", cfg.lr, "Adam learning rate")->check(CLI::PositiveNumber));
    o.ae.push_back(cmd.add_option("--beta1", cfg.beta1, "Adam beta1")->check(CLI::Range(0.0, 1.0)));
    o.ae.push_back(cmd.add_option("--beta2", cfg.beta2, "Adam beta2")->check(CLI::Range(0.0, 1.0)));
    o.ae.push_back(cmd.add_option("--seed", cfg.seed, "AE initialization / shuffle seed"));
    return o;
}

/// Rejects options that none of the selected methods consume.
inline void check_method_options(const MethodOptions& o, const std::vector<Method>& methods) {
    auto uses = [&](std::initializer_list<Method> which) {
        for (Method m : methods) {
            for (Method w : which) {
                if (m == w) return true;
            }
        }
        return false;
    };
    if (o.d->count() > 0 && !uses({Method::Svd, Method::Gcca, Method::Ae})) {
        throw InvalidInput("--d applies only to svd, gcca and ae");
    }
    if (o.tau->count() > 0 && !uses({Method::Gcca})) throw InvalidInput("--tau applies only to gcca");
    for (const auto* opt : o.ae) {
        if (opt->count() > 0 && !uses({Method::Ae})) {
            throw InvalidInput(opt->get_name() + " applies only to ae");
        }
    }
}

inline FitOptions fit_options(const RunConfig& cfg) {
    FitOptions f;
    f.d = cfg.d;
    f.tau = cfg.tau;
    f.ae.d = cfg.d;
    f.ae.loss = parse_loss_kind(cfg.loss);
    f.ae.hidden_count = cfg.hidden;
    f.ae.epochs = cfg.epochs;
    f.ae.batch_size = cfg.batch_size;
    f.ae.lr = cfg.lr;
    f.ae.beta1 = cfg.beta1;
    f.ae.beta2 = cfg.beta2;
    f.ae.seed = cfg.seed;
    return f;
}

inline std::vector<fs::path> to_paths(const std::vector<std::string>& v) {
    return {v.begin(), v.end()};
}

inline std::string spectrum_head(const Vector& v, Index max_items = 5) {
    std::string out;
    char buf[32];
    for (Index i = 0; i < std::min(max_items, v.size()); ++i) {
        std::snprintf(buf, sizeof buf, "%s%.6g", i ? " " : "", v(i));
        out += buf;
    }
    if (v.size() > max_items) out += " ...";
    return out;
}

inline void print_fit_summary(std::ostream& out, const FusionModel& model, const EnsembleBatch& batch) {
    out << "method: " << to_string(method_of(model)) << '\n';
    out << "views:";
    for (const auto& v : batch.views()) out << ' ' << v.encoder_id() << '(' << v.dim() << ')';
    out << "\nsentences: " << batch.n_sentences() << '\n';
    if (const auto* m = std::get_if<NaiveModel>(&model)) {
        out << "output dim: " << m->output_dim << '\n';
    } else if (const auto* m = std::get_if<SvdModel>(&model)) {
        out << "output dim: " << m->d << "\nsingular values: " << spectrum_head(m->singular_values) << '\n';
    } else if (const auto* m = std::get_if<GccaModel>(&model)) {
        out << "output dim: " << m->d << "\ntau: " << m->tau
            << "\neigenvalues: " << spectrum_head(m->eigenvalues) << '\n';
    } else if (const auto* m = std::get_if<AeModel>(&model)) {
        out << "output dim: " << m->d << "\nloss: " << to_string(m->loss_kind) << " epochs: "
            << m->train_log.size() << "\nfinal loss: " << m->train_log.back() << '\n';
    }
}

inline void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw InvalidInput("cannot open '" + path.string() + "' for writing");
    os << j.dump(2) << '\n';
    if (!os) throw InvalidInput("write to '" + path.string() + "' failed");
}

inline int cmd_fit(const RunConfig& cfg, std::ostream& out) {
    const Method method = parse_method(cfg.methods.at(0));
    const EnsembleBatch batch = read_batch(to_paths(cfg.view_paths));
    const FusionModel model = fit_model(method, batch, fit_options(cfg));
    save_model(fs::path(cfg.out_path), model);
    print_fit_summary(out, model, batch);
    out << "model written to " << cfg.out_path << '\n';
    return 0;
}

inline int cmd_transform(const RunConfig& cfg, std::ostream& out) {
    const EnsembleBatch batch = read_batch(to_paths(cfg.view_paths));
    FusionModel model;
    if (!cfg.model_path.empty()) {
        model = load_model(fs::path(cfg.model_path));
    } else {
        const Method m = parse_method(cfg.methods.at(0));
        if (m != Method::Conc && m != Method::Avg) {
            throw InvalidInput(std::string("method ") + to_string(m) + " needs a fitted --model");
        }
        model = make_naive(m == Method::Conc ? NaiveKind::Conc : NaiveKind::Avg, batch);
    }
    const EmbeddingView emb = apply_model(model, batch);
    write_embeddings(fs::path(cfg.out_path), emb, cfg.dtype == "f32" ? DType::Float32 : DType::Float64);
    out << "wrote " << emb.rows() << "x" << emb.dim() << " " << emb.encoder_id() << " embeddings to "
        << cfg.out_path << '\n';
    return 0;
}

inline int cmd_eval(const RunConfig& cfg, std::ostream& out) {
    const EmbeddingView emb = read_embeddings(fs::path(cfg.embeddings_path));
    const StsDataset ds = read_sts(fs::path(cfg.sts_path));
    const EvalReport report = evaluate(emb, ds);
    out << format_table(report);
    if (!cfg.report_path.empty()) write_json(cfg.report_path, to_json(report));
    return 0;
}

struct AblationCell {
    std::optional<EvalReport> report;
    std::string error;
};

inline int cmd_ablate(const RunConfig& cfg, std::ostream& out) {
    const EnsembleBatch train = read_batch(to_paths(cfg.view_paths));
    const EnsembleBatch test =
        cfg.eval_view_paths.empty() ? train : read_batch(to_paths(cfg.eval_view_paths));
    if (test.size() != train.size()) throw InvalidInput("--eval-views must list one file per --views file");
    const StsDataset ds = read_sts(fs::path(cfg.sts_path));
    const FitOptions opts = fit_options(cfg);
    const bool pooled = cfg.aggregate == "pooled";

    std::vector<std::string> columns{"full ensemble"};
    for (const auto& id : train.encoder_ids()) columns.push_back("without " + id);

    auto run_cell = [&](Method m, const EnsembleBatch& tr, const EnsembleBatch& te) {
        AblationCell cell;
        try {
            const FusionModel model = fit_model(m, tr, opts);
            cell.report = evaluate(apply_model(model, te), ds);
        } catch (const Error& e) {
            cell.error = e.kind();
        }
        return cell;
    };

    nlohmann::ordered_json doc;
    doc["aggregate"] = cfg.aggregate;
    doc["columns"] = columns;
    doc["rows"] = nlohmann::ordered_json::array();

    std::size_t width = 16;
    for (const auto& c : columns) width = std::max(width, c.size() + 2);
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-8s", "method");
    out << buf;
    for (const auto& c : columns) {
        std::snprintf(buf, sizeof buf, "%*s", static_cast<int>(width), c.c_str());
        out << buf;
    }
    out << '\n';

    for (const auto& name : cfg.methods) {
        const Method m = parse_method(name);
        std::vector<AblationCell> cells;
        cells.push_back(run_cell(m, train, test));
        for (std::size_t j = 0; j < train.size(); ++j) {
            if (train.size() == 1) {
                cells.push_back({std::nullopt, "InvalidInput"});
                continue;
            }
            cells.push_back(run_cell(m, train.without(j), test.without(j)));
        }
        std::snprintf(buf, sizeof buf, "%-8s", name.c_str());
        out << buf;
        nlohmann::ordered_json row;
        row["method"] = name;
        row["cells"] = nlohmann::ordered_json::array();
        for (std::size_t c = 0; c < cells.size(); ++c) {
            nlohmann::ordered_json jc;
            jc["column"] = columns[c];
            std::string text;
            if (cells[c].report) {
                const Correlations& agg = pooled ? cells[c].report->aggregate_pooled : cells[c].report->aggregate_mean;
                text = format_cell(agg);
                jc["pearson"] = agg.pearson;
                jc["spearman"] = agg.spearman;
            } else {
                text = cells[c].error;
                jc["error"] = cells[c].error;
            }
            std::snprintf(buf, sizeof buf, "%*s", static_cast<int>(width), text.c_str());
            out << buf;
            row["cells"].push_back(jc);
        }
        out << '\n';
        doc["rows"].push_back(row);
    }
    if (!cfg.report_path.empty()) write_json(cfg.report_path, doc);
    return 0;
}

inline int cmd_upproject(const RunConfig& cfg, std::ostream& out) {
    const EmbeddingView view = read_embeddings(fs::path(cfg.embeddings_path));
    std::vector<std::uint64_t> seeds = cfg.seeds;
    if (seeds.empty()) {
        for (std::uint64_t s = 0; s < 10; ++s) seeds.push_back(s);
    }
    for (std::uint64_t seed : seeds) {
        const EmbeddingView projected = up_project(view, cfg.d, seed);
        const std::string path = cfg.out_path + ".seed" + std::to_string(seed) + ".emb";
        write_embeddings(fs::path(path), projected, cfg.dtype == "f32" ? DType::Float32 : DType::Float64);
        out << "seed " << seed << ": wrote " << projected.rows() << "x" << projected.dim() << " to " << path << '\n';
    }
    return 0;
}

/// Parses arguments and runs one command. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"Sentence meta-embeddings: fuse encoder outputs and evaluate them on STS"};
    app.require_subcommand(1);
    RunConfig cfg;
    const std::vector<std::string> all_methods{"conc", "avg", "svd", "gcca", "ae"};
    const auto method_check = CLI::IsMember(all_methods);

    auto* fit = app.add_subcommand("fit", "Fit a combiner on training views and save it");
    fit->add_option("--method", cfg.methods, "conc, avg, svd, gcca or ae")->required()->expected(1)->check(method_check);
    fit->add_option("--views", cfg.view_paths, "Embedding files, in ensemble order")->required()->check(CLI::ExistingFile);
    fit->add_option("--out", cfg.out_path, "Model file to write")->required();
    const MethodOptions fit_opts = add_fit_options(*fit, cfg);

    auto* transform = app.add_subcommand("transform", "Apply a fitted model (or conc/avg) to views");
    auto* model_opt = transform->add_option("--model", cfg.model_path, "Fitted model file")->check(CLI::ExistingFile);
    auto* tmethod = transform->add_option("--method", cfg.methods, "conc or avg (no model needed)")
                        ->expected(1)
                        ->check(CLI::IsMember({"conc", "avg"}));
    model_opt->excludes(tmethod);
    transform->add_option("--views", cfg.view_paths, "Embedding files, in ensemble order")->required()->check(CLI::ExistingFile);
    transform->add_option("--out", cfg.out_path, "Embedding file to write")->required();
    transform->add_option("--dtype", cfg.dtype, "Output precision")->check(CLI::IsMember({"f32", "f64"}));

    auto* eval = app.add_subcommand("eval", "Score an embedding file on an STS dataset");
    eval->add_option("--embeddings", cfg.embeddings_path, "Embedding file of unique sentences")->required()->check(CLI::ExistingFile);
    eval->add_option("--sts", cfg.sts_path, "STS pair file")->required()->check(CLI::ExistingFile);
    eval->add_option("--report", cfg.report_path, "Write the report as JSON");

    auto* ablate = app.add_subcommand("ablate", "Leave-one-encoder-out grid");
    ablate->add_option("--method", cfg.methods, "Methods (rows); default all")->check(method_check);
    ablate->add_option("--views", cfg.view_paths, "Training embedding files")->required()->check(CLI::ExistingFile);
    ablate->add_option("--eval-views", cfg.eval_view_paths, "Embedding files the STS indices refer to (default: --views)")
        ->check(CLI::ExistingFile);
    ablate->add_option("--sts", cfg.sts_path, "STS pair file")->required()->check(CLI::ExistingFile);
    ablate->add_option("--report", cfg.report_path, "Write the grid as JSON");
    ablate->add_option("--aggregate", cfg.aggregate, "pooled (STS-B style) or mean (STS12-16 style)")
        ->check(CLI::IsMember({"pooled", "mean"}));
    const MethodOptions ablate_opts = add_fit_options(*ablate, cfg);

    auto* up = app.add_subcommand("upproject", "Random up-projection baseline, one file per seed");
    up->add_option("--view", cfg.embeddings_path, "Embedding file")->required()->check(CLI::ExistingFile);
    up->add_option("--d", cfg.d, "Target dimensionality")->check(CLI::PositiveNumber);
    up->add_option("--seeds", cfg.seeds, "Seeds (default 0..9)");
    up->add_option("--out", cfg.out_path, "Output prefix; files are <prefix>.seed<k>.emb")->required();
    up->add_option("--dtype", cfg.dtype, "Output precision")->check(CLI::IsMember({"f32", "f64"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
    }

    try {
        if (fit->parsed()) {
            check_method_options(fit_opts, {parse_method(cfg.methods.at(0))});
            return cmd_fit(cfg, out);
        }
        if (transform->parsed()) {
            if (cfg.model_path.empty() && cfg.methods.empty()) {
                throw InvalidInput("transform needs --model or --method conc|avg");
            }
            return cmd_transform(cfg, out);
        }
        if (eval->parsed()) return cmd_eval(cfg, out);
        if (ablate->parsed()) {
            if (cfg.methods.empty()) cfg.methods = all_methods;
            std::vector<Method> ms;
            for (const auto& m : cfg.methods) ms.push_back(parse_method(m));
            check_method_options(ablate_opts, ms);
            return cmd_ablate(cfg, out);
        }
        if (up->parsed()) return cmd_upproject(cfg, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace metaemb::cli
