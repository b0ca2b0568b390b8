#pragma once

// File formats.
//
// Embedding file (all integers little-endian):
//   "METAEMB1" | u32 id_len | id (UTF-8) | u64 rows | u64 cols | u8 dtype | payload
// dtype 0 = float32, 1 = float64; payload is row-major.
//
// Model file:
//   "METAMDL1" | u32 version | u8 kind | u32 n_config | (str key, str value)*
//   | u32 n_tensors | tensor*
// where str is u32 length + bytes and each tensor is an embedding-file block
// whose id is the tensor name (always float64).
//
// STS file: UTF-8 text, one record per line, tab-separated
//   subset <TAB> index_a <TAB> index_b <TAB> gold
// with '#' comment lines and blank lines ignored.

#include "metaemb/core.hpp"
#include "metaemb/eval.hpp"
#include "metaemb/fusion.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace metaemb {

enum class DType : std::uint8_t { Float32 = 0, Float64 = 1 };

inline constexpr std::string_view kEmbeddingMagic = "METAEMB1";
inline constexpr std::string_view kModelMagic = "METAMDL1";
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}

    void bytes(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

    template <typename U>
    void uint(U v) {
        std::array<unsigned char, sizeof(U)> b{};
        for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(b.data(), b.size());
    }

    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
    void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }

    void str(std::string_view s) {
        uint(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

private:
    std::ostream& os_;
};

class Reader {
public:
    Reader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

    void bytes(void* p, std::size_t n, const char* what) {
        is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n) {
            throw FormatError(source_ + ": truncated " + what + " (expected " + std::to_string(n) +
                              " bytes, got " + std::to_string(is_.gcount()) + ")");
        }
    }

    template <typename U>
    U uint(const char* what) {
        std::array<unsigned char, sizeof(U)> b{};
        bytes(b.data(), b.size(), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
        return v;
    }

    std::string str(const char* what, std::uint32_t max_len = 1u << 24) {
        const auto n = uint<std::uint32_t>(what);
        if (n > max_len) throw FormatError(source_ + ": implausible " + std::string(what) + " length");
        std::string s(n, '\0');
        bytes(s.data(), n, what);
        return s;
    }

    /// Bytes left in the stream from the current position.
    std::uint64_t remaining() {
        const auto here = is_.tellg();
        is_.seekg(0, std::ios::end);
        const auto end = is_.tellg();
        is_.seekg(here);
        return static_cast<std::uint64_t>(end - here);
    }

    const std::string& source() const { return source_; }

private:
    std::istream& is_;
    std::string source_;
};

inline void write_matrix_block(Writer& w, std::string_view id, const Matrix& m, DType dtype) {
    w.bytes(kEmbeddingMagic.data(), kEmbeddingMagic.size());
    w.str(id);
    w.uint(static_cast<std::uint64_t>(m.rows()));
    w.uint(static_cast<std::uint64_t>(m.cols()));
    w.uint(static_cast<std::uint8_t>(dtype));
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            if (dtype == DType::Float64) {
                w.f64(m(r, c));
            } else {
                w.f32(static_cast<float>(m(r, c)));
            }
        }
    }
}

struct MatrixBlock {
    std::string id;
    Matrix matrix;
    DType dtype = DType::Float64;
};

/// Reads one block. With `exact_end`, trailing bytes are an error.
inline MatrixBlock read_matrix_block(Reader& rd, bool exact_end) {
    char magic[8];
    rd.bytes(magic, sizeof magic, "magic");
    if (std::string_view(magic, sizeof magic) != kEmbeddingMagic) {
        throw FormatError(rd.source() + ": bad magic, expected METAEMB1");
    }
    MatrixBlock b;
    b.id = rd.str("encoder id");
    const auto rows = rd.uint<std::uint64_t>("row count");
    const auto cols = rd.uint<std::uint64_t>("column count");
    const auto dtype = rd.uint<std::uint8_t>("dtype");
    if (dtype > 1) throw FormatError(rd.source() + ": unknown dtype " + std::to_string(dtype));
    b.dtype = static_cast<DType>(dtype);
    const std::uint64_t elem = b.dtype == DType::Float64 ? 8 : 4;
    constexpr std::uint64_t kMaxElems = std::uint64_t{1} << 40;
    if (rows > kMaxElems || cols > kMaxElems || (cols != 0 && rows > kMaxElems / cols)) {
        throw FormatError(rd.source() + ": implausible shape " + std::to_string(rows) + "x" +
                          std::to_string(cols));
    }
    const std::uint64_t expected = rows * cols * elem;
    const std::uint64_t available = rd.remaining();
    if (available < expected || (exact_end && available != expected)) {
        throw FormatError(rd.source() + ": payload size mismatch for '" + b.id + "' (expected " +
                          std::to_string(expected) + " bytes, found " + std::to_string(available) + ")");
    }
    std::vector<unsigned char> raw(expected);
    rd.bytes(raw.data(), raw.size(), "payload");
    b.matrix.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    const unsigned char* p = raw.data();
    for (Index r = 0; r < b.matrix.rows(); ++r) {
        for (Index c = 0; c < b.matrix.cols(); ++c) {
            std::uint64_t bits = 0;
            for (std::uint64_t i = 0; i < elem; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
            p += elem;
            b.matrix(r, c) = elem == 8 ? std::bit_cast<double>(bits)
                                       : static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(bits)));
        }
    }
    return b;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open '" + path.string() + "' for reading");
    return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot open '" + path.string() + "' for writing");
    return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw InvalidInput("write to '" + path.string() + "' failed");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Embedding files

inline void write_embeddings(std::ostream& os, const EmbeddingView& view, DType dtype = DType::Float64) {
    detail::Writer w(os);
    detail::write_matrix_block(w, view.encoder_id(), view.matrix(), dtype);
}

inline void write_embeddings(const std::filesystem::path& path, const EmbeddingView& view,
                             DType dtype = DType::Float64) {
    auto out = detail::open_out(path);
    write_embeddings(out, view, dtype);
    detail::finish(out, path);
}

/// Whole-stream read; float32 payloads are widened to double.
inline EmbeddingView read_embeddings(std::istream& is, const std::string& source = "<stream>") {
    detail::Reader rd(is, source);
    auto block = detail::read_matrix_block(rd, true);
    if (block.matrix.rows() < 1 || block.matrix.cols() < 1) {
        throw FormatError(source + ": embedding matrix is empty");
    }
    if (!block.matrix.allFinite()) throw InvalidInput(source + ": embedding file contains non-finite values");
    return EmbeddingView(std::move(block.id), std::move(block.matrix));
}

inline EmbeddingView read_embeddings(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    return read_embeddings(in, path.string());
}

inline EnsembleBatch read_batch(const std::vector<std::filesystem::path>& paths) {
    std::vector<EmbeddingView> views;
    for (const auto& p : paths) views.push_back(read_embeddings(p));
    return EnsembleBatch(std::move(views));
}

// ---------------------------------------------------------------------------
// STS files

inline StsDataset read_sts(std::istream& is, const std::string& source = "<stream>") {
    StsDataset ds;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& why) {
        return FormatError(source + ":" + std::to_string(line_no) + ": " + why);
    };
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;

        std::vector<std::string_view> fields;
        std::string_view rest(line);
        for (;;) {
            const auto tab = rest.find('\t');
            fields.push_back(rest.substr(0, tab));
            if (tab == std::string_view::npos) break;
            rest.remove_prefix(tab + 1);
        }
        if (fields.size() != 4) {
            throw fail("expected 4 tab-separated fields, got " + std::to_string(fields.size()));
        }
        if (fields[0].empty()) throw fail("empty subset name");

        auto parse_index = [&](std::string_view f, const char* what) {
            std::uint64_t v = 0;
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || ptr != f.data() + f.size() || f.empty() ||
                v > static_cast<std::uint64_t>(std::numeric_limits<Index>::max())) {
                throw fail(std::string("cannot parse ") + what + " '" + std::string(f) + "'");
            }
            return static_cast<Index>(v);
        };
        StsRecord rec;
        rec.index_a = parse_index(fields[1], "index_a");
        rec.index_b = parse_index(fields[2], "index_b");
        const auto [ptr, ec] = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), rec.gold);
        if (ec != std::errc() || ptr != fields[3].data() + fields[3].size() || fields[3].empty() ||
            !std::isfinite(rec.gold)) {
            throw fail("cannot parse gold score '" + std::string(fields[3]) + "'");
        }
        ds.subset(std::string(fields[0])).records.push_back(rec);
    }
    if (ds.subsets.empty()) throw FormatError(source + ": no STS records");
    return ds;
}

inline StsDataset read_sts(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    return read_sts(in, path.string());
}

inline void write_sts(std::ostream& os, const StsDataset& ds) {
    for (const auto& s : ds.subsets) {
        for (const auto& r : s.records) {
            char buf[64];
            const auto res = std::to_chars(buf, buf + sizeof buf, r.gold);
            os << s.name << '\t' << r.index_a << '\t' << r.index_b << '\t'
               << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
        }
    }
}

inline void write_sts(const std::filesystem::path& path, const StsDataset& ds) {
    auto out = detail::open_out(path);
    write_sts(out, ds);
    detail::finish(out, path);
}

// ---------------------------------------------------------------------------
// Model files

/// Generic container behind the model file: echoed config plus named tensors.
struct ModelFile {
    std::uint32_t version = kModelVersion;
    Method kind = Method::Conc;
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<std::pair<std::string, Matrix>> tensors;

    void set(std::string key, std::string value) { config.emplace_back(std::move(key), std::move(value)); }

    void put(std::string name, Matrix m) { tensors.emplace_back(std::move(name), std::move(m)); }

    const std::string& get(const std::string& key) const {
        for (const auto& [k, v] : config) {
            if (k == key) return v;
        }
        throw FormatError("model file lacks config entry '" + key + "'");
    }

    const Matrix& tensor(const std::string& name) const {
        for (const auto& [k, m] : tensors) {
            if (k == name) return m;
        }
        throw FormatError("model file lacks tensor '" + name + "'");
    }
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(const std::string& s, const std::string& key) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw FormatError("model config '" + key + "' has bad value '" + s + "'");
    }
    return v;
}

inline Matrix as_column(const Vector& v) { return v; }

inline Matrix as_column(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

inline Matrix dims_column(const std::vector<Index>& dims) {
    Vector v(static_cast<Index>(dims.size()));
    for (std::size_t i = 0; i < dims.size(); ++i) v(static_cast<Index>(i)) = static_cast<double>(dims[i]);
    return v;
}

inline Vector column_of(const ModelFile& f, const std::string& name) {
    const Matrix& m = f.tensor(name);
    if (m.cols() != 1) throw FormatError("model tensor '" + name + "' is not a column vector");
    return m.col(0);
}

inline std::vector<Index> dims_of(const ModelFile& f, const std::string& name) {
    const Vector v = column_of(f, name);
    std::vector<Index> out;
    for (Index i = 0; i < v.size(); ++i) {
        if (!(v(i) >= 1.0) || v(i) != std::floor(v(i))) throw FormatError("model tensor '" + name + "' holds a bad dim");
        out.push_back(static_cast<Index>(v(i)));
    }
    return out;
}

inline void put_net(ModelFile& f, const std::string& prefix, const FeedForwardNet& net) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        f.put(prefix + ".layer" + std::to_string(l) + ".weight", net.layers[l].weight);
        f.put(prefix + ".layer" + std::to_string(l) + ".bias", net.layers[l].bias);
    }
}

inline FeedForwardNet get_net(const ModelFile& f, const std::string& prefix, int layers) {
    FeedForwardNet net;
    for (int l = 0; l < layers; ++l) {
        Layer layer{f.tensor(prefix + ".layer" + std::to_string(l) + ".weight"),
                    column_of(f, prefix + ".layer" + std::to_string(l) + ".bias")};
        if (layer.bias.size() != layer.weight.rows() ||
            (l > 0 && layer.weight.cols() != net.layers.back().weight.rows())) {
            throw FormatError("model network '" + prefix + "' has inconsistent layer shapes");
        }
        net.layers.push_back(std::move(layer));
    }
    return net;
}

}  // namespace detail

inline ModelFile to_model_file(const FusionModel& model) {
    ModelFile f;
    f.kind = method_of(model);
    if (const auto* m = std::get_if<NaiveModel>(&model)) {
        f.set("views", std::to_string(m->encoder_ids.size()));
        for (std::size_t j = 0; j < m->encoder_ids.size(); ++j) {
            f.set("encoder." + std::to_string(j), m->encoder_ids[j]);
        }
        f.set("output_dim", std::to_string(m->output_dim));
        f.put("view_dims", detail::dims_column(m->expected_dims));
    } else if (const auto* m = std::get_if<SvdModel>(&model)) {
        f.set("d", std::to_string(m->d));
        f.put("view_dims", detail::dims_column(m->view_dims));
        f.put("projection", m->projection);
        f.put("mean", m->mean);
        f.put("singular_values", m->singular_values);
    } else if (const auto* m = std::get_if<GccaModel>(&model)) {
        f.set("d", std::to_string(m->d));
        f.set("tau", detail::fmt_double(m->tau));
        f.set("views", std::to_string(m->thetas.size()));
        for (std::size_t j = 0; j < m->thetas.size(); ++j) {
            f.put("theta." + std::to_string(j), m->thetas[j]);
            f.put("mean." + std::to_string(j), m->means[j]);
        }
        f.put("eigenvalues", m->eigenvalues);
    } else if (const auto* m = std::get_if<AeModel>(&model)) {
        const AeConfig& c = m->config;
        f.set("d", std::to_string(m->d));
        f.set("loss", to_string(m->loss_kind));
        f.set("hidden", std::to_string(m->encoders.front().hidden_count()));
        f.set("epochs", std::to_string(c.epochs));
        f.set("batch_size", std::to_string(c.batch_size));
        f.set("lr", detail::fmt_double(c.lr));
        f.set("beta1", detail::fmt_double(c.beta1));
        f.set("beta2", detail::fmt_double(c.beta2));
        f.set("adam_eps", detail::fmt_double(c.adam_eps));
        f.set("seed", std::to_string(c.seed));
        f.set("views", std::to_string(m->encoders.size()));
        for (std::size_t j = 0; j < m->encoders.size(); ++j) {
            detail::put_net(f, "encoder." + std::to_string(j), m->encoders[j]);
            detail::put_net(f, "decoder." + std::to_string(j), m->decoders[j]);
        }
        if (!m->train_log.empty()) f.put("train_log", detail::as_column(m->train_log));
    }
    return f;
}

inline FusionModel from_model_file(const ModelFile& f) {
    using detail::parse_number;
    switch (f.kind) {
        case Method::Conc:
        case Method::Avg: {
            NaiveModel m;
            m.kind = f.kind == Method::Conc ? NaiveKind::Conc : NaiveKind::Avg;
            m.expected_dims = detail::dims_of(f, "view_dims");
            const auto views = parse_number<std::size_t>(f.get("views"), "views");
            if (views != m.expected_dims.size()) throw FormatError("naive model view count mismatch");
            for (std::size_t j = 0; j < views; ++j) m.encoder_ids.push_back(f.get("encoder." + std::to_string(j)));
            m.output_dim = parse_number<Index>(f.get("output_dim"), "output_dim");
            if (m.output_dim != naive_output_dim(m.kind, m.expected_dims)) {
                throw FormatError("naive model output dim inconsistent with view dims");
            }
            return m;
        }
        case Method::Svd: {
            SvdModel m;
            m.d = parse_number<Index>(f.get("d"), "d");
            m.view_dims = detail::dims_of(f, "view_dims");
            m.projection = f.tensor("projection");
            m.mean = detail::column_of(f, "mean");
            m.singular_values = detail::column_of(f, "singular_values");
            Index total = 0;
            for (Index dj : m.view_dims) total += dj;
            if (m.projection.rows() != total || m.projection.cols() != m.d || m.mean.size() != total ||
                m.singular_values.size() != m.d) {
                throw FormatError("svd model tensors have inconsistent shapes");
            }
            return m;
        }
        case Method::Gcca: {
            GccaModel m;
            m.d = parse_number<Index>(f.get("d"), "d");
            m.tau = parse_number<double>(f.get("tau"), "tau");
            const auto views = parse_number<std::size_t>(f.get("views"), "views");
            for (std::size_t j = 0; j < views; ++j) {
                m.thetas.push_back(f.tensor("theta." + std::to_string(j)));
                m.means.push_back(detail::column_of(f, "mean." + std::to_string(j)));
                if (m.thetas.back().rows() != m.d || m.thetas.back().cols() != m.means.back().size()) {
                    throw FormatError("gcca model tensors have inconsistent shapes");
                }
            }
            m.eigenvalues = detail::column_of(f, "eigenvalues");
            return m;
        }
        case Method::Ae: {
            AeModel m;
            AeConfig& c = m.config;
            m.d = c.d = parse_number<Index>(f.get("d"), "d");
            m.loss_kind = c.loss = parse_loss_kind(f.get("loss"));
            c.hidden_count = parse_number<int>(f.get("hidden"), "hidden");
            c.epochs = parse_number<int>(f.get("epochs"), "epochs");
            c.batch_size = parse_number<Index>(f.get("batch_size"), "batch_size");
            c.lr = parse_number<double>(f.get("lr"), "lr");
            c.beta1 = parse_number<double>(f.get("beta1"), "beta1");
            c.beta2 = parse_number<double>(f.get("beta2"), "beta2");
            c.adam_eps = parse_number<double>(f.get("adam_eps"), "adam_eps");
            c.seed = parse_number<std::uint64_t>(f.get("seed"), "seed");
            if (c.hidden_count < 0 || c.hidden_count > 2) throw FormatError("ae model hidden count out of range");
            const auto views = parse_number<std::size_t>(f.get("views"), "views");
            for (std::size_t j = 0; j < views; ++j) {
                m.encoders.push_back(detail::get_net(f, "encoder." + std::to_string(j), c.hidden_count + 1));
                m.decoders.push_back(detail::get_net(f, "decoder." + std::to_string(j), c.hidden_count + 1));
                if (m.encoders.back().output_dim() != m.d || m.decoders.back().input_dim() != m.d ||
                    m.decoders.back().output_dim() != m.encoders.back().input_dim()) {
                    throw FormatError("ae model networks have inconsistent shapes");
                }
            }
            for (const auto& [name, t] : f.tensors) {
                if (name == "train_log") {
                    const Vector log = detail::column_of(f, "train_log");
                    m.train_log.assign(log.data(), log.data() + log.size());
                }
            }
            return m;
        }
    }
    throw FormatError("unknown model kind");
}

inline void write_model_file(std::ostream& os, const ModelFile& f) {
    detail::Writer w(os);
    w.bytes(kModelMagic.data(), kModelMagic.size());
    w.uint(f.version);
    w.uint(static_cast<std::uint8_t>(f.kind));
    w.uint(static_cast<std::uint32_t>(f.config.size()));
    for (const auto& [k, v] : f.config) {
        w.str(k);
        w.str(v);
    }
    w.uint(static_cast<std::uint32_t>(f.tensors.size()));
    for (const auto& [name, m] : f.tensors) detail::write_matrix_block(w, name, m, DType::Float64);
}

inline ModelFile read_model_file(std::istream& is, const std::string& source = "<stream>") {
    detail::Reader rd(is, source);
    char magic[8];
    rd.bytes(magic, sizeof magic, "magic");
    if (std::string_view(magic, sizeof magic) != kModelMagic) {
        throw FormatError(source + ": bad magic, expected METAMDL1");
    }
    ModelFile f;
    f.version = rd.uint<std::uint32_t>("version");
    if (f.version != kModelVersion) {
        throw FormatError(source + ": unsupported model format version " + std::to_string(f.version) +
                          " (expected " + std::to_string(kModelVersion) + ")");
    }
    const auto kind = rd.uint<std::uint8_t>("model kind");
    if (kind > static_cast<std::uint8_t>(Method::Ae)) {
        throw FormatError(source + ": unknown model kind " + std::to_string(kind));
    }
    f.kind = static_cast<Method>(kind);
    const auto n_config = rd.uint<std::uint32_t>("config count");
    for (std::uint32_t i = 0; i < n_config; ++i) {
        std::string k = rd.str("config key");
        std::string v = rd.str("config value");
        f.set(std::move(k), std::move(v));
    }
    const auto n_tensors = rd.uint<std::uint32_t>("tensor count");
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        auto block = detail::read_matrix_block(rd, false);
        if (block.dtype != DType::Float64) throw FormatError(source + ": model tensors must be float64");
        f.put(std::move(block.id), std::move(block.matrix));
    }
    if (rd.remaining() != 0) throw FormatError(source + ": trailing bytes after model data");
    return f;
}

inline void save_model(std::ostream& os, const FusionModel& model) {
    write_model_file(os, to_model_file(model));
}

inline void save_model(const std::filesystem::path& path, const FusionModel& model) {
    auto out = detail::open_out(path);
    save_model(out, model);
    detail::finish(out, path);
}

inline FusionModel load_model(std::istream& is, const std::string& source = "<stream>") {
    return from_model_file(read_model_file(is, source));
}

inline FusionModel load_model(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    return load_model(in, path.string());
}

}  // namespace metaemb
