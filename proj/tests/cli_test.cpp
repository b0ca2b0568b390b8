#include "cli.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace metaemb;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "metaemb");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Two noisy views of a shared 3-d latent, plus an STS file over random pairs
// whose gold score is the latent cosine.
struct Fixture {
    fs::path dir, a, b, sts;

    explicit Fixture(const std::string& name) : dir(testutil::scratch_dir(name)) {
        std::mt19937_64 gen(42);
        const Index n = 60;
        const Matrix z = oracle::random_matrix(n, 3, gen);
        const Matrix a_map = oracle::random_matrix(3, 5, gen);
        const Matrix b_map = oracle::random_matrix(3, 4, gen);
        a = dir / "a.emb";
        b = dir / "b.emb";
        sts = dir / "pairs.tsv";
        write_embeddings(a, EmbeddingView("enc-a", z * a_map + 0.1 * oracle::random_matrix(n, 5, gen)));
        write_embeddings(b, EmbeddingView("enc-b", z * b_map + 0.1 * oracle::random_matrix(n, 4, gen)));
        StsDataset ds;
        std::uniform_int_distribution<Index> pick(0, n - 1);
        for (const char* subset : {"s1", "s2"}) {
            auto& s = ds.subset(subset);
            for (int k = 0; k < 40; ++k) {
                const Index i = pick(gen), j = pick(gen);
                s.records.push_back({i, j, cosine(z.row(i), z.row(j))});
            }
        }
        write_sts(sts, ds);
    }
};

}  // namespace

TEST(Cli, FitTransformEvalRoundTrip) {
    const Fixture f("cli_fit");
    const auto model = (f.dir / "gcca.mdl").string();
    const auto emb = (f.dir / "meta.emb").string();
    const auto report = (f.dir / "report.json").string();

    auto r = run_cli({"fit", "--method", "gcca", "--views", f.a.string(), f.b.string(), "--d", "3", "--tau", "0.5", "--out", model});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("eigenvalues"), std::string::npos);

    r = run_cli({"transform", "--model", model, "--views", f.a.string(), f.b.string(), "--out", emb});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_embeddings(fs::path(emb)).dim(), 3);

    r = run_cli({"eval", "--embeddings", emb, "--sts", f.sts.string(), "--report", report});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(slurp(report));
    ASSERT_EQ(j["subsets"].size(), 2u);
    for (const auto& key : {"aggregate_mean", "aggregate_pooled"}) {
        EXPECT_LE(std::abs(j[key]["pearson"].get<double>()), 1.0);
        EXPECT_LE(std::abs(j[key]["spearman"].get<double>()), 1.0);
    }
    EXPECT_EQ(j["aggregate_pooled"]["n"], 80);
}

TEST(Cli, EvalOfExactPredictionsIsPerfect) {
    const auto dir = testutil::scratch_dir("cli_exact");
    const Matrix m = testutil::mat({{1, 0}, {1, 1}, {0, 1}, {-1, 0.5}, {0.2, -1}});
    write_embeddings(dir / "e.emb", EmbeddingView("e", m));
    StsDataset ds;
    auto& s = ds.subset("only");
    for (Index i = 0; i < 5; ++i) {
        for (Index k = i + 1; k < 5; ++k) s.records.push_back({i, k, cosine(m.row(i), m.row(k))});
    }
    write_sts(dir / "p.tsv", ds);
    const auto r = run_cli({"eval", "--embeddings", (dir / "e.emb").string(), "--sts", (dir / "p.tsv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("pooled (STS-B style)           10    1.0000    1.0000"), std::string::npos) << r.out;
}

TEST(Cli, AblationReportsFailedCells) {
    const Fixture f("cli_ablate");
    const auto report = (f.dir / "grid.json").string();
    const auto r = run_cli({"ablate", "--method", "gcca", "--method", "conc", "--views", f.a.string(), f.b.string(),
                            "--sts", f.sts.string(), "--d", "2", "--report", report});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("without enc-a"), std::string::npos);
    const auto j = nlohmann::json::parse(slurp(report));
    ASSERT_EQ(j["rows"].size(), 2u);
    const auto& gcca = j["rows"][0]["cells"];
    EXPECT_TRUE(gcca[0].contains("pearson"));
    EXPECT_EQ(gcca[1]["error"], "InvalidInput");
    EXPECT_EQ(gcca[2]["error"], "InvalidInput");
    const auto& conc = j["rows"][1]["cells"];
    for (const auto& c : conc) EXPECT_TRUE(c.contains("pearson"));
}

TEST(Cli, RejectsOptionsTheMethodIgnores) {
    const Fixture f("cli_opts");
    const auto out = (f.dir / "m.mdl").string();
    EXPECT_NE(run_cli({"fit", "--method", "avg", "--views", f.a.string(), "--d", "4", "--out", out}).code, 0);
    EXPECT_NE(run_cli({"fit", "--method", "svd", "--views", f.a.string(), "--tau", "1", "--out", out}).code, 0);
    EXPECT_NE(run_cli({"fit", "--method", "gcca", "--views", f.a.string(), f.b.string(), "--loss", "mse", "--out", out}).code, 0);
    EXPECT_NE(run_cli({"fit", "--method", "ae", "--views", f.a.string(), "--loss", "bogus", "--out", out}).code, 0);
    EXPECT_NE(run_cli({"fit", "--method", "nope", "--views", f.a.string(), "--out", out}).code, 0);
    EXPECT_FALSE(fs::exists(out));
    EXPECT_EQ(run_cli({"fit", "--method", "svd", "--views", f.a.string(), f.b.string(), "--d", "4", "--out", out}).code, 0);
}

TEST(Cli, MissingFilesFail) {
    const auto dir = testutil::scratch_dir("cli_missing");
    const auto r = run_cli({"eval", "--embeddings", (dir / "nope.emb").string(), "--sts", (dir / "nope.tsv").string()});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("error"), std::string::npos);
    EXPECT_NE(run_cli({}).code, 0);
    EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, GarbageInputIsReportedNotCrashed) {
    const auto dir = testutil::scratch_dir("cli_garbage");
    { std::ofstream(dir / "bad.emb") << "not an embedding file"; }
    { std::ofstream(dir / "p.tsv") << "dev\t0\t1\t1\n"; }
    const auto r = run_cli({"eval", "--embeddings", (dir / "bad.emb").string(), "--sts", (dir / "p.tsv").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST(Cli, TransformNaiveWithoutModel) {
    const Fixture f("cli_naive");
    const auto out = (f.dir / "conc.emb").string();
    ASSERT_EQ(run_cli({"transform", "--method", "conc", "--views", f.a.string(), f.b.string(), "--out", out, "--dtype", "f32"}).code, 0);
    const EmbeddingView v = read_embeddings(fs::path(out));
    EXPECT_EQ(v.dim(), 9);
    EXPECT_NEAR(v.matrix().row(0).norm(), std::sqrt(2.0), 1e-6);
}

TEST(Cli, UpProjectWritesOneFilePerSeed) {
    const Fixture f("cli_up");
    const auto prefix = (f.dir / "up").string();
    const auto r = run_cli({"upproject", "--view", f.a.string(), "--d", "16", "--seeds", "3", "7", "--out", prefix});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_embeddings(fs::path(prefix + ".seed3.emb")).dim(), 16);
    EXPECT_TRUE(fs::exists(prefix + ".seed7.emb"));
    EXPECT_FALSE(fs::exists(prefix + ".seed0.emb"));
}

TEST(Cli, RunsAreByteIdentical) {
    const Fixture f("cli_det");
    for (const char* method : {"conc", "avg", "svd", "gcca", "ae"}) {
        std::string bytes[2];
        for (int rep = 0; rep < 2; ++rep) {
            const auto model = (f.dir / ("m" + std::to_string(rep))).string();
            const auto emb = (f.dir / ("e" + std::to_string(rep))).string();
            std::vector<std::string> args{"fit", "--method", method, "--views", f.a.string(), f.b.string(), "--out", model};
            const std::string m = method;
            if (m == "svd" || m == "gcca" || m == "ae") args.insert(args.end(), {"--d", "3"});
            if (m == "ae") args.insert(args.end(), {"--epochs", "5", "--batch-size", "16", "--seed", "9"});
            ASSERT_EQ(run_cli(args).code, 0) << method;
            ASSERT_EQ(run_cli({"transform", "--model", model, "--views", f.a.string(), f.b.string(), "--out", emb}).code, 0);
            bytes[rep] = slurp(model) + slurp(emb);
        }
        EXPECT_EQ(bytes[0], bytes[1]) << method;
    }
}
