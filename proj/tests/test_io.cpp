#include "qch/error.hpp"
#include "qch/io.hpp"
#include "qch/simulation.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace qch;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("qch_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int parse_error_line(const std::string& text) {
    std::istringstream in(text);
    try {
        parse_pvalue_matrix(in);
    } catch (const ParseError& e) {
        return e.line();
    }
    return -1;
}

} // namespace

TEST(Parse, TabAndComma) {
    std::istringstream tsv("id\tp1\tp2\na\t0.1\t0.2\nb\t1\t0\n");
    const auto m = parse_pvalue_matrix(tsv);
    EXPECT_EQ(m.num_items(), 2u);
    EXPECT_EQ(m.num_tests(), 2);
    EXPECT_DOUBLE_EQ(m(1, 0), 1.0);
    std::istringstream csv("id,p1,p2,p3\r\na,0.1,0.2,0.3\r\nb,1e-30,0.5,0.25\r\n");
    const auto c = parse_pvalue_matrix(csv);
    EXPECT_EQ(c.num_tests(), 3);
    EXPECT_DOUBLE_EQ(c(1, 0), 1e-30);
}

TEST(Parse, ErrorsCarryLineNumbers) {
    EXPECT_EQ(parse_error_line("id\tp1\na\t0.1\nb\tx\n"), 3);
    EXPECT_EQ(parse_error_line("id\tp1\tp2\na\t0.1\t0.2\nb\t0.1\n"), 3);
    EXPECT_EQ(parse_error_line("id\tp1\na\t0.1\nb\t1.2\n"), 3);
    EXPECT_EQ(parse_error_line("id\tp1\na\t0.1\nb\tnan\n"), 3);
    std::istringstream dup("id\tp1\na\t0.1\nb\t0.2\na\t0.3\n");
    EXPECT_THROW(parse_pvalue_matrix(dup), DuplicateId);
    std::istringstream empty("");
    EXPECT_THROW(parse_pvalue_matrix(empty), InvalidData);
    std::istringstream one("id\tp1\na\t0.1\n");
    EXPECT_THROW(parse_pvalue_matrix(one), InvalidData);
}

TEST(Format, ShortestRoundTrip) {
    for (double v : {0.1, 1e-300, 0.3333333333333333, 1.0, 0.0, 5e-324}) {
        const auto s = format_double(v);
        EXPECT_EQ(std::strtod(s.c_str(), nullptr), v) << s;
    }
}

TEST(Matrix, WriteReadRoundTrip) {
    const auto dir = scratch("matrix");
    ScenarioSpec spec;
    spec.n = 500;
    spec.num_tests = 3;
    CounterRng rng(2);
    const auto data = generate(spec, rng);
    write_pvalue_matrix(dir / "p.tsv", data.pmatrix);
    const auto back = read_pvalue_matrix(dir / "p.tsv");
    EXPECT_EQ(back.item_ids(), data.pmatrix.item_ids());
    EXPECT_TRUE(std::equal(back.values().begin(), back.values().end(), data.pmatrix.values().begin()));
    EXPECT_THROW(read_pvalue_matrix(dir / "missing.tsv"), IoError);
}

class ArchiveRoundTrip : public ::testing::TestWithParam<ArchiveFormat> {};

TEST_P(ArchiveRoundTrip, FitSurvivesStorage) {
    const auto dir = scratch(GetParam() == ArchiveFormat::json ? "json" : "cbor");
    ScenarioSpec spec;
    spec.n = 3000;
    spec.num_tests = 3;
    spec.delta = DeltaKind::linear;
    CounterRng rng(31);
    const auto data = generate(spec, rng);
    write_pvalue_matrix(dir / "p.tsv", data.pmatrix);
    const auto model = fit_joint(data.pmatrix);
    const auto archive = make_archive(model, data.pmatrix, 0.5, (dir / "p.tsv").string(), file_checksum(dir / "p.tsv"));

    write_archive(dir / "fit", archive, GetParam(), true);
    const auto back = read_archive(dir / "fit");
    EXPECT_EQ(back.num_tests, 3);
    EXPECT_EQ(back.num_items, spec.n);
    EXPECT_EQ(back.item_ids, data.pmatrix.item_ids());
    EXPECT_EQ(back.input_checksum, archive.input_checksum);
    EXPECT_EQ(back.joint.weights, model.joint.weights);
    EXPECT_EQ(back.joint.loglik_trace, model.joint.loglik_trace);
    EXPECT_EQ(back.joint.posteriors, model.joint.posteriors);
    for (std::size_t q = 0; q < 3; ++q) {
        EXPECT_EQ(back.marginals[q].pi0, model.marginals[q].pi0);
        EXPECT_EQ(back.marginals[q].bandwidth, model.marginals[q].bandwidth);
        EXPECT_EQ(back.marginals[q].g1, model.marginals[q].g1);
    }

    // Without the dump, a single E-step reproduces the posteriors exactly.
    write_archive(dir / "lean", archive, GetParam(), false);
    auto lean = read_archive(dir / "lean");
    EXPECT_TRUE(lean.joint.posteriors.empty());
    EXPECT_FALSE(fs::exists(dir / "lean" / kArchivePosteriors));
    EXPECT_TRUE(fs::exists(dir / "lean" / kArchiveSummary));
    lean.joint.posteriors = recompute_posteriors(lean, data.pmatrix);
    EXPECT_EQ(lean.joint.posteriors, model.joint.posteriors);

    const auto a = run_query(model.joint, at_least_k(3, 2), 0.05);
    const auto b = run_query(lean.joint, at_least_k(3, 2), 0.05);
    EXPECT_EQ(a.rejected, b.rejected);
    EXPECT_EQ(a.tau, b.tau);
}

INSTANTIATE_TEST_SUITE_P(Formats, ArchiveRoundTrip, ::testing::Values(ArchiveFormat::json, ArchiveFormat::cbor));

TEST(Archive, RejectsUnknownVersionAndMismatchedInput) {
    const auto dir = scratch("version");
    ScenarioSpec spec;
    spec.n = 200;
    CounterRng rng(1);
    const auto data = generate(spec, rng);
    const auto model = fit_joint(data.pmatrix);
    auto archive = make_archive(model, data.pmatrix, 0.5, "", 0);
    archive.format_version = 99;
    write_archive(dir, archive, ArchiveFormat::json);
    EXPECT_THROW(read_archive(dir), InvalidData);

    ScenarioSpec other = spec;
    other.num_tests = 3;
    CounterRng rng2(1);
    const auto wrong = generate(other, rng2);
    archive.format_version = kArchiveVersion;
    EXPECT_THROW(recompute_posteriors(archive, wrong.pmatrix), InvalidData);
}

TEST(Posteriors, BinaryLayout) {
    const auto dir = scratch("post");
    PosteriorMatrix m(2, 2, {0.25, 0.75, 1.0, 0.0});
    write_posteriors(dir / "p.bin", m);
    EXPECT_EQ(fs::file_size(dir / "p.bin"), 8u + 16u + 4u * 8u);
    std::ifstream in(dir / "p.bin", std::ios::binary);
    char magic[8];
    in.read(magic, 8);
    EXPECT_EQ(std::string(magic, 8), "QCHPOST1");
    EXPECT_EQ(read_posteriors(dir / "p.bin"), m);
    {
        std::ofstream trunc(dir / "bad.bin", std::ios::binary);
        trunc << "QCHPOST1";
    }
    EXPECT_THROW(read_posteriors(dir / "bad.bin"), InvalidData);
}

TEST(Tsv, QueryColumns) {
    JointFit fit;
    fit.num_tests = 1;
    fit.posteriors = PosteriorMatrix(2, 2, {0.01, 0.99, 0.9, 0.1});
    const auto r = run_query(fit, parse_config_set(1, "1"), 0.05);
    std::ostringstream os;
    write_query_tsv(os, {"a", "b"}, r);
    EXPECT_EQ(os.str(),
              "item_id\ttau\trank\tlocal_fdr\trejected\tlabel\n"
              "a\t0.99\t1\t0.010000000000000009\t1\t1\n"
              "b\t0.1\t2\t0.9\t0\tNA\n");
}
