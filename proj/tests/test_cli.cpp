#include "commands.hpp"

#include "qch/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "qch");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = qch::cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("qch_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    std::string path(const std::string& name) const { return (dir / name).string(); }
    fs::path dir;
};

} // namespace

TEST_F(Cli, SimulateFitQuery) {
    auto r = run({"simulate", "--scenario", "linear", "--n", "3000", "--q", "3", "--seed", "5", "--out", path("sim")});
    ASSERT_EQ(r.code, 0) << r.err;
    ASSERT_TRUE(fs::exists(dir / "sim" / "pvalues.tsv"));
    ASSERT_TRUE(fs::exists(dir / "sim" / "truth.tsv"));

    r = run({"fit", "--input", path("sim/pvalues.tsv"), "--out", path("fit")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "fit" / qch::kArchiveJson));
    EXPECT_FALSE(fs::exists(dir / "fit" / qch::kArchivePosteriors));

    r = run({"query", "--fit", path("fit"), "--c1", "atleast:2", "--alpha", "0.05", "--out", path("q.tsv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("rejected "), std::string::npos);
    EXPECT_NE(r.err.find("threshold "), std::string::npos);
    const auto text = slurp(dir / "q.tsv");
    EXPECT_EQ(text.rfind("item_id\ttau\trank\tlocal_fdr\trejected\tlabel\n", 0), 0u);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3001);

    // Same answer from a posterior dump in the binary archive format.
    r = run({"fit", "--input", path("sim/pvalues.tsv"), "--out", path("fitb"), "--format", "cbor", "--save-posteriors"});
    ASSERT_EQ(r.code, 0) << r.err;
    r = run({"query", "--fit", path("fitb"), "--c1", "atleast:2", "--out", path("qb.tsv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(dir / "qb.tsv"), text);
}

TEST_F(Cli, ZeroRejectionsStillSucceed) {
    ASSERT_EQ(run({"simulate", "--n", "500", "--q", "2", "--effect", "0.1", "--out", path("sim")}).code, 0);
    ASSERT_EQ(run({"fit", "--input", path("sim/pvalues.tsv"), "--out", path("fit")}).code, 0);
    const auto r = run({"query", "--fit", path("fit"), "--c1", "all", "--alpha", "0", "--out", path("q.tsv")});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("rejected 0"), std::string::npos);
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"frobnicate"}).code, 1);
    EXPECT_EQ(run({"fit", "--input", path("missing.tsv"), "--out", path("fit")}).code, 2);

    {
        std::ofstream bad(dir / "bad.tsv");
        bad << "id\tp1\tp2\na\t0.1\t0.2\nb\t0.3\n";
    }
    auto r = run({"fit", "--input", path("bad.tsv"), "--out", path("fit")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("line 3"), std::string::npos);

    {
        std::ofstream flat(dir / "flat.tsv");
        flat << "id\tp1\n";
        for (int i = 0; i < 20; ++i) flat << "r" << i << "\t0.7\n";
    }
    EXPECT_EQ(run({"fit", "--input", path("flat.tsv"), "--out", path("fit")}).code, 3);

    ASSERT_EQ(run({"simulate", "--n", "200", "--q", "2", "--out", path("sim")}).code, 0);
    ASSERT_EQ(run({"fit", "--input", path("sim/pvalues.tsv"), "--out", path("fit")}).code, 0);
    EXPECT_EQ(run({"query", "--fit", path("fit"), "--c1", "atleast:5"}).code, 1);
    EXPECT_EQ(run({"query", "--fit", path("fit"), "--c1", "nonsense"}).code, 1);
    EXPECT_EQ(run({"query", "--fit", path("fit"), "--c1", "all", "--alpha", "2"}).code, 1);
    EXPECT_EQ(run({"query", "--fit", path("nofit"), "--c1", "all"}).code, 2);
}

TEST_F(Cli, StaleInputIsRejected) {
    ASSERT_EQ(run({"simulate", "--n", "300", "--q", "2", "--out", path("sim")}).code, 0);
    ASSERT_EQ(run({"fit", "--input", path("sim/pvalues.tsv"), "--out", path("fit")}).code, 0);
    {
        std::ofstream touch(dir / "sim" / "pvalues.tsv", std::ios::app);
        touch << "extra\t0.5\t0.5\n";
    }
    const auto r = run({"query", "--fit", path("fit"), "--c1", "all", "--out", path("q.tsv")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("checksum"), std::string::npos);
}

TEST_F(Cli, BenchAndBaseline) {
    auto r = run({"bench", "--scenario", "equal", "--n", "2000", "--q", "2", "--runs", "2", "--methods", "qch,pmax",
                  "--tsv", path("b.tsv"), "--roc", path("roc.tsv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("QCH"), std::string::npos);
    EXPECT_EQ(r.out.find("IntersectFDR"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "roc.tsv"));
    EXPECT_EQ(run({"bench", "--methods", "magic"}).code, 1);

    ASSERT_EQ(run({"simulate", "--n", "500", "--q", "3", "--out", path("sim")}).code, 0);
    r = run({"baseline", "--input", path("sim/pvalues.tsv"), "--method", "intersect", "--out", path("i.tsv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("k=3"), std::string::npos);
    EXPECT_EQ(slurp(dir / "i.tsv").rfind("item_id\tstatistic\trank\tadjusted\trejected\tmethod\n", 0), 0u);
}
