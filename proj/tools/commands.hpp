#pragma once

#include "qch/io.hpp"
#include "qch/simulation.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qch::cli {

struct FitCommand {
    std::filesystem::path input;
    std::filesystem::path out;
    double lambda = 0.5;
    ArchiveFormat format = ArchiveFormat::json;
    bool save_posteriors = false;
    bool uniform_init = false;
    int threads = 0;
};

struct QueryCommand {
    std::filesystem::path fit;
    std::string c1;
    double alpha = 0.05;
    // "-" writes to stdout.
    std::string out = "-";
    // Overrides the input path recorded in the archive.
    std::optional<std::filesystem::path> input;
    int threads = 0;
};

struct SimulateCommand {
    ScenarioSpec scenario;
    std::filesystem::path out;
};

struct BenchCommand {
    ScenarioSpec scenario;
    std::vector<std::size_t> sizes;
    std::vector<int> tests;
    BenchOptions options;
    std::optional<std::filesystem::path> tsv;
    std::optional<std::filesystem::path> roc;
};

struct BaselineCommand {
    std::filesystem::path input;
    Method method = Method::pmax;
    // 0 picks the method default: 1 for pmax, Q for intersect.
    int k = 0;
    double alpha = 0.05;
    std::string out = "-";
};

// Each command writes its report to `log` and returns normally; failures are
// thrown as qch::Error.
void run_fit(const FitCommand& cmd, std::ostream& log);
void run_query(const QueryCommand& cmd, std::ostream& log);
void run_simulate(const SimulateCommand& cmd, std::ostream& log);
void run_bench(const BenchCommand& cmd, std::ostream& log);
void run_baseline(const BaselineCommand& cmd, std::ostream& log);

// Full command-line entry point; returns the process exit code.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace qch::cli
