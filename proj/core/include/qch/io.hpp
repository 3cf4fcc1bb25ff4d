#pragma once

#include "qch/baselines.hpp"
#include "qch/joint_em.hpp"
#include "qch/marginal.hpp"
#include "qch/pvalue_matrix.hpp"
#include "qch/query.hpp"
#include "qch/simulation.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace qch {

inline constexpr int kArchiveVersion = 1;
inline constexpr const char* kArchiveJson = "fit.json";
inline constexpr const char* kArchiveCbor = "fit.cbor";
inline constexpr const char* kArchiveItems = "items.txt";
inline constexpr const char* kArchivePosteriors = "posteriors.bin";
inline constexpr const char* kArchiveSummary = "summary.txt";

// Header row required; first column is the item id, the remaining Q columns
// are p-values. Tab- or comma-delimited, decided from the header line.
PValueMatrix parse_pvalue_matrix(std::istream& in);
PValueMatrix read_pvalue_matrix(const std::filesystem::path& path);
void write_pvalue_matrix(const std::filesystem::path& path, const PValueMatrix& pm,
                         const std::vector<std::string>& column_names = {});

// CRC-32 of the file contents.
std::uint32_t file_checksum(const std::filesystem::path& path);

// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

enum class ArchiveFormat { json, cbor };

// Persisted fit: everything needed to answer composed-hypothesis queries
// without refitting. The per-item marginal posteriors are not stored.
struct FitArchive {
    int format_version = kArchiveVersion;
    int num_tests = 0;
    std::size_t num_items = 0;
    double lambda = 0.5;
    std::string input_path;
    std::uint32_t input_checksum = 0;
    std::vector<std::string> item_ids;
    std::vector<MarginalFit> marginals;
    // Posteriors are present only when loaded from a posterior dump.
    JointFit joint;
};

FitArchive make_archive(const JointModel& model, const PValueMatrix& pvalues, double lambda,
                        std::string input_path, std::uint32_t input_checksum);

// Writes fit.{json,cbor}, items.txt and a readable summary.txt into dir (created if missing), plus
// posteriors.bin when with_posteriors is set and the fit carries them.
void write_archive(const std::filesystem::path& dir, const FitArchive& archive, ArchiveFormat format,
                   bool with_posteriors = false);
FitArchive read_archive(const std::filesystem::path& dir);

// Raw posterior dump: "QCHPOST1", uint64 n, uint64 K, then n*K little-endian doubles.
void write_posteriors(const std::filesystem::path& path, const PosteriorMatrix& posteriors);
PosteriorMatrix read_posteriors(const std::filesystem::path& path);

// Rebuilds the posterior matrix of an archive from the original p-values
// with one E-step at the stored weights.
PosteriorMatrix recompute_posteriors(const FitArchive& archive, const PValueMatrix& pvalues, int threads = 0);

std::string fit_summary(const FitArchive& archive);

// Columns: item_id, tau, rank, local_fdr, rejected, label.
void write_query_tsv(std::ostream& out, const std::vector<std::string>& item_ids, const QueryResult& result);
// Columns: item_id, statistic, rank, adjusted, rejected, method.
void write_baseline_tsv(std::ostream& out, const std::vector<std::string>& item_ids,
                        const BaselineResult& result);
// Columns: item_id, config.
void write_truth_tsv(std::ostream& out, const std::vector<std::string>& item_ids,
                     const std::vector<Configuration>& truth);

} // namespace qch
