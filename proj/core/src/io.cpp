#include "qch/io.hpp"

#include "qch/error.hpp"

#include <nlohmann/json.hpp>

#include <boost/crc.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace qch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kPosteriorMagic[8] = {'Q', 'C', 'H', 'P', 'O', 'S', 'T', '1'};
constexpr std::size_t kPosteriorBlock = 4096;

std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    while (true) {
        const auto pos = line.find(delim);
        out.push_back(line.substr(0, pos));
        if (pos == std::string_view::npos) break;
        line.remove_prefix(pos + 1);
    }
    return out;
}

std::string_view strip(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '"' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return in;
}

void check_written(std::ostream& out, const fs::path& path) {
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

json marginal_to_json(const MarginalFit& m) {
    return json{{"pi0", m.pi0},
                {"lambda", m.lambda},
                {"bandwidth", m.bandwidth},
                {"iterations", m.iterations},
                {"converged", m.converged},
                {"grid", {{"lo", m.g1.lo()}, {"step", m.g1.step()}, {"g1", m.g1.values()}}}};
}

MarginalFit marginal_from_json(const json& j) {
    MarginalFit m;
    m.pi0 = j.at("pi0").get<double>();
    m.lambda = j.at("lambda").get<double>();
    m.bandwidth = j.at("bandwidth").get<double>();
    m.iterations = j.at("iterations").get<int>();
    m.converged = j.at("converged").get<bool>();
    const auto& g = j.at("grid");
    m.g1 = GridDensity(g.at("lo").get<double>(), g.at("step").get<double>(),
                       g.at("g1").get<std::vector<double>>());
    return m;
}

template <class T>
void write_raw(std::ostream& out, T value) {
    static_assert(std::endian::native == std::endian::little, "posterior dump assumes little-endian");
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_raw(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
}

} // namespace

std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

PValueMatrix parse_pvalue_matrix(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::string header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!strip(line).empty()) {
            header = line;
            break;
        }
    }
    if (header.empty()) throw ParseError("missing header row", std::max<std::size_t>(line_no, 1));
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const char delim = header.find('\t') != std::string::npos ? '\t' : ',';
    const auto columns = split(header, delim);
    if (columns.size() < 2)
        throw ParseError("header needs an id column and at least one p-value column", line_no);
    const auto q_count = columns.size() - 1;
    if (q_count > static_cast<std::size_t>(kMaxTests))
        throw ParseError("at most " + std::to_string(kMaxTests) + " p-value columns are supported", line_no);

    std::vector<std::string> ids;
    std::vector<std::size_t> lines;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (strip(line).empty()) continue;
        const auto fields = split(line, delim);
        if (fields.size() != columns.size())
            throw ParseError("expected " + std::to_string(columns.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             line_no);
        const auto id = strip(fields[0]);
        if (id.empty()) throw ParseError("empty item id", line_no);
        ids.emplace_back(id);
        lines.push_back(line_no);
        for (std::size_t q = 1; q < fields.size(); ++q) {
            const auto text = strip(fields[q]);
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
                throw ParseError("non-numeric value '" + std::string(text) + "' in column '" +
                                     std::string(strip(columns[q])) + "'",
                                 line_no);
            if (!(v >= 0.0 && v <= 1.0))
                throw ParseError("p-value " + std::string(text) + " outside [0,1] in column '" +
                                     std::string(strip(columns[q])) + "'",
                                 line_no);
            values.push_back(v);
        }
    }
    // Report duplicates with their line number before the matrix re-validates.
    {
        std::vector<std::size_t> order(ids.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return ids[a] < ids[b]; });
        for (std::size_t k = 1; k < order.size(); ++k)
            if (ids[order[k]] == ids[order[k - 1]])
                throw DuplicateId("line " + std::to_string(lines[order[k]]) +
                                  ": duplicate item id '" + ids[order[k]] + "'");
    }
    return PValueMatrix(std::move(ids), static_cast<int>(q_count), std::move(values));
}

PValueMatrix read_pvalue_matrix(const fs::path& path) {
    auto in = open_in(path);
    return parse_pvalue_matrix(in);
}

void write_pvalue_matrix(const fs::path& path, const PValueMatrix& pm,
                         const std::vector<std::string>& column_names) {
    auto out = open_out(path);
    out << "item_id";
    for (int q = 0; q < pm.num_tests(); ++q) {
        out << '\t';
        if (static_cast<std::size_t>(q) < column_names.size()) out << column_names[static_cast<std::size_t>(q)];
        else out << "p" << (q + 1);
    }
    out << '\n';
    for (std::size_t i = 0; i < pm.num_items(); ++i) {
        out << pm.item_ids()[i];
        for (double v : pm.row(i)) out << '\t' << format_double(v);
        out << '\n';
    }
    check_written(out, path);
}

std::uint32_t file_checksum(const fs::path& path) {
    auto in = open_in(path, std::ios::binary);
    boost::crc_32_type crc;
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        crc.process_bytes(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return crc.checksum();
}

FitArchive make_archive(const JointModel& model, const PValueMatrix& pvalues, double lambda,
                        std::string input_path, std::uint32_t input_checksum) {
    FitArchive a;
    a.num_tests = pvalues.num_tests();
    a.num_items = pvalues.num_items();
    a.lambda = lambda;
    a.input_path = std::move(input_path);
    a.input_checksum = input_checksum;
    a.item_ids = pvalues.item_ids();
    a.marginals = model.marginals;
    for (auto& m : a.marginals) m.tau.clear();
    a.joint = model.joint;
    return a;
}

void write_posteriors(const fs::path& path, const PosteriorMatrix& posteriors) {
    auto out = open_out(path, std::ios::out | std::ios::binary);
    out.write(kPosteriorMagic, sizeof kPosteriorMagic);
    write_raw<std::uint64_t>(out, posteriors.num_items());
    write_raw<std::uint64_t>(out, posteriors.num_configs());
    // The dump is row-major; rows are gathered a block at a time.
    const std::size_t n = posteriors.num_items();
    const std::size_t k = posteriors.num_configs();
    std::vector<double> block(kPosteriorBlock * k);
    for (std::size_t first = 0; first < n; first += kPosteriorBlock) {
        const std::size_t count = std::min(kPosteriorBlock, n - first);
        posteriors.copy_rows(first, count, block.data());
        out.write(reinterpret_cast<const char*>(block.data()), static_cast<std::streamsize>(count * k * sizeof(double)));
    }
    check_written(out, path);
}

PosteriorMatrix read_posteriors(const fs::path& path) {
    auto in = open_in(path, std::ios::binary);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kPosteriorMagic, sizeof magic) != 0)
        throw InvalidData("'" + path.string() + "' is not a posterior dump");
    const auto n = read_raw<std::uint64_t>(in);
    const auto k = read_raw<std::uint64_t>(in);
    if (!in || k == 0 || k > num_configs(kMaxTests) || n > fs::file_size(path) / (k * sizeof(double)))
        throw InvalidData("posterior dump '" + path.string() + "' is truncated or corrupt");
    PosteriorMatrix out(n, k);
    std::vector<double> block(kPosteriorBlock * k);
    for (std::size_t first = 0; first < n; first += kPosteriorBlock) {
        const std::size_t count = std::min<std::size_t>(kPosteriorBlock, n - first);
        in.read(reinterpret_cast<char*>(block.data()), static_cast<std::streamsize>(count * k * sizeof(double)));
        if (!in) throw InvalidData("posterior dump '" + path.string() + "' is truncated");
        out.assign_rows(first, count, block.data());
    }
    return out;
}

void write_archive(const fs::path& dir, const FitArchive& archive, ArchiveFormat format, bool with_posteriors) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());

    const bool dump = with_posteriors && !archive.joint.posteriors.empty();
    json j{{"format", "qch-fit"},
           {"version", archive.format_version},
           {"num_tests", archive.num_tests},
           {"num_items", archive.num_items},
           {"lambda", archive.lambda},
           {"input", {{"path", archive.input_path}, {"crc32", archive.input_checksum}}},
           {"joint",
            {{"weights", archive.joint.weights},
             {"loglik_trace", archive.joint.loglik_trace},
             {"converged", archive.joint.converged},
             {"n_iter", archive.joint.n_iter}}},
           {"posteriors", dump ? json(kArchivePosteriors) : json(nullptr)}};
    j["marginals"] = json::array();
    for (const auto& m : archive.marginals) j["marginals"].push_back(marginal_to_json(m));

    // Drop the other encoding so a directory never holds two fits.
    fs::remove(dir / (format == ArchiveFormat::json ? kArchiveCbor : kArchiveJson), ec);
    if (format == ArchiveFormat::json) {
        const auto path = dir / kArchiveJson;
        auto out = open_out(path);
        out << j.dump(1) << '\n';
        check_written(out, path);
    } else {
        const auto path = dir / kArchiveCbor;
        auto out = open_out(path, std::ios::out | std::ios::binary);
        const auto bytes = json::to_cbor(j);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        check_written(out, path);
    }

    {
        const auto path = dir / kArchiveItems;
        auto out = open_out(path);
        for (const auto& id : archive.item_ids) out << id << '\n';
        check_written(out, path);
    }
    {
        const auto path = dir / kArchiveSummary;
        auto out = open_out(path);
        out << fit_summary(archive);
        check_written(out, path);
    }
    if (dump) write_posteriors(dir / kArchivePosteriors, archive.joint.posteriors);
    else fs::remove(dir / kArchivePosteriors, ec);
}

FitArchive read_archive(const fs::path& dir) {
    json j;
    try {
        if (fs::exists(dir / kArchiveJson)) {
            auto in = open_in(dir / kArchiveJson);
            j = json::parse(in);
        } else if (fs::exists(dir / kArchiveCbor)) {
            auto in = open_in(dir / kArchiveCbor, std::ios::binary);
            std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
            j = json::from_cbor(bytes);
        } else {
            throw IoError("no fit archive in '" + dir.string() + "'");
        }
    } catch (const json::exception& e) {
        throw InvalidData("corrupt fit archive in '" + dir.string() + "': " + e.what());
    }

    FitArchive a;
    try {
        if (j.at("format").get<std::string>() != "qch-fit") throw InvalidData("not a qch fit archive");
        a.format_version = j.at("version").get<int>();
        if (a.format_version != kArchiveVersion)
            throw InvalidData("unsupported archive version " + std::to_string(a.format_version));
        a.num_tests = j.at("num_tests").get<int>();
        a.num_items = j.at("num_items").get<std::size_t>();
        a.lambda = j.at("lambda").get<double>();
        a.input_path = j.at("input").at("path").get<std::string>();
        a.input_checksum = j.at("input").at("crc32").get<std::uint32_t>();
        for (const auto& m : j.at("marginals")) a.marginals.push_back(marginal_from_json(m));
        const auto& joint = j.at("joint");
        a.joint.num_tests = a.num_tests;
        a.joint.weights = joint.at("weights").get<std::vector<double>>();
        a.joint.loglik_trace = joint.at("loglik_trace").get<std::vector<double>>();
        a.joint.converged = joint.at("converged").get<bool>();
        a.joint.n_iter = joint.at("n_iter").get<int>();
        if (!j.at("posteriors").is_null())
            a.joint.posteriors = read_posteriors(dir / j.at("posteriors").get<std::string>());
    } catch (const json::exception& e) {
        throw InvalidData("malformed fit archive in '" + dir.string() + "': " + e.what());
    }
    if (a.num_tests < 1 || a.num_tests > kMaxTests || a.marginals.size() != static_cast<std::size_t>(a.num_tests) ||
        a.joint.weights.size() != num_configs(a.num_tests))
        throw InvalidData("inconsistent fit archive in '" + dir.string() + "'");

    auto in = open_in(dir / kArchiveItems);
    std::string line;
    while (std::getline(in, line)) a.item_ids.push_back(line);
    if (a.item_ids.size() != a.num_items) throw InvalidData("item list does not match the archive");
    if (!a.joint.posteriors.empty() &&
        (a.joint.posteriors.num_items() != a.num_items || a.joint.posteriors.num_configs() != a.joint.weights.size()))
        throw InvalidData("posterior dump does not match the archive");
    return a;
}

PosteriorMatrix recompute_posteriors(const FitArchive& archive, const PValueMatrix& pvalues, int threads) {
    if (pvalues.num_tests() != archive.num_tests || pvalues.num_items() != archive.num_items)
        throw InvalidData("p-value matrix does not match the archive dimensions");
    if (pvalues.item_ids() != archive.item_ids) throw InvalidData("p-value matrix items do not match the archive");
    const auto scores = probit_columns(pvalues, threads);
    const auto logdens = build_component_densities(archive.marginals, scores);
    return compute_posteriors(logdens, archive.joint.weights, threads).posteriors;
}

std::string fit_summary(const FitArchive& a) {
    std::ostringstream os;
    os << std::setprecision(6);
    os << "items\t" << a.num_items << "\ntests\t" << a.num_tests << "\nlambda\t" << a.lambda << "\n\n";
    os << "test\tpi0\tbandwidth\tfixed_point_iterations\tconverged\n";
    for (std::size_t q = 0; q < a.marginals.size(); ++q) {
        const auto& m = a.marginals[q];
        os << (q + 1) << '\t' << m.pi0 << '\t' << m.bandwidth << '\t' << m.iterations << '\t'
           << (m.converged ? "yes" : "no") << '\n';
    }
    os << "\nem_iterations\t" << a.joint.n_iter << "\nem_converged\t" << (a.joint.converged ? "yes" : "no")
       << "\nloglik\t" << std::setprecision(12)
       << (a.joint.loglik_trace.empty() ? 0.0 : a.joint.loglik_trace.back()) << std::setprecision(6) << "\n\n";

    std::vector<std::size_t> order(a.joint.weights.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](auto x, auto y) { return a.joint.weights[x] > a.joint.weights[y]; });
    os << "config\tweight\n";
    double total = 0.0;
    for (auto k : order) {
        os << Configuration(a.num_tests, static_cast<std::uint32_t>(k)).str() << '\t' << a.joint.weights[k] << '\n';
        total += a.joint.weights[k];
    }
    os << "total\t" << std::setprecision(12) << total << '\n';
    return os.str();
}

void write_query_tsv(std::ostream& out, const std::vector<std::string>& item_ids, const QueryResult& r) {
    const std::size_t n = r.tau.size();
    if (item_ids.size() != n) throw InvalidArgument("item ids do not match the query result");
    std::vector<std::size_t> rank(n);
    for (std::size_t k = 0; k < n; ++k) rank[r.order[k]] = k + 1;
    out << "item_id\ttau\trank\tlocal_fdr\trejected\tlabel\n";
    for (std::size_t i = 0; i < n; ++i) {
        out << item_ids[i] << '\t' << format_double(r.tau[i]) << '\t' << rank[i] << '\t'
            << format_double(1.0 - r.tau[i]) << '\t' << (r.rejected[i] ? 1 : 0) << '\t'
            << (r.labels[i] ? r.labels[i]->str() : std::string("NA")) << '\n';
    }
}

void write_baseline_tsv(std::ostream& out, const std::vector<std::string>& item_ids, const BaselineResult& r) {
    const std::size_t n = r.statistic.size();
    if (item_ids.size() != n) throw InvalidArgument("item ids do not match the baseline result");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return r.statistic[a] < r.statistic[b]; });
    std::vector<std::size_t> rank(n);
    for (std::size_t k = 0; k < n; ++k) rank[order[k]] = k + 1;
    out << "item_id\tstatistic\trank\tadjusted\trejected\tmethod\n";
    for (std::size_t i = 0; i < n; ++i)
        out << item_ids[i] << '\t' << format_double(r.statistic[i]) << '\t' << rank[i] << '\t'
            << format_double(r.adjusted[i]) << '\t' << (r.rejected[i] ? 1 : 0) << '\t' << to_string(r.method)
            << '\n';
}

void write_truth_tsv(std::ostream& out, const std::vector<std::string>& item_ids,
                     const std::vector<Configuration>& truth) {
    if (item_ids.size() != truth.size()) throw InvalidArgument("item ids do not match the truth labels");
    out << "item_id\tconfig\n";
    for (std::size_t i = 0; i < truth.size(); ++i) out << item_ids[i] << '\t' << truth[i].str() << '\n';
}

} // namespace qch
