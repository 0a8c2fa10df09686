#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbm/corpus_stats.hpp"
#include "sbm/fetch.hpp"
#include "sbm/matrix_io.hpp"
#include "sbm/optimizer.hpp"

namespace sbm {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "1.0.0";

struct JobConfig {
    std::vector<std::string> inputs;
    std::vector<Precision> precisions = {Precision::Single, Precision::Double};
    std::vector<Scheme> schemes = {kBaseSchemes.begin(), kBaseSchemes.end()};
    std::string size_spec = "B64";
    std::filesystem::path output_dir;
    bool filter = true;
    std::uint64_t seed = 2016;
    std::size_t subset_size = 200;
    std::size_t trials = 50;
    unsigned threads = 0;  // 0: hardware concurrency
    FetchOptions fetch;

    std::vector<BlockSize> sizes() const { return parse_size_list(size_spec); }
};

/// A matrix loaded from a local .mtx or .sbm file, a collection id or a URL.
struct LoadedMatrix {
    std::string id;
    std::string source;
    MatrixMarketInfo info;
    SparseMatrix matrix;
    std::vector<double> values;
};

LoadedMatrix load_input(const std::string& input, const FetchOptions& fetch);

/// Per-matrix analysis document (cells of the requested space, optima,
/// savings and lower-bound metrics).
nlohmann::json analysis_json(const LoadedMatrix& loaded, const JobConfig& config);

struct CorpusRunResult {
    std::size_t inputs = 0;
    std::size_t analyzed = 0;
    std::size_t failed = 0;
    std::size_t kept = 0;
    /// 0 all succeeded, 1 some failed, 2 nothing usable.
    int exit_code = 0;
};

/// Analyzes every input in parallel and writes the report directory.
CorpusRunResult corpus_run(const JobConfig& config);

/// Writes the corpus-level report files for already computed records.
void write_corpus_reports(const std::filesystem::path& dir, std::span<const CorpusRecord> records,
                          const JobConfig& config);

/// Long-format footprint dump (id, kind, b, scheme, size, bits) and its reader,
/// so ranking and consistency can be recomputed without re-analysis.
void write_footprints_csv(const std::filesystem::path& path, std::span<const CorpusRecord> records);
std::vector<CorpusRecord> read_footprints_csv(const std::filesystem::path& path);

/// Runs `work(i)` for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& work);

}  // namespace sbm
