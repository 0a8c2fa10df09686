#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sbm/matrix_io.hpp"
#include "sbm/optimizer.hpp"
#include "sbm/stats.hpp"

namespace sbm {

/// Per-precision reference metrics of one matrix. The optimum is taken over
/// the base six schemes and all 64 sizes.
struct PrecisionMetrics {
    Precision precision = Precision::Double;
    Scheme optimal_scheme;
    BlockSize optimal_size{1, 1};
    Bits optimal_bits = 0;
    Bits csr32_bits = 0;
    Bits lower_bound_bits = 0;
    double lambda = 0.0;         // savings against CSR32, percent
    double gamma_blocked = 0.0;  // optimum above lower bound, percent
    double gamma_csr32 = 0.0;    // CSR32 above lower bound, percent
};

struct CorpusRecord {
    std::string id;
    std::string kind;
    ValueField field = ValueField::Real;
    Index rows = 0;
    Index cols = 0;
    Symmetry symmetry = Symmetry::General;
    Count nnz_all = 0;
    Count nnz_stored = 0;
    VariantPair density;
    VariantPair prnnz_stddev;
    std::string fingerprint;
    std::vector<PrecisionMetrics> metrics;
    /// Footprint tables for the standard eight schemes, one per precision.
    std::vector<FootprintTable> tables;

    const PrecisionMetrics& at(Precision p) const;
    const FootprintTable& table(Precision p) const;
};

/// Computes every metric of a record; the matrix must be nonempty.
CorpusRecord make_record(std::string id, std::string kind, ValueField field,
                         const SparseMatrix& matrix, std::span<const Precision> precisions);

/// (1 - optimal / csr32) * 100.
double lambda_savings(Bits optimal_bits, Bits csr32_bits);

struct GammaMetrics {
    double blocked = 0.0;
    double csr32 = 0.0;
};

/// Percent above the lower bound for the blocked optimum and for CSR32.
GammaMetrics gamma_metrics(Bits optimal_bits, Bits csr32_bits, Bits lower_bound_bits);

/// SHA-256 over dimensions, symmetry and sorted stored coordinates, hex encoded.
std::string structure_fingerprint(const SparseMatrix& matrix);

/// Collection problem kind with a trailing " problem" removed.
std::string normalize_kind(std::string_view kind);

struct FilterOptions {
    bool enabled = true;
    Count min_nnz_all_exclusive = 100'000;
};

struct FilterResult {
    std::vector<std::size_t> kept;  // indices into the input, in input order
    struct Rejection {
        std::size_t index;
        std::string reason;
    };
    std::vector<Rejection> rejected;
    /// Kept records per problem kind, sorted by kind.
    std::vector<std::pair<std::string, std::size_t>> kind_counts;
};

/// Keeps real-valued matrices with more than 10^5 nonzeros and drops repeated
/// structures (first occurrence wins). Disabled filtering still deduplicates.
FilterResult filter_corpus(std::span<const CorpusRecord> records, const FilterOptions& options = {});

struct KindSavings {
    std::string kind;
    std::size_t count = 0;
    Stats lambda;
};

struct ScatterPoint {
    std::string id;
    double density = 0.0;
    double prnnz_stddev = 0.0;
    double lambda = 0.0;
};

struct CriterionBreakdown {
    std::vector<KindSavings> by_kind;   // sorted by kind
    std::vector<ScatterPoint> all;      // all logical nonzeros
    std::vector<ScatterPoint> stored;   // stored nonzeros only
};

CriterionBreakdown criterion_breakdown(std::span<const CorpusRecord> records, Precision precision);

/// mt19937_64 (whose output sequence is fixed by the C++ standard) with
/// rejection sampling for bounded integers, so draws are identical on every
/// platform and standard library.
class PortableSampler {
public:
    explicit PortableSampler(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, bound).
    std::uint64_t below(std::uint64_t bound);

    /// `count` distinct indices from [0, population), sorted ascending
    /// (partial Fisher-Yates).
    std::vector<std::size_t> sample(std::size_t population, std::size_t count);

private:
    std::mt19937_64 engine_;
};

struct ConsistencyParams {
    Scheme scheme = Scheme::min_fixed();
    SizeSetId sizes = SizeSetId::B64;
    Precision precision = Precision::Double;
    std::size_t subset_size = 200;
    std::size_t trials = 50;
    std::uint64_t seed = 2016;
};

struct ConsistencyResult {
    ConsistencyParams params;
    double stddev_of_averages = 0.0;
    double stddev_of_maxima = 0.0;
    /// Corpus-wide mean and max of the same deltas.
    double corpus_average = 0.0;
    double corpus_maximum = 0.0;
    /// Standard deviations relative to the corpus-wide mean / max, in percent
    /// (0 when that reference is 0).
    double normalized_averages = 0.0;
    double normalized_maxima = 0.0;

    friend bool operator==(const ConsistencyResult& a, const ConsistencyResult& b) {
        return a.stddev_of_averages == b.stddev_of_averages &&
               a.stddev_of_maxima == b.stddev_of_maxima && a.corpus_average == b.corpus_average &&
               a.corpus_maximum == b.corpus_maximum;
    }
};

/// Standard deviation of subset averages and maxima of per-matrix deltas over
/// `trials` random subsets. Throws std::invalid_argument if the subset is
/// larger than the corpus.
ConsistencyResult consistency_experiment(std::span<const double> deltas,
                                         const ConsistencyParams& params);
ConsistencyResult consistency_experiment(std::span<const CorpusRecord> records,
                                         const ConsistencyParams& params);

}  // namespace sbm
