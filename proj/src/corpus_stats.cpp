#include "sbm/corpus_stats.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <stdexcept>

namespace sbm {

const PrecisionMetrics& CorpusRecord::at(Precision p) const {
    for (const auto& m : metrics)
        if (m.precision == p) return m;
    throw std::out_of_range("record " + id + " has no metrics for b=" + std::to_string(bits_of(p)));
}

const FootprintTable& CorpusRecord::table(Precision p) const {
    for (const auto& t : tables)
        if (t.precision() == p) return t;
    throw std::out_of_range("record " + id + " has no footprint table for b=" +
                            std::to_string(bits_of(p)));
}

double lambda_savings(Bits optimal_bits, Bits csr32_bits) {
    return (1.0 - static_cast<double>(optimal_bits) / static_cast<double>(csr32_bits)) * 100.0;
}

GammaMetrics gamma_metrics(Bits optimal_bits, Bits csr32_bits, Bits lower_bound_bits) {
    const double lb = static_cast<double>(lower_bound_bits);
    return {(static_cast<double>(optimal_bits) / lb - 1.0) * 100.0,
            (static_cast<double>(csr32_bits) / lb - 1.0) * 100.0};
}

CorpusRecord make_record(std::string id, std::string kind, ValueField field,
                         const SparseMatrix& matrix, std::span<const Precision> precisions) {
    if (matrix.empty()) throw std::invalid_argument("matrix " + id + " has no stored elements");
    CorpusRecord r;
    r.id = std::move(id);
    r.kind = normalize_kind(kind);
    r.field = field;
    r.rows = matrix.rows();
    r.cols = matrix.cols();
    r.symmetry = matrix.symmetry();
    r.nnz_all = matrix.nnz_all();
    r.nnz_stored = matrix.nnz_stored();
    r.density = density(matrix);
    r.prnnz_stddev = row_uniformity(matrix);
    r.fingerprint = structure_fingerprint(matrix);
    r.tables = compute_footprint_tables(matrix, kStandardSchemes, precisions, r.id);

    const auto full = SearchSpace::full();
    for (const auto& table : r.tables) {
        const auto best = optimal_config(table, full);
        PrecisionMetrics m;
        m.precision = table.precision();
        m.optimal_scheme = best.scheme;
        m.optimal_size = best.size;
        m.optimal_bits = best.bits;
        m.csr32_bits = csr32_footprint(matrix, m.precision);
        m.lower_bound_bits = lower_bound(matrix, m.precision);
        m.lambda = lambda_savings(m.optimal_bits, m.csr32_bits);
        const auto gamma = gamma_metrics(m.optimal_bits, m.csr32_bits, m.lower_bound_bits);
        m.gamma_blocked = gamma.blocked;
        m.gamma_csr32 = gamma.csr32;
        r.metrics.push_back(m);
    }
    return r;
}

std::string structure_fingerprint(const SparseMatrix& matrix) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 unavailable");

    std::vector<unsigned char> buf;
    buf.reserve(1 << 16);
    auto put = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
    };
    auto flush = [&] {
        EVP_DigestUpdate(ctx.get(), buf.data(), buf.size());
        buf.clear();
    };
    put(matrix.rows());
    put(matrix.cols());
    put(static_cast<std::uint32_t>(matrix.symmetry()));
    for (const auto& c : matrix.elements()) {
        put(c.row);
        put(c.col);
        if (buf.size() >= (1 << 16) - 8) flush();
    }
    flush();

    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest, &len);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::string normalize_kind(std::string_view kind) {
    constexpr std::string_view suffix = " problem";
    if (kind.ends_with(suffix)) kind.remove_suffix(suffix.size());
    if (kind.empty()) return "unknown";
    return std::string(kind);
}

FilterResult filter_corpus(std::span<const CorpusRecord> records, const FilterOptions& options) {
    FilterResult out;
    std::map<std::string, std::size_t> seen;  // fingerprint -> kept index
    std::map<std::string, std::size_t> kinds;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (options.enabled && r.field == ValueField::Pattern) {
            out.rejected.push_back({i, "pattern matrix (no real values)"});
            continue;
        }
        if (options.enabled && r.nnz_all <= options.min_nnz_all_exclusive) {
            out.rejected.push_back({i, "nnz_all " + std::to_string(r.nnz_all) + " <= " +
                                           std::to_string(options.min_nnz_all_exclusive)});
            continue;
        }
        const auto [it, inserted] = seen.emplace(r.fingerprint, i);
        if (!inserted) {
            out.rejected.push_back({i, "duplicate structure of " + records[it->second].id});
            continue;
        }
        out.kept.push_back(i);
        ++kinds[r.kind];
    }
    out.kind_counts.assign(kinds.begin(), kinds.end());
    return out;
}

CriterionBreakdown criterion_breakdown(std::span<const CorpusRecord> records, Precision precision) {
    CriterionBreakdown out;
    std::map<std::string, std::vector<double>> groups;
    for (const auto& r : records) {
        const double lambda = r.at(precision).lambda;
        groups[r.kind].push_back(lambda);
        out.all.push_back({r.id, r.density.all, r.prnnz_stddev.all, lambda});
        out.stored.push_back({r.id, r.density.stored, r.prnnz_stddev.stored, lambda});
    }
    for (const auto& [kind, values] : groups)
        out.by_kind.push_back({kind, values.size(), summarize(values)});
    return out;
}

// ---------------------------------------------------------------------------

std::uint64_t PortableSampler::below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("empty sampling range");
    // Reject the low (2^64 mod bound) outputs so the remainder is unbiased.
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t x = engine_();
        if (x >= threshold) return x % bound;
    }
}

std::vector<std::size_t> PortableSampler::sample(std::size_t population, std::size_t count) {
    if (count > population) throw std::invalid_argument("sample larger than population");
    std::vector<std::size_t> pool(population);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(below(population - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    std::sort(pool.begin(), pool.end());
    return pool;
}

ConsistencyResult consistency_experiment(std::span<const double> deltas,
                                         const ConsistencyParams& params) {
    if (deltas.empty()) throw std::invalid_argument("consistency experiment on an empty corpus");
    if (params.subset_size == 0 || params.subset_size > deltas.size())
        throw std::invalid_argument("subset size " + std::to_string(params.subset_size) +
                                    " not in [1, corpus size " + std::to_string(deltas.size()) + "]");
    if (params.trials == 0) throw std::invalid_argument("consistency experiment needs trials");

    PortableSampler sampler(params.seed);
    std::vector<double> averages, maxima, subset;
    for (std::size_t t = 0; t < params.trials; ++t) {
        subset.clear();
        for (auto i : sampler.sample(deltas.size(), params.subset_size)) subset.push_back(deltas[i]);
        const auto s = summarize(subset);
        averages.push_back(s.mean);
        maxima.push_back(s.max);
    }

    ConsistencyResult out;
    out.params = params;
    out.stddev_of_averages = population_stddev(averages);
    out.stddev_of_maxima = population_stddev(maxima);
    const auto corpus = summarize(deltas);
    out.corpus_average = corpus.mean;
    out.corpus_maximum = corpus.max;
    out.normalized_averages = corpus.mean > 0 ? out.stddev_of_averages / corpus.mean * 100.0 : 0.0;
    out.normalized_maxima = corpus.max > 0 ? out.stddev_of_maxima / corpus.max * 100.0 : 0.0;
    return out;
}

ConsistencyResult consistency_experiment(std::span<const CorpusRecord> records,
                                         const ConsistencyParams& params) {
    const SearchSpace space{{params.scheme}, size_set(params.sizes)};
    std::vector<double> deltas;
    deltas.reserve(records.size());
    for (const auto& r : records) deltas.push_back(delta(r.table(params.precision), space));
    return consistency_experiment(deltas, params);
}

}  // namespace sbm
