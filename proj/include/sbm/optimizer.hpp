#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sbm/block_model.hpp"
#include "sbm/stats.hpp"

namespace sbm {

/// COO, CSR, bitmap, dense, min-fixed, adaptive -- also the tie-break order.
inline constexpr std::array<Scheme, 6> kBaseSchemes = {
    Scheme::fixed(BlockFormat::Coo),    Scheme::fixed(BlockFormat::Csr),
    Scheme::fixed(BlockFormat::Bitmap), Scheme::fixed(BlockFormat::Dense),
    Scheme::min_fixed(),                Scheme::adaptive(),
};

/// The base six followed by min-fixed and adaptive restricted to {COO, bitmap, dense}.
inline constexpr std::array<Scheme, 8> kStandardSchemes = {
    Scheme::fixed(BlockFormat::Coo),    Scheme::fixed(BlockFormat::Csr),
    Scheme::fixed(BlockFormat::Bitmap), Scheme::fixed(BlockFormat::Dense),
    Scheme::min_fixed(),                Scheme::adaptive(),
    Scheme::min_fixed(FormatSet::without_csr()), Scheme::adaptive(FormatSet::without_csr()),
};

/// Deterministic ordering key used to break footprint ties between schemes.
unsigned scheme_order(const Scheme& scheme);

enum class SizeSetId { B64, B20, B14, B8 };

std::string_view to_string(SizeSetId id);
SizeSetId parse_size_set_id(std::string_view text);

/// All 2^k x 2^l sizes, 1 <= k, l <= 8, in (k, l) order.
std::vector<BlockSize> all_block_sizes();
std::vector<BlockSize> size_set(SizeSetId id);

struct ReducedSets {
    std::vector<BlockSize> b8;
    std::vector<BlockSize> b14;
    std::vector<BlockSize> b20;
};

/// Square sizes, plus the rectangular 4..16 (B14) or 4..32 (B20) sizes.
ReducedSets reduced_sets();

/// Parses "B64", "B20", "B14", "B8" or a comma-separated list such as "8x8,4x16".
std::vector<BlockSize> parse_size_list(std::string_view text);

struct SearchSpace {
    std::vector<Scheme> schemes;
    std::vector<BlockSize> sizes;

    /// Base six schemes over all 64 sizes.
    static SearchSpace full();
};

/// Footprints of one matrix at one precision for every (scheme, size) cell.
class FootprintTable {
public:
    FootprintTable(std::string matrix_id, Precision precision, std::vector<Scheme> schemes);

    const std::string& matrix_id() const noexcept { return matrix_id_; }
    Precision precision() const noexcept { return precision_; }
    std::span<const Scheme> schemes() const noexcept { return schemes_; }

    bool has(const Scheme& scheme) const noexcept;
    Bits at(const Scheme& scheme, BlockSize size) const;
    void set(std::size_t scheme_index, BlockSize size, Bits bits);

private:
    std::size_t index_of(const Scheme& scheme) const;

    std::string matrix_id_;
    Precision precision_;
    std::vector<Scheme> schemes_;
    std::vector<Bits> cells_;  // scheme-major, 64 sizes each
};

/// One table per precision, covering all 64 sizes for every scheme given.
std::vector<FootprintTable> compute_footprint_tables(const SparseMatrix& matrix,
                                                     std::span<const Scheme> schemes,
                                                     std::span<const Precision> precisions,
                                                     const std::string& matrix_id = {});

struct OptimalConfig {
    Scheme scheme;
    BlockSize size{1, 1};
    Bits bits = 0;
    /// Per nonzero block, in block order; filled for adaptive schemes only.
    std::vector<BlockFormat> block_formats;
};

/// Minimum cell of `space`; ties go to the earlier scheme, then the smaller (k, l).
OptimalConfig optimal_config(const FootprintTable& table, const SearchSpace& space);
OptimalConfig optimal_config(const SparseMatrix& matrix, const SearchSpace& space,
                             Precision precision);

/// Percent by which the best footprint within `space` exceeds the optimum over
/// the full space. The table must contain the base six schemes.
double delta(const FootprintTable& table, const SearchSpace& space);
double delta(const SparseMatrix& matrix, const SearchSpace& space, Precision precision);

/// Statistics of per-matrix deltas over a corpus.
Stats u_set(std::span<const FootprintTable> corpus, const SearchSpace& space);

struct RankedBlockSize {
    BlockSize size;
    double average = 0.0;
    double maximum = 0.0;
};

/// All 64 sizes sorted ascending by the average delta of the base schemes
/// restricted to that size (ties by (k, l)).
std::vector<RankedBlockSize> rank_block_sizes(std::span<const FootprintTable> corpus);

}  // namespace sbm
