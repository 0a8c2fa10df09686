#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sbm/matrix_io.hpp"

namespace sbm {

/// Bits needed to index n distinct entities; ceil_log2(1) == 0.
constexpr unsigned ceil_log2(std::uint64_t n) noexcept {
    return n <= 1 ? 0u : static_cast<unsigned>(std::bit_width(n - 1));
}

/// A 2^k x 2^l block, 1 <= k, l <= 8.
class BlockSize {
public:
    static constexpr unsigned kMaxExponent = 8;

    constexpr BlockSize(unsigned k, unsigned l) : k_(k), l_(l) {
        if (k < 1 || k > kMaxExponent || l < 1 || l > kMaxExponent)
            throw std::invalid_argument("block size exponents must lie in [1, 8]");
    }

    constexpr unsigned row_exp() const noexcept { return k_; }
    constexpr unsigned col_exp() const noexcept { return l_; }
    constexpr std::uint32_t height() const noexcept { return 1u << k_; }
    constexpr std::uint32_t width() const noexcept { return 1u << l_; }
    constexpr std::uint32_t area() const noexcept { return 1u << (k_ + l_); }

    /// Position in (k, l) lexicographic order, 0..63.
    constexpr unsigned ordinal() const noexcept { return (k_ - 1) * kMaxExponent + (l_ - 1); }
    static constexpr BlockSize from_ordinal(unsigned i) {
        return BlockSize(i / kMaxExponent + 1, i % kMaxExponent + 1);
    }

    /// "HxW", e.g. "8x16" is 8 rows by 16 columns.
    std::string to_string() const;
    static BlockSize parse(std::string_view text);

    friend constexpr auto operator<=>(const BlockSize&, const BlockSize&) = default;

private:
    unsigned k_;
    unsigned l_;
};

enum class BlockFormat : std::uint8_t { Coo = 0, Csr = 1, Bitmap = 2, Dense = 3 };

inline constexpr std::array<BlockFormat, 4> kAllFormats = {BlockFormat::Coo, BlockFormat::Csr,
                                                           BlockFormat::Bitmap, BlockFormat::Dense};

std::string_view to_string(BlockFormat format);

/// Nonempty subset of the four block formats, stored as a 4-bit mask.
class FormatSet {
public:
    constexpr FormatSet() = default;
    constexpr FormatSet(std::initializer_list<BlockFormat> formats) {
        for (auto f : formats) mask_ |= bit(f);
    }

    static constexpr FormatSet all() { return FormatSet(0xF); }
    static constexpr FormatSet without_csr() { return FormatSet(0xF & ~bit(BlockFormat::Csr)); }
    static FormatSet from_mask(std::uint32_t mask);

    constexpr bool contains(BlockFormat f) const noexcept { return (mask_ & bit(f)) != 0; }
    constexpr bool empty() const noexcept { return mask_ == 0; }
    constexpr unsigned size() const noexcept { return static_cast<unsigned>(std::popcount(mask_)); }
    constexpr std::uint8_t mask() const noexcept { return mask_; }
    constexpr FormatSet without(BlockFormat f) const noexcept {
        return FormatSet(static_cast<std::uint8_t>(mask_ & ~bit(f)));
    }

    friend constexpr bool operator==(FormatSet, FormatSet) = default;

private:
    constexpr explicit FormatSet(std::uint8_t mask) : mask_(mask) {}
    static constexpr std::uint8_t bit(BlockFormat f) {
        return static_cast<std::uint8_t>(1u << static_cast<unsigned>(f));
    }

    std::uint8_t mask_ = 0;
};

enum class SchemeKind : std::uint8_t { Fixed = 0, MinFixed = 1, Adaptive = 2 };

/// Blocking storage scheme: one prescribed format, one format chosen for the
/// whole matrix (+2 tag bits), or one format per block (+2 tag bits each).
struct Scheme {
    SchemeKind kind = SchemeKind::Fixed;
    FormatSet formats;

    static constexpr Scheme fixed(BlockFormat f) { return {SchemeKind::Fixed, FormatSet{f}}; }
    static constexpr Scheme min_fixed(FormatSet fs = FormatSet::all()) {
        return {SchemeKind::MinFixed, fs};
    }
    static constexpr Scheme adaptive(FormatSet fs = FormatSet::all()) {
        return {SchemeKind::Adaptive, fs};
    }

    /// The prescribed format of a fixed scheme.
    BlockFormat format() const;

    /// "coo", "min-fixed", "adaptive-wo-csr", "adaptive[coo+dense]", ...
    std::string name() const;
    static Scheme parse(std::string_view text);

    friend constexpr bool operator==(const Scheme&, const Scheme&) = default;
};

inline constexpr unsigned kFormatTagBits = 2;

struct Block {
    Index row;
    Index col;
    std::uint32_t nnz;

    friend bool operator==(const Block&, const Block&) = default;
};

/// Nonzero blocks of one partition, sorted by (row, col), plus the number of
/// nonzero blocks in every block row.
struct BlockNnzMap {
    BlockSize size{1, 1};
    Index block_rows = 0;
    Index block_cols = 0;
    std::vector<Block> blocks;
    std::vector<std::uint32_t> row_counts;

    friend bool operator==(const BlockNnzMap&, const BlockNnzMap&) = default;
};

BlockNnzMap block_nnz_map(const SparseMatrix& matrix, BlockSize size);

/// Doubles the block height: merges block rows 2R and 2R+1.
BlockNnzMap aggregate_rows(const BlockNnzMap& map);
/// Doubles the block width: merges block columns 2C and 2C+1.
BlockNnzMap aggregate_cols(const BlockNnzMap& map);

/// Visits the maps of all 64 block sizes, deriving coarser maps from finer
/// ones instead of recounting elements.
void for_each_block_size(const SparseMatrix& matrix,
                         const std::function<void(const BlockNnzMap&)>& visit);

/// Bits of one nonzero block with z elements; 1 <= z <= h*w.
Bits block_format_bits(BlockFormat format, BlockSize size, std::uint32_t z, Precision precision);

/// Block column index per nonzero block plus nonzero-block count per block row.
Bits structure_overhead(const BlockNnzMap& map);

/// Cheapest format in `formats` for a single block; ties resolve in
/// COO, CSR, bitmap, dense order.
BlockFormat best_block_format(FormatSet formats, BlockSize size, std::uint32_t z,
                              Precision precision);

/// Format a min-fixed scheme picks for the whole matrix.
BlockFormat min_fixed_format(const BlockNnzMap& map, FormatSet formats, Precision precision);

Bits mmf(const BlockNnzMap& map, const Scheme& scheme, Precision precision);
Bits mmf(const SparseMatrix& matrix, const Scheme& scheme, BlockSize size, Precision precision);

/// Counts of blocks per nonzero count z, ascending in z.
struct NnzHistogram {
    std::vector<std::pair<std::uint32_t, Count>> bins;
    Count blocks = 0;
};

NnzHistogram nnz_histogram(const BlockNnzMap& map);

/// mmf of several schemes at once over a shared histogram.
std::vector<Bits> evaluate_schemes(const BlockNnzMap& map, const NnzHistogram& histogram,
                                   std::span<const Scheme> schemes, Precision precision);

}  // namespace sbm
