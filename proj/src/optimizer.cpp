#include "sbm/optimizer.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <optional>
#include <tuple>

namespace sbm {

unsigned scheme_order(const Scheme& scheme) {
    for (std::size_t i = 0; i < kStandardSchemes.size(); ++i)
        if (kStandardSchemes[i] == scheme) return static_cast<unsigned>(i);
    return 100 + static_cast<unsigned>(scheme.kind) * 16 + scheme.formats.mask();
}

std::string_view to_string(SizeSetId id) {
    switch (id) {
        case SizeSetId::B64: return "B64";
        case SizeSetId::B20: return "B20";
        case SizeSetId::B14: return "B14";
        case SizeSetId::B8: return "B8";
    }
    return "?";
}

SizeSetId parse_size_set_id(std::string_view text) {
    for (auto id : {SizeSetId::B64, SizeSetId::B20, SizeSetId::B14, SizeSetId::B8})
        if (text == to_string(id)) return id;
    throw std::invalid_argument("unknown block size set '" + std::string(text) + "'");
}

std::vector<BlockSize> all_block_sizes() {
    std::vector<BlockSize> out;
    for (unsigned i = 0; i < 64; ++i) out.push_back(BlockSize::from_ordinal(i));
    return out;
}

namespace {

std::vector<BlockSize> squares_plus_range(unsigned lo, unsigned hi) {
    std::vector<BlockSize> out;
    for (auto size : all_block_sizes()) {
        const bool square = size.row_exp() == size.col_exp();
        const bool in_range = size.row_exp() >= lo && size.row_exp() <= hi &&
                              size.col_exp() >= lo && size.col_exp() <= hi;
        if (square || in_range) out.push_back(size);
    }
    return out;
}

}  // namespace

std::vector<BlockSize> size_set(SizeSetId id) {
    switch (id) {
        case SizeSetId::B64: return all_block_sizes();
        case SizeSetId::B20: return squares_plus_range(2, 5);
        case SizeSetId::B14: return squares_plus_range(2, 4);
        case SizeSetId::B8: return squares_plus_range(1, 0);
    }
    throw std::invalid_argument("unknown block size set");
}

ReducedSets reduced_sets() {
    return {size_set(SizeSetId::B8), size_set(SizeSetId::B14), size_set(SizeSetId::B20)};
}

std::vector<BlockSize> parse_size_list(std::string_view text) {
    auto trim = [](std::string_view t) {
        while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
        while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.remove_suffix(1);
        return t;
    };
    text = trim(text);
    if (!text.empty() && (text.front() == 'B' || text.front() == 'b')) {
        std::string upper(text);
        upper.front() = 'B';
        return size_set(parse_size_set_id(upper));
    }
    std::vector<BlockSize> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        const auto size = BlockSize::parse(trim(text.substr(0, comma)));
        if (std::find(out.begin(), out.end(), size) == out.end()) out.push_back(size);
        text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    }
    if (out.empty()) throw std::invalid_argument("empty block size list");
    std::sort(out.begin(), out.end());
    return out;
}

SearchSpace SearchSpace::full() {
    return {std::vector<Scheme>(kBaseSchemes.begin(), kBaseSchemes.end()), all_block_sizes()};
}

// ---------------------------------------------------------------------------

FootprintTable::FootprintTable(std::string matrix_id, Precision precision,
                               std::vector<Scheme> schemes)
    : matrix_id_(std::move(matrix_id)),
      precision_(precision),
      schemes_(std::move(schemes)),
      cells_(schemes_.size() * 64, 0) {}

bool FootprintTable::has(const Scheme& scheme) const noexcept {
    return std::find(schemes_.begin(), schemes_.end(), scheme) != schemes_.end();
}

std::size_t FootprintTable::index_of(const Scheme& scheme) const {
    const auto it = std::find(schemes_.begin(), schemes_.end(), scheme);
    if (it == schemes_.end())
        throw std::out_of_range("scheme '" + scheme.name() + "' not in footprint table");
    return static_cast<std::size_t>(it - schemes_.begin());
}

Bits FootprintTable::at(const Scheme& scheme, BlockSize size) const {
    return cells_[index_of(scheme) * 64 + size.ordinal()];
}

void FootprintTable::set(std::size_t scheme_index, BlockSize size, Bits bits) {
    cells_.at(scheme_index * 64 + size.ordinal()) = bits;
}

std::vector<FootprintTable> compute_footprint_tables(const SparseMatrix& matrix,
                                                     std::span<const Scheme> schemes,
                                                     std::span<const Precision> precisions,
                                                     const std::string& matrix_id) {
    std::vector<FootprintTable> tables;
    for (auto p : precisions)
        tables.emplace_back(matrix_id, p, std::vector<Scheme>(schemes.begin(), schemes.end()));
    for_each_block_size(matrix, [&](const BlockNnzMap& map) {
        const auto histogram = nnz_histogram(map);
        for (auto& table : tables) {
            const auto bits = evaluate_schemes(map, histogram, schemes, table.precision());
            for (std::size_t s = 0; s < bits.size(); ++s) table.set(s, map.size, bits[s]);
        }
    });
    return tables;
}

// ---------------------------------------------------------------------------

OptimalConfig optimal_config(const FootprintTable& table, const SearchSpace& space) {
    if (space.schemes.empty() || space.sizes.empty())
        throw std::invalid_argument("empty search space");
    std::optional<std::tuple<Bits, unsigned, unsigned>> best;
    OptimalConfig out;
    for (const auto& scheme : space.schemes) {
        for (auto size : space.sizes) {
            const auto key = std::make_tuple(table.at(scheme, size), scheme_order(scheme), size.ordinal());
            if (!best || key < *best) {
                best = key;
                out.scheme = scheme;
                out.size = size;
                out.bits = std::get<0>(key);
            }
        }
    }
    return out;
}

OptimalConfig optimal_config(const SparseMatrix& matrix, const SearchSpace& space,
                             Precision precision) {
    const Precision precisions[] = {precision};
    auto tables = compute_footprint_tables(matrix, space.schemes, precisions);
    auto out = optimal_config(tables.front(), space);
    if (out.scheme.kind == SchemeKind::Adaptive) {
        const auto map = block_nnz_map(matrix, out.size);
        out.block_formats.reserve(map.blocks.size());
        for (const auto& block : map.blocks)
            out.block_formats.push_back(
                best_block_format(out.scheme.formats, out.size, block.nnz, precision));
    }
    return out;
}

namespace {

Bits min_bits(const FootprintTable& table, std::span<const Scheme> schemes,
              std::span<const BlockSize> sizes) {
    Bits best = std::numeric_limits<Bits>::max();
    for (const auto& s : schemes)
        for (auto size : sizes) best = std::min(best, table.at(s, size));
    return best;
}

}  // namespace

double delta(const FootprintTable& table, const SearchSpace& space) {
    if (space.schemes.empty() || space.sizes.empty())
        throw std::invalid_argument("empty search space");
    static const auto all_sizes = all_block_sizes();
    const Bits optimum = min_bits(table, kBaseSchemes, all_sizes);
    const Bits restricted = min_bits(table, space.schemes, space.sizes);
    return (static_cast<double>(restricted) / static_cast<double>(optimum) - 1.0) * 100.0;
}

double delta(const SparseMatrix& matrix, const SearchSpace& space, Precision precision) {
    std::vector<Scheme> schemes(kBaseSchemes.begin(), kBaseSchemes.end());
    for (const auto& s : space.schemes)
        if (std::find(schemes.begin(), schemes.end(), s) == schemes.end()) schemes.push_back(s);
    const Precision precisions[] = {precision};
    return delta(compute_footprint_tables(matrix, schemes, precisions).front(), space);
}

Stats u_set(std::span<const FootprintTable> corpus, const SearchSpace& space) {
    std::vector<double> deltas;
    deltas.reserve(corpus.size());
    for (const auto& table : corpus) deltas.push_back(delta(table, space));
    return summarize(deltas);
}

std::vector<RankedBlockSize> rank_block_sizes(std::span<const FootprintTable> corpus) {
    std::vector<RankedBlockSize> out;
    SearchSpace space{std::vector<Scheme>(kBaseSchemes.begin(), kBaseSchemes.end()), {}};
    for (auto size : all_block_sizes()) {
        space.sizes = {size};
        const auto stats = u_set(corpus, space);
        out.push_back({size, stats.mean, stats.max});
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.average < b.average;
    });
    return out;
}

}  // namespace sbm
