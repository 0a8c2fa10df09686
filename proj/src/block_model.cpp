#include "sbm/block_model.hpp"

#include <algorithm>
#include <charconv>

namespace sbm {

std::string BlockSize::to_string() const {
    return std::to_string(height()) + "x" + std::to_string(width());
}

namespace {

unsigned parse_power_of_two(std::string_view text, std::string_view whole) {
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() ||
        !std::has_single_bit(value) || value < 2 || value > 256)
        throw std::invalid_argument("invalid block size '" + std::string(whole) +
                                    "': dimensions must be powers of two in [2, 256]");
    return static_cast<unsigned>(std::countr_zero(value));
}

}  // namespace

BlockSize BlockSize::parse(std::string_view text) {
    const auto x = text.find_first_of("xX");
    if (x == std::string_view::npos)
        throw std::invalid_argument("invalid block size '" + std::string(text) + "': expected HxW");
    return BlockSize(parse_power_of_two(text.substr(0, x), text),
                     parse_power_of_two(text.substr(x + 1), text));
}

std::string_view to_string(BlockFormat format) {
    switch (format) {
        case BlockFormat::Coo: return "coo";
        case BlockFormat::Csr: return "csr";
        case BlockFormat::Bitmap: return "bitmap";
        case BlockFormat::Dense: return "dense";
    }
    return "?";
}

FormatSet FormatSet::from_mask(std::uint32_t mask) {
    if (mask == 0 || mask > 0xF) throw std::invalid_argument("invalid format set mask");
    return FormatSet(static_cast<std::uint8_t>(mask));
}

BlockFormat Scheme::format() const {
    if (kind != SchemeKind::Fixed || formats.size() != 1)
        throw std::logic_error("scheme has no single prescribed format");
    for (auto f : kAllFormats)
        if (formats.contains(f)) return f;
    throw std::logic_error("empty format set");
}

std::string Scheme::name() const {
    if (kind == SchemeKind::Fixed) return std::string(to_string(format()));
    std::string base = kind == SchemeKind::MinFixed ? "min-fixed" : "adaptive";
    if (formats == FormatSet::all()) return base;
    if (formats == FormatSet::without_csr()) return base + "-wo-csr";
    base += '[';
    bool first = true;
    for (auto f : kAllFormats) {
        if (!formats.contains(f)) continue;
        if (!first) base += '+';
        base += to_string(f);
        first = false;
    }
    return base + ']';
}

Scheme Scheme::parse(std::string_view text) {
    for (auto f : kAllFormats)
        if (text == to_string(f)) return fixed(f);
    SchemeKind kind;
    if (text.starts_with("min-fixed")) {
        kind = SchemeKind::MinFixed;
        text.remove_prefix(9);
    } else if (text.starts_with("adaptive")) {
        kind = SchemeKind::Adaptive;
        text.remove_prefix(8);
    } else {
        throw std::invalid_argument("unknown scheme '" + std::string(text) + "'");
    }
    if (text.empty()) return {kind, FormatSet::all()};
    if (text == "-wo-csr") return {kind, FormatSet::without_csr()};
    if (text.size() < 2 || text.front() != '[' || text.back() != ']')
        throw std::invalid_argument("malformed scheme format list '" + std::string(text) + "'");
    text = text.substr(1, text.size() - 2);
    FormatSet set;
    while (!text.empty()) {
        const auto plus = text.find('+');
        const auto name = text.substr(0, plus);
        bool found = false;
        for (auto f : kAllFormats) {
            if (name == to_string(f)) {
                set = FormatSet::from_mask(set.mask() | (1u << static_cast<unsigned>(f)));
                found = true;
            }
        }
        if (!found) throw std::invalid_argument("unknown block format '" + std::string(name) + "'");
        text = plus == std::string_view::npos ? std::string_view{} : text.substr(plus + 1);
    }
    if (set.empty()) throw std::invalid_argument("scheme needs at least one format");
    return {kind, set};
}

// ---------------------------------------------------------------------------
// Counting

BlockNnzMap block_nnz_map(const SparseMatrix& matrix, BlockSize size) {
    const unsigned k = size.row_exp();
    const unsigned l = size.col_exp();
    BlockNnzMap map{size, static_cast<Index>((Count{matrix.rows()} + size.height() - 1) >> k),
                    static_cast<Index>((Count{matrix.cols()} + size.width() - 1) >> l), {}, {}};
    map.row_counts.assign(map.block_rows, 0);

    std::vector<std::uint32_t> acc(map.block_cols, 0);
    std::vector<Index> touched;
    const auto elements = matrix.elements();
    std::size_t i = 0;
    while (i < elements.size()) {
        const Index block_row = elements[i].row >> k;
        for (; i < elements.size() && (elements[i].row >> k) == block_row; ++i) {
            const Index block_col = elements[i].col >> l;
            if (acc[block_col]++ == 0) touched.push_back(block_col);
        }
        std::sort(touched.begin(), touched.end());
        for (auto c : touched) {
            map.blocks.push_back({block_row, c, acc[c]});
            acc[c] = 0;
        }
        map.row_counts[block_row] = static_cast<std::uint32_t>(touched.size());
        touched.clear();
    }
    return map;
}

BlockNnzMap aggregate_rows(const BlockNnzMap& map) {
    const BlockSize coarser(map.size.row_exp() + 1, map.size.col_exp());
    BlockNnzMap out{coarser, (map.block_rows + 1) / 2, map.block_cols, {}, {}};
    out.row_counts.assign(out.block_rows, 0);
    out.blocks.reserve(map.blocks.size());

    std::size_t pos = 0;
    for (Index r = 0; r < out.block_rows; ++r) {
        const std::size_t a_begin = pos;
        const std::size_t a_end = a_begin + map.row_counts[2 * r];
        const std::size_t b_end =
            a_end + (2 * r + 1 < map.block_rows ? map.row_counts[2 * r + 1] : 0);
        pos = b_end;

        const std::size_t before = out.blocks.size();
        std::size_t a = a_begin, b = a_end;
        while (a < a_end || b < b_end) {
            if (b == b_end || (a < a_end && map.blocks[a].col < map.blocks[b].col)) {
                out.blocks.push_back({r, map.blocks[a].col, map.blocks[a].nnz});
                ++a;
            } else if (a == a_end || map.blocks[b].col < map.blocks[a].col) {
                out.blocks.push_back({r, map.blocks[b].col, map.blocks[b].nnz});
                ++b;
            } else {
                out.blocks.push_back({r, map.blocks[a].col, map.blocks[a].nnz + map.blocks[b].nnz});
                ++a;
                ++b;
            }
        }
        out.row_counts[r] = static_cast<std::uint32_t>(out.blocks.size() - before);
    }
    return out;
}

BlockNnzMap aggregate_cols(const BlockNnzMap& map) {
    const BlockSize coarser(map.size.row_exp(), map.size.col_exp() + 1);
    BlockNnzMap out{coarser, map.block_rows, (map.block_cols + 1) / 2, {}, {}};
    out.row_counts.assign(out.block_rows, 0);
    out.blocks.reserve(map.blocks.size());

    std::size_t pos = 0;
    for (Index r = 0; r < map.block_rows; ++r) {
        const std::size_t end = pos + map.row_counts[r];
        const std::size_t before = out.blocks.size();
        for (; pos < end; ++pos) {
            const Index c = map.blocks[pos].col >> 1;
            if (out.blocks.size() > before && out.blocks.back().col == c)
                out.blocks.back().nnz += map.blocks[pos].nnz;
            else
                out.blocks.push_back({r, c, map.blocks[pos].nnz});
        }
        out.row_counts[r] = static_cast<std::uint32_t>(out.blocks.size() - before);
    }
    return out;
}

void for_each_block_size(const SparseMatrix& matrix,
                         const std::function<void(const BlockNnzMap&)>& visit) {
    BlockNnzMap column_base = block_nnz_map(matrix, BlockSize(1, 1));
    for (unsigned l = 1; l <= BlockSize::kMaxExponent; ++l) {
        if (l > 1) column_base = aggregate_cols(column_base);
        visit(column_base);
        BlockNnzMap current = aggregate_rows(column_base);
        for (unsigned k = 2;; ++k) {
            visit(current);
            if (k == BlockSize::kMaxExponent) break;
            current = aggregate_rows(current);
        }
    }
}

// ---------------------------------------------------------------------------
// Footprint model

Bits block_format_bits(BlockFormat format, BlockSize size, std::uint32_t z, Precision precision) {
    if (z == 0 || z > size.area())
        throw std::invalid_argument("block nonzero count " + std::to_string(z) +
                                    " outside [1, " + std::to_string(size.area()) + "]");
    const Bits b = bits_of(precision);
    const Bits k = size.row_exp();
    const Bits l = size.col_exp();
    const Bits h = size.height();
    switch (format) {
        case BlockFormat::Coo: return z * (k + l + b);
        case BlockFormat::Csr: return z * b + z * l + h * ceil_log2(Bits{z} + 1);
        case BlockFormat::Bitmap: return z * b + size.area();
        case BlockFormat::Dense: return Bits{size.area()} * b;
    }
    throw std::invalid_argument("unknown block format");
}

Bits structure_overhead(const BlockNnzMap& map) {
    return Bits{map.blocks.size()} * ceil_log2(map.block_cols) +
           Bits{map.block_rows} * ceil_log2(Bits{map.block_cols} + 1);
}

BlockFormat best_block_format(FormatSet formats, BlockSize size, std::uint32_t z,
                              Precision precision) {
    std::optional<BlockFormat> best;
    Bits best_bits = 0;
    for (auto f : kAllFormats) {
        if (!formats.contains(f)) continue;
        const Bits bits = block_format_bits(f, size, z, precision);
        if (!best || bits < best_bits) {
            best = f;
            best_bits = bits;
        }
    }
    if (!best) throw std::invalid_argument("empty format set");
    return *best;
}

NnzHistogram nnz_histogram(const BlockNnzMap& map) {
    std::vector<Count> dense(Count{map.size.area()} + 1, 0);
    for (const auto& block : map.blocks) ++dense[block.nnz];
    NnzHistogram out;
    out.blocks = map.blocks.size();
    for (std::uint32_t z = 1; z < dense.size(); ++z)
        if (dense[z] != 0) out.bins.emplace_back(z, dense[z]);
    return out;
}

namespace {

std::array<Bits, 4> format_totals(BlockSize size, const NnzHistogram& histogram, Precision precision) {
    std::array<Bits, 4> totals{};
    for (const auto& [z, count] : histogram.bins)
        for (auto f : kAllFormats)
            totals[static_cast<unsigned>(f)] += count * block_format_bits(f, size, z, precision);
    return totals;
}

Bits min_over(const std::array<Bits, 4>& totals, FormatSet formats, BlockFormat* chosen = nullptr) {
    std::optional<Bits> best;
    for (auto f : kAllFormats) {
        if (!formats.contains(f)) continue;
        const Bits t = totals[static_cast<unsigned>(f)];
        if (!best || t < *best) {
            best = t;
            if (chosen) *chosen = f;
        }
    }
    if (!best) throw std::invalid_argument("empty format set");
    return *best;
}

}  // namespace

BlockFormat min_fixed_format(const BlockNnzMap& map, FormatSet formats, Precision precision) {
    BlockFormat chosen = BlockFormat::Coo;
    min_over(format_totals(map.size, nnz_histogram(map), precision), formats, &chosen);
    return chosen;
}

std::vector<Bits> evaluate_schemes(const BlockNnzMap& map, const NnzHistogram& histogram,
                                   std::span<const Scheme> schemes, Precision precision) {
    const Bits overhead = structure_overhead(map);
    const auto totals = format_totals(map.size, histogram, precision);
    std::vector<Bits> out;
    out.reserve(schemes.size());
    for (const auto& scheme : schemes) {
        switch (scheme.kind) {
            case SchemeKind::Fixed:
                out.push_back(overhead + totals[static_cast<unsigned>(scheme.format())]);
                break;
            case SchemeKind::MinFixed:
                out.push_back(overhead + min_over(totals, scheme.formats) + kFormatTagBits);
                break;
            case SchemeKind::Adaptive: {
                Bits sum = 0;
                for (const auto& [z, count] : histogram.bins) {
                    const auto f = best_block_format(scheme.formats, map.size, z, precision);
                    sum += count * (block_format_bits(f, map.size, z, precision) + kFormatTagBits);
                }
                out.push_back(overhead + sum);
                break;
            }
        }
    }
    return out;
}

Bits mmf(const BlockNnzMap& map, const Scheme& scheme, Precision precision) {
    if (map.blocks.empty()) throw std::invalid_argument("footprint of a matrix without stored elements");
    return evaluate_schemes(map, nnz_histogram(map), std::span(&scheme, 1), precision).front();
}

Bits mmf(const SparseMatrix& matrix, const Scheme& scheme, BlockSize size, Precision precision) {
    return mmf(block_nnz_map(matrix, size), scheme, precision);
}

}  // namespace sbm
