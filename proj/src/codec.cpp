#include "sbm/codec.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>

#include "sbm/bitstream.hpp"

namespace sbm {

std::uint64_t value_bits_of(double value, Precision precision) {
    if (precision == Precision::Double) return std::bit_cast<std::uint64_t>(value);
    return std::bit_cast<std::uint32_t>(static_cast<float>(value));
}

double value_from_bits(std::uint64_t bits, Precision precision) {
    if (precision == Precision::Double) return std::bit_cast<double>(bits);
    return static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(bits)));
}

std::vector<double> DecodedMatrix::values() const {
    std::vector<double> out;
    out.reserve(value_bits.size());
    for (auto bits : value_bits) out.push_back(value_from_bits(bits, precision));
    return out;
}

namespace {

bool numerically_zero(std::uint64_t bits, Precision precision) {
    const std::uint64_t magnitude =
        precision == Precision::Double ? 0x7FFF'FFFF'FFFF'FFFFull : 0x7FFF'FFFFull;
    return (bits & magnitude) == 0;
}

bool needs_count(BlockFormat f) { return f == BlockFormat::Coo || f == BlockFormat::Csr; }

unsigned tag_of(BlockFormat f) { return static_cast<unsigned>(f); }

[[noreturn]] void corrupt(const std::string& what) {
    throw CodecError(CodecErrc::CorruptPayload, "corrupt payload: " + what);
}

void validate_header(const ContainerHeader& h) {
    if (h.version != kContainerVersion)
        throw CodecError(CodecErrc::UnsupportedVersion,
                         "unsupported container version " + std::to_string(h.version));
    if (h.rows == 0 || h.cols == 0)
        throw CodecError(CodecErrc::InvalidHeader, "container dimensions must be positive");
    if (h.symmetry == Symmetry::Symmetric && h.rows != h.cols)
        throw CodecError(CodecErrc::InvalidHeader, "symmetric container must be square");
    if (h.scheme.formats.empty() ||
        (h.scheme.kind == SchemeKind::Fixed && h.scheme.formats.size() != 1))
        throw CodecError(CodecErrc::InvalidHeader, "invalid scheme format set");
}

}  // namespace

BlockedContainer encode(const SparseMatrix& matrix, const Scheme& scheme, BlockSize size,
                        Precision precision, std::span<const std::uint64_t> value_bits) {
    if (matrix.empty()) throw CodecError(CodecErrc::EmptyMatrix, "cannot encode an empty matrix");
    if (value_bits.size() != matrix.nnz_stored())
        throw CodecError(CodecErrc::ValueCountMismatch,
                         "expected " + std::to_string(matrix.nnz_stored()) + " values, got " +
                             std::to_string(value_bits.size()));
    const unsigned b = bits_of(precision);
    if (b < 64) {
        for (auto v : value_bits)
            if ((v >> b) != 0)
                throw CodecError(CodecErrc::InvalidValue, "value bit pattern wider than precision");
    }

    const unsigned k = size.row_exp();
    const unsigned l = size.col_exp();
    const std::uint32_t h = size.height();
    const std::uint32_t w = size.width();
    const auto map = block_nnz_map(matrix, size);
    const unsigned col_bits = ceil_log2(map.block_cols);
    const unsigned count_bits = ceil_log2(Bits{map.block_cols} + 1);

    std::vector<BlockFormat> formats(map.blocks.size());
    if (scheme.kind == SchemeKind::Fixed) {
        std::fill(formats.begin(), formats.end(), scheme.format());
    } else if (scheme.kind == SchemeKind::MinFixed) {
        std::fill(formats.begin(), formats.end(), min_fixed_format(map, scheme.formats, precision));
    } else {
        for (std::size_t i = 0; i < map.blocks.size(); ++i)
            formats[i] = best_block_format(scheme.formats, size, map.blocks[i].nnz, precision);
    }

    // Element indices grouped by block; stability keeps row-major order inside a block.
    const auto elements = matrix.elements();
    std::vector<std::size_t> order(elements.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b2) {
        const Coord ka{elements[a].row >> k, elements[a].col >> l};
        const Coord kb{elements[b2].row >> k, elements[b2].col >> l};
        return ka < kb;
    });

    BitWriter payload;
    BitWriter sideband;
    if (scheme.kind == SchemeKind::MinFixed) payload.write(tag_of(formats.front()), kFormatTagBits);
    for (auto count : map.row_counts) payload.write(count, count_bits);

    std::size_t next = 0;
    for (std::size_t bi = 0; bi < map.blocks.size(); ++bi) {
        const auto& block = map.blocks[bi];
        const auto format = formats[bi];
        const std::span<const std::size_t> members(order.data() + next, block.nnz);
        next += block.nnz;

        payload.write(block.col, col_bits);
        if (scheme.kind == SchemeKind::Adaptive) payload.write(tag_of(format), kFormatTagBits);
        if (needs_count(format)) sideband.write(block.nnz - 1, k + l);

        auto local_row = [&](std::size_t e) { return elements[e].row & (h - 1); };
        auto local_col = [&](std::size_t e) { return elements[e].col & (w - 1); };

        switch (format) {
            case BlockFormat::Coo:
                for (auto e : members) {
                    payload.write(local_row(e), k);
                    payload.write(local_col(e), l);
                    payload.write(value_bits[e], b);
                }
                break;
            case BlockFormat::Csr: {
                const unsigned offset_bits = ceil_log2(Bits{block.nnz} + 1);
                std::size_t cursor = 0;
                for (std::uint32_t r = 0; r < h; ++r) {
                    while (cursor < members.size() && local_row(members[cursor]) == r) ++cursor;
                    payload.write(cursor, offset_bits);
                }
                for (auto e : members) payload.write(local_col(e), l);
                for (auto e : members) payload.write(value_bits[e], b);
                break;
            }
            case BlockFormat::Bitmap: {
                std::uint64_t pos = 0;
                for (auto e : members) {
                    const std::uint64_t target = std::uint64_t{local_row(e)} * w + local_col(e);
                    for (; target - pos >= 64; pos += 64) payload.write(0, 64);
                    if (target > pos) payload.write(0, static_cast<unsigned>(target - pos));
                    payload.write(1, 1);
                    pos = target + 1;
                }
                for (; size.area() - pos >= 64; pos += 64) payload.write(0, 64);
                if (size.area() > pos) payload.write(0, static_cast<unsigned>(size.area() - pos));
                for (auto e : members) payload.write(value_bits[e], b);
                break;
            }
            case BlockFormat::Dense: {
                std::uint64_t pos = 0;
                for (auto e : members) {
                    if (numerically_zero(value_bits[e], precision))
                        throw CodecError(CodecErrc::ZeroInDenseBlock,
                                         "stored zero at (" + std::to_string(elements[e].row) + ", " +
                                             std::to_string(elements[e].col) +
                                             ") cannot be represented in a dense block");
                    const std::uint64_t target = std::uint64_t{local_row(e)} * w + local_col(e);
                    for (; pos < target; ++pos) payload.write(0, b);
                    payload.write(value_bits[e], b);
                    pos = target + 1;
                }
                for (; pos < size.area(); ++pos) payload.write(0, b);
                break;
            }
        }
    }

    const Bits model = mmf(map, scheme, precision);
    if (payload.bit_count() != model)
        throw std::logic_error("encoded payload length " + std::to_string(payload.bit_count()) +
                               " differs from model " + std::to_string(model));

    BlockedContainer out;
    out.header.rows = matrix.rows();
    out.header.cols = matrix.cols();
    out.header.symmetry = matrix.symmetry();
    out.header.size = size;
    out.header.precision = precision;
    out.header.scheme = scheme;
    out.header.nnz_stored = matrix.nnz_stored();
    out.header.payload_bits = payload.bit_count();
    out.header.sideband_bits = sideband.bit_count();
    out.payload = std::move(payload).release();
    out.sideband = std::move(sideband).release();
    return out;
}

BlockedContainer encode(const SparseMatrix& matrix, const Scheme& scheme, BlockSize size,
                        Precision precision, std::span<const double> values) {
    std::vector<std::uint64_t> bits;
    bits.reserve(values.size());
    for (double v : values) bits.push_back(value_bits_of(v, precision));
    return encode(matrix, scheme, size, precision, bits);
}

DecodedMatrix decode(const BlockedContainer& container) {
    const auto& hdr = container.header;
    validate_header(hdr);
    if (container.payload.size() * 8 < hdr.payload_bits ||
        container.sideband.size() * 8 < hdr.sideband_bits)
        throw CodecError(CodecErrc::Truncated, "container sections shorter than declared");

    const BlockSize size = hdr.size;
    const unsigned k = size.row_exp();
    const unsigned l = size.col_exp();
    const std::uint32_t h = size.height();
    const std::uint32_t w = size.width();
    const Precision precision = hdr.precision;
    const unsigned b = bits_of(precision);
    const Index block_rows = static_cast<Index>((Count{hdr.rows} + h - 1) >> k);
    const Index block_cols = static_cast<Index>((Count{hdr.cols} + w - 1) >> l);
    const unsigned col_bits = ceil_log2(block_cols);
    const unsigned count_bits = ceil_log2(Bits{block_cols} + 1);
    const FormatSet allowed = hdr.scheme.formats;

    struct Item {
        Coord coord;
        std::uint64_t bits;
    };
    std::vector<Item> items;

    BitReader in(container.payload, hdr.payload_bits);
    BitReader side(container.sideband, hdr.sideband_bits);
    try {
        auto read_tag = [&]() {
            const auto f = static_cast<BlockFormat>(in.read(kFormatTagBits));
            if (!allowed.contains(f)) corrupt("format tag outside the scheme's format set");
            return f;
        };

        std::optional<BlockFormat> fixed_format;
        if (hdr.scheme.kind == SchemeKind::Fixed) fixed_format = hdr.scheme.format();
        if (hdr.scheme.kind == SchemeKind::MinFixed) fixed_format = read_tag();

        std::vector<std::uint32_t> row_counts(block_rows);
        for (auto& c : row_counts) {
            c = static_cast<std::uint32_t>(in.read(count_bits));
            if (c > block_cols) corrupt("block row count exceeds block columns");
        }

        for (Index block_row = 0; block_row < block_rows; ++block_row) {
            std::optional<Index> previous_col;
            for (std::uint32_t j = 0; j < row_counts[block_row]; ++j) {
                const auto block_col = static_cast<Index>(in.read(col_bits));
                if (block_col >= block_cols || (previous_col && block_col <= *previous_col))
                    corrupt("block columns out of order or range");
                previous_col = block_col;
                const BlockFormat format = fixed_format ? *fixed_format : read_tag();

                const std::uint64_t row0 = std::uint64_t{block_row} << k;
                const std::uint64_t col0 = std::uint64_t{block_col} << l;
                const std::size_t first = items.size();
                auto emit = [&](std::uint64_t r, std::uint64_t c, std::uint64_t bits) {
                    const std::uint64_t gr = row0 + r, gc = col0 + c;
                    if (gr >= hdr.rows || gc >= hdr.cols) corrupt("element outside the matrix");
                    const std::uint64_t pos = r * w + c;
                    if (items.size() > first) {
                        const auto& prev = items.back().coord;
                        if (pos <= (std::uint64_t{prev.row} - row0) * w + (prev.col - col0))
                            corrupt("block elements not in row-major order");
                    }
                    items.push_back({Coord{static_cast<Index>(gr), static_cast<Index>(gc)}, bits});
                };

                switch (format) {
                    case BlockFormat::Coo: {
                        const auto z = side.read(k + l) + 1;
                        for (std::uint64_t i = 0; i < z; ++i) {
                            const auto r = in.read(k);
                            const auto c = in.read(l);
                            emit(r, c, in.read(b));
                        }
                        break;
                    }
                    case BlockFormat::Csr: {
                        const auto z = side.read(k + l) + 1;
                        const unsigned offset_bits = ceil_log2(z + 1);
                        std::vector<std::uint64_t> ends(h);
                        std::uint64_t last = 0;
                        for (auto& e : ends) {
                            e = in.read(offset_bits);
                            if (e < last || e > z) corrupt("CSR offsets not monotone");
                            last = e;
                        }
                        if (last != z) corrupt("CSR offsets do not end at the block count");
                        std::vector<std::uint64_t> cols(z);
                        for (auto& c : cols) c = in.read(l);
                        std::uint64_t idx = 0;
                        for (std::uint32_t r = 0; r < h; ++r)
                            for (; idx < ends[r]; ++idx) emit(r, cols[idx], in.read(b));
                        break;
                    }
                    case BlockFormat::Bitmap: {
                        std::vector<std::uint64_t> positions;
                        for (std::uint64_t pos = 0; pos < size.area();) {
                            const unsigned chunk =
                                static_cast<unsigned>(std::min<std::uint64_t>(64, size.area() - pos));
                            const auto word = in.read(chunk);
                            for (unsigned bit = 0; bit < chunk; ++bit)
                                if ((word >> (chunk - 1 - bit)) & 1u) positions.push_back(pos + bit);
                            pos += chunk;
                        }
                        for (auto pos : positions) emit(pos / w, pos % w, in.read(b));
                        break;
                    }
                    case BlockFormat::Dense:
                        for (std::uint64_t pos = 0; pos < size.area(); ++pos) {
                            const auto bits = in.read(b);
                            if (bits != 0) emit(pos / w, pos % w, bits);
                        }
                        break;
                }
                if (items.size() == first) corrupt("nonzero block without elements");
            }
        }
    } catch (const BitstreamExhausted&) {
        throw CodecError(CodecErrc::Truncated, "payload ends before the matrix is complete");
    }
    if (in.remaining() != 0)
        throw CodecError(CodecErrc::LengthMismatch,
                         "payload longer than the encoded matrix by " +
                             std::to_string(in.remaining()) + " bits");
    if (side.remaining() != 0)
        throw CodecError(CodecErrc::LengthMismatch, "sideband longer than the encoded matrix");

    std::sort(items.begin(), items.end(),
              [](const Item& a, const Item& c) { return a.coord < c.coord; });
    std::vector<Coord> coords;
    DecodedMatrix out;
    out.precision = precision;
    coords.reserve(items.size());
    out.value_bits.reserve(items.size());
    for (const auto& item : items) {
        coords.push_back(item.coord);
        out.value_bits.push_back(item.bits);
    }
    try {
        out.matrix = SparseMatrix::from_sorted(hdr.rows, hdr.cols, hdr.symmetry, std::move(coords));
    } catch (const std::invalid_argument& e) {
        corrupt(e.what());
    }
    if (out.matrix.nnz_stored() != hdr.nnz_stored)
        throw CodecError(CodecErrc::LengthMismatch, "decoded element count differs from header");
    if (out.matrix.empty()) throw CodecError(CodecErrc::EmptyMatrix, "container holds no elements");
    const Bits model = mmf(out.matrix, hdr.scheme, size, precision);
    if (model != hdr.payload_bits)
        throw CodecError(CodecErrc::LengthMismatch,
                         "payload has " + std::to_string(hdr.payload_bits) +
                             " bits but the footprint model predicts " + std::to_string(model));
    return out;
}

// ---------------------------------------------------------------------------
// Byte serialization

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes[offset + i]} << (8 * i);
    return v;
}

std::uint64_t byte_length(std::uint64_t bits) { return (bits + 7) / 8; }

bool padding_clear(std::span<const std::uint8_t> bytes, std::uint64_t bits) {
    if (bits % 8 == 0 || bytes.empty()) return true;
    const unsigned used = static_cast<unsigned>(bits % 8);
    return (bytes.back() & ((1u << (8 - used)) - 1)) == 0;
}

}  // namespace

std::vector<std::uint8_t> serialize(const BlockedContainer& c) {
    const auto& h = c.header;
    std::vector<std::uint8_t> out(kContainerMagic.begin(), kContainerMagic.end());
    out.reserve(kContainerHeaderBytes + c.payload.size() + c.sideband.size());
    put_u32(out, h.version);
    put_u32(out, h.rows);
    put_u32(out, h.cols);
    put_u32(out, static_cast<std::uint32_t>(h.symmetry));
    put_u32(out, h.size.row_exp());
    put_u32(out, h.size.col_exp());
    put_u32(out, bits_of(h.precision));
    put_u32(out, static_cast<std::uint32_t>(h.scheme.kind));
    put_u32(out, h.scheme.formats.mask());
    for (std::uint64_t v : {h.nnz_stored, h.payload_bits, h.sideband_bits}) {
        put_u32(out, static_cast<std::uint32_t>(v));
        put_u32(out, static_cast<std::uint32_t>(v >> 32));
    }
    out.insert(out.end(), c.payload.begin(), c.payload.end());
    out.insert(out.end(), c.sideband.begin(), c.sideband.end());
    return out;
}

BlockedContainer deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kContainerMagic.size())
        throw CodecError(CodecErrc::Truncated, "container shorter than its magic");
    if (!std::equal(kContainerMagic.begin(), kContainerMagic.end(), bytes.begin()))
        throw CodecError(CodecErrc::BadMagic, "not a blocked matrix container (bad magic)");
    if (bytes.size() < kContainerHeaderBytes)
        throw CodecError(CodecErrc::Truncated, "container header truncated");

    BlockedContainer c;
    auto& h = c.header;
    std::size_t at = 8;
    auto next = [&]() {
        const auto v = get_u32(bytes, at);
        at += 4;
        return v;
    };
    auto next64 = [&]() {
        const std::uint64_t lo = next();
        const std::uint64_t hi = next();
        return lo | (hi << 32);
    };
    h.version = next();
    if (h.version != kContainerVersion)
        throw CodecError(CodecErrc::UnsupportedVersion,
                         "unsupported container version " + std::to_string(h.version));
    h.rows = next();
    h.cols = next();
    const auto symmetry = next();
    const auto k = next();
    const auto l = next();
    const auto b = next();
    const auto kind = next();
    const auto mask = next();
    h.nnz_stored = next64();
    h.payload_bits = next64();
    h.sideband_bits = next64();
    try {
        if (symmetry > 1) throw std::invalid_argument("symmetry");
        if (kind > 2) throw std::invalid_argument("scheme kind");
        h.symmetry = static_cast<Symmetry>(symmetry);
        h.size = BlockSize(k, l);
        h.precision = precision_from_bits(b);
        h.scheme = Scheme{static_cast<SchemeKind>(kind), FormatSet::from_mask(mask)};
    } catch (const std::invalid_argument& e) {
        throw CodecError(CodecErrc::InvalidHeader, std::string("invalid container header field: ") + e.what());
    }
    validate_header(h);

    const std::uint64_t payload_bytes = byte_length(h.payload_bits);
    const std::uint64_t sideband_bytes = byte_length(h.sideband_bits);
    const std::uint64_t body = bytes.size() - kContainerHeaderBytes;
    if (payload_bytes > body || sideband_bytes > body - payload_bytes)
        throw CodecError(CodecErrc::Truncated, "container body truncated");
    if (payload_bytes + sideband_bytes != body)
        throw CodecError(CodecErrc::TrailingData, "trailing bytes after container body");

    const auto payload = bytes.subspan(kContainerHeaderBytes, payload_bytes);
    const auto sideband = bytes.subspan(kContainerHeaderBytes + payload_bytes, sideband_bytes);
    if (!padding_clear(payload, h.payload_bits) || !padding_clear(sideband, h.sideband_bits))
        throw CodecError(CodecErrc::CorruptPayload, "nonzero padding bits");
    c.payload.assign(payload.begin(), payload.end());
    c.sideband.assign(sideband.begin(), sideband.end());
    return c;
}

void write_container_file(const std::filesystem::path& path, const BlockedContainer& container) {
    const auto bytes = serialize(container);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

BlockedContainer read_container_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return deserialize(bytes);
}

}  // namespace sbm
