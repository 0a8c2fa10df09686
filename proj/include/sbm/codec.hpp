#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "sbm/block_model.hpp"

namespace sbm {

// Container file (.sbm):
//
//   bytes 0..7    magic "SBMCNTR1"
//   15 x u32 LE   version, rows, cols, symmetry, k, l, b, scheme kind,
//                 format mask, nnz lo/hi, payload bits lo/hi, sideband bits lo/hi
//   payload       ceil(payload_bits / 8) bytes
//   sideband      ceil(sideband_bits / 8) bytes
//
// The payload is the blocked matrix, MSB-first, and its bit length equals
// mmf() for the header's configuration. Layout:
//
//   [min-fixed: 2-bit format tag]
//   M nonzero-block counts, ceil(log2(N+1)) bits each
//   per nonzero block, lexicographic order:
//     block column, ceil(log2 N) bits
//     [adaptive: 2-bit format tag]
//     body: COO    z x (local row k bits, local col l bits, value b bits)
//           CSR    h end offsets of ceil(log2(z+1)) bits, z local cols, z values
//           bitmap h*w occupancy bits, z values
//           dense  h*w values, absent elements as all-zero bits
//
// COO and CSR bodies do not carry their element count, so the sideband holds
// z-1 in k+l bits for every COO or CSR block. It is decoding metadata, like
// the header, and is not part of the footprint.

inline constexpr std::array<char, 8> kContainerMagic = {'S', 'B', 'M', 'C', 'N', 'T', 'R', '1'};
inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::size_t kContainerHeaderBytes = 8 + 15 * 4;

struct ContainerHeader {
    std::uint32_t version = kContainerVersion;
    Index rows = 0;
    Index cols = 0;
    Symmetry symmetry = Symmetry::General;
    BlockSize size{1, 1};
    Precision precision = Precision::Double;
    Scheme scheme;
    Count nnz_stored = 0;
    Bits payload_bits = 0;
    Bits sideband_bits = 0;

    friend bool operator==(const ContainerHeader&, const ContainerHeader&) = default;
};

struct BlockedContainer {
    ContainerHeader header;
    std::vector<std::uint8_t> payload;
    std::vector<std::uint8_t> sideband;
};

enum class CodecErrc {
    BadMagic,
    UnsupportedVersion,
    InvalidHeader,
    Truncated,
    TrailingData,
    LengthMismatch,
    CorruptPayload,
    ValueCountMismatch,
    InvalidValue,
    ZeroInDenseBlock,
    EmptyMatrix,
};

class CodecError : public std::runtime_error {
public:
    CodecError(CodecErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    CodecErrc code() const noexcept { return code_; }

private:
    CodecErrc code_;
};

/// IEEE 754 bit pattern of `value` at the given precision (binary32 is rounded
/// from the double).
std::uint64_t value_bits_of(double value, Precision precision);
double value_from_bits(std::uint64_t bits, Precision precision);

/// `value_bits` holds one raw bit pattern per stored element, in element order.
BlockedContainer encode(const SparseMatrix& matrix, const Scheme& scheme, BlockSize size,
                        Precision precision, std::span<const std::uint64_t> value_bits);
BlockedContainer encode(const SparseMatrix& matrix, const Scheme& scheme, BlockSize size,
                        Precision precision, std::span<const double> values);

struct DecodedMatrix {
    SparseMatrix matrix;
    std::vector<std::uint64_t> value_bits;
    Precision precision = Precision::Double;

    std::vector<double> values() const;
};

DecodedMatrix decode(const BlockedContainer& container);

std::vector<std::uint8_t> serialize(const BlockedContainer& container);
BlockedContainer deserialize(std::span<const std::uint8_t> bytes);

void write_container_file(const std::filesystem::path& path, const BlockedContainer& container);
BlockedContainer read_container_file(const std::filesystem::path& path);

}  // namespace sbm
