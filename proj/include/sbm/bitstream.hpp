#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace sbm {

/// MSB-first bit writer; the last byte is zero-padded.
class BitWriter {
public:
    /// Appends the low `width` bits of `value`, most significant first.
    void write(std::uint64_t value, unsigned width) {
        if (width > 64) throw std::invalid_argument("bit field wider than 64");
        if (width < 64 && (value >> width) != 0)
            throw std::invalid_argument("value does not fit its bit field");
        while (width > 0) {
            const unsigned offset = static_cast<unsigned>(bits_ % 8);
            if (offset == 0) bytes_.push_back(0);
            const unsigned take = std::min(width, 8 - offset);
            const auto chunk = static_cast<std::uint8_t>((value >> (width - take)) & ((1u << take) - 1));
            bytes_.back() |= static_cast<std::uint8_t>(chunk << (8 - offset - take));
            width -= take;
            bits_ += take;
        }
    }

    std::uint64_t bit_count() const noexcept { return bits_; }
    const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
    std::vector<std::uint8_t> release() && { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
    std::uint64_t bits_ = 0;
};

class BitstreamExhausted : public std::runtime_error {
public:
    BitstreamExhausted() : std::runtime_error("read past end of bitstream") {}
};

/// Reads what BitWriter wrote, bounded by an explicit bit length.
class BitReader {
public:
    BitReader(std::span<const std::uint8_t> bytes, std::uint64_t bit_length)
        : bytes_(bytes), limit_(bit_length) {
        if (bit_length > bytes.size() * 8) throw BitstreamExhausted();
    }

    std::uint64_t read(unsigned width) {
        if (width > 64) throw std::invalid_argument("bit field wider than 64");
        if (limit_ - pos_ < width) throw BitstreamExhausted();
        std::uint64_t value = 0;
        while (width > 0) {
            const unsigned offset = static_cast<unsigned>(pos_ % 8);
            const unsigned take = std::min(width, 8 - offset);
            const unsigned byte = bytes_[static_cast<std::size_t>(pos_ / 8)];
            value = (value << take) | ((byte >> (8 - offset - take)) & ((1u << take) - 1));
            width -= take;
            pos_ += take;
        }
        return value;
    }

    std::uint64_t position() const noexcept { return pos_; }
    std::uint64_t remaining() const noexcept { return limit_ - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::uint64_t limit_;
    std::uint64_t pos_ = 0;
};

}  // namespace sbm
