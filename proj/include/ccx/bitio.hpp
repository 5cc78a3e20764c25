#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ccx/errors.hpp"

namespace ccx {

// Variable-width code packing. Codes are appended most-significant-bit first,
// concatenated left to right; bytes fill big-endian and the final partial
// byte is padded with zero bits.

namespace bitio_detail {

inline void check_width(unsigned width) {
    if (width < 1 || width > 32)
        throw std::invalid_argument("bit width must be in [1,32]");
}

inline constexpr uint32_t width_mask(unsigned width) {
    return width >= 32 ? ~uint32_t{0} : (uint32_t{1} << width) - 1;
}

}  // namespace bitio_detail

class BitWriter {
public:
    BitWriter() = default;

    void write_code(uint32_t code, unsigned width) {
        bitio_detail::check_width(width);
        if (code > bitio_detail::width_mask(width))
            throw std::invalid_argument("BitWriter: code does not fit in width");
        if (flushed_)
            throw std::logic_error("BitWriter: used after flush");
        // acc_ holds at most 7 pending bits, so width+pending <= 39 bits.
        acc_ = (acc_ << width) | code;
        pending_ += width;
        while (pending_ >= 8) {
            buffer_.push_back(static_cast<uint8_t>(acc_ >> (pending_ - 8)));
            pending_ -= 8;
        }
        acc_ &= (uint64_t{1} << pending_) - 1;
        bit_position_ += width;
    }

    // Total bits accepted since creation.
    uint64_t bit_position() const noexcept { return bit_position_; }

    // Pads the final partial byte with zeros and hands the buffer out.
    // The writer is unusable afterwards.
    std::vector<uint8_t> flush() {
        if (flushed_)
            throw std::logic_error("BitWriter: flushed twice");
        if (pending_ > 0) {
            buffer_.push_back(static_cast<uint8_t>(acc_ << (8 - pending_)));
            acc_ = 0;
            pending_ = 0;
        }
        flushed_ = true;
        return std::move(buffer_);
    }

    // Moves out all complete bytes, keeping any partial byte pending.
    // Lets a long-running producer drain the buffer incrementally.
    std::vector<uint8_t> take_complete_bytes() {
        std::vector<uint8_t> out;
        out.swap(buffer_);
        return out;
    }

    size_t buffered_bytes() const noexcept { return buffer_.size(); }

private:
    std::vector<uint8_t> buffer_;
    uint64_t bit_position_ = 0;
    uint64_t acc_ = 0;
    unsigned pending_ = 0;
    bool flushed_ = false;
};

class BitReader {
public:
    explicit BitReader(std::span<const uint8_t> source) : source_(source) {}

    uint32_t read_code(unsigned width) {
        bitio_detail::check_width(width);
        if (bits_remaining() < width)
            throw EndOfStreamError("BitReader: fewer bits remain than requested");
        uint32_t value = 0;
        unsigned need = width;
        while (need > 0) {
            const size_t byte_index = static_cast<size_t>(bit_position_ >> 3);
            const unsigned offset = static_cast<unsigned>(bit_position_ & 7);
            const unsigned take = std::min(8 - offset, need);
            const unsigned shift = 8 - offset - take;
            const uint32_t bits = (source_[byte_index] >> shift) & bitio_detail::width_mask(take);
            value = (value << take) | bits;
            bit_position_ += take;
            need -= take;
        }
        return value;
    }

    uint64_t bit_position() const noexcept { return bit_position_; }

    uint64_t bits_remaining() const noexcept {
        return static_cast<uint64_t>(source_.size()) * 8 - bit_position_;
    }

private:
    std::span<const uint8_t> source_;
    uint64_t bit_position_ = 0;
};

}  // namespace ccx
