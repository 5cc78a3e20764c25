#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "ccx/errors.hpp"

namespace ccx {

enum class GeneratorKind : uint8_t {
    Zero = 0,
    Lfsr32 = 1,
    Rc4 = 2,
};

class Key {
public:
    explicit Key(std::vector<uint8_t> bytes) : bytes_(std::move(bytes)) {
        if (bytes_.empty() || bytes_.size() > 256)
            throw KeyError("key must be 1..256 bytes");
    }

    static Key from_string(std::string_view text) {
        return Key(std::vector<uint8_t>(text.begin(), text.end()));
    }

    const std::vector<uint8_t>& bytes() const noexcept { return bytes_; }

private:
    std::vector<uint8_t> bytes_;
};

// Deterministic infinite bit source. next_bits packs the next `width` bits
// MSB-first; rebuilding a generator from the same key replays the sequence
// from bit 0.
class KeystreamGenerator {
public:
    virtual ~KeystreamGenerator() = default;

    virtual GeneratorKind kind() const noexcept = 0;

    virtual uint32_t next_bits(unsigned width) {
        if (width < 1 || width > 32)
            throw std::invalid_argument("keystream width must be in [1,32]");
        uint32_t value = 0;
        for (unsigned i = 0; i < width; ++i)
            value = (value << 1) | next_bit();
        return value;
    }

protected:
    virtual unsigned next_bit() = 0;
};

// One step of a Fibonacci LFSR with `width` stages. The output bit is the
// LSB of the pre-step state; the feedback bit, the XOR of the positions in
// `tap_mask`, is shifted in at the top. For a feedback polynomial with tap
// exponent e, the mask has bit (width - e) set.
inline unsigned lfsr_step(uint32_t& state, unsigned width, uint32_t tap_mask) {
    const unsigned out = state & 1u;
    const unsigned feedback = static_cast<unsigned>(std::popcount(state & tap_mask)) & 1u;
    state = (state >> 1) | (static_cast<uint32_t>(feedback) << (width - 1));
    return out;
}

// x^32 + x^22 + x^2 + x^1 + 1 (maximal length): bits {0, 10, 30, 31}.
inline constexpr uint32_t kLfsr32TapMask = 0xC0000401u;

class Lfsr32Keystream final : public KeystreamGenerator {
public:
    explicit Lfsr32Keystream(const Key& key) {
        const auto& kb = key.bytes();
        uint32_t seed = 0;
        for (size_t i = 0; i < 4; ++i)
            seed = (seed << 8) | (i < kb.size() ? kb[i] : 0);
        if (seed == 0)
            throw KeyError("LFSR32 seed resolves to the all-zero register");
        state_ = seed;
    }

    GeneratorKind kind() const noexcept override { return GeneratorKind::Lfsr32; }

    uint32_t state() const noexcept { return state_; }

protected:
    unsigned next_bit() override { return lfsr_step(state_, 32, kLfsr32TapMask); }

private:
    uint32_t state_;
};

// Plain RC4: key scheduling plus output generation, no drop-N.
class Rc4 {
public:
    explicit Rc4(std::span<const uint8_t> key) {
        if (key.empty())
            throw KeyError("RC4 key must be non-empty");
        const size_t klen = std::min<size_t>(key.size(), 256);
        std::iota(perm_.begin(), perm_.end(), 0);
        uint8_t j = 0;
        for (unsigned i = 0; i < 256; ++i) {
            j = static_cast<uint8_t>(j + perm_[i] + key[i % klen]);
            std::swap(perm_[i], perm_[j]);
        }
    }

    uint8_t next_byte() {
        i_ = static_cast<uint8_t>(i_ + 1);
        j_ = static_cast<uint8_t>(j_ + perm_[i_]);
        std::swap(perm_[i_], perm_[j_]);
        return perm_[static_cast<uint8_t>(perm_[i_] + perm_[j_])];
    }

    const std::array<uint8_t, 256>& permutation() const noexcept { return perm_; }

private:
    std::array<uint8_t, 256> perm_{};
    uint8_t i_ = 0;
    uint8_t j_ = 0;
};

class Rc4Keystream final : public KeystreamGenerator {
public:
    explicit Rc4Keystream(const Key& key) : rc4_(key.bytes()) {}

    GeneratorKind kind() const noexcept override { return GeneratorKind::Rc4; }

protected:
    // Bits come MSB-first from successive output bytes; unused bits stay
    // buffered for the next request.
    unsigned next_bit() override {
        if (bits_left_ == 0) {
            current_ = rc4_.next_byte();
            bits_left_ = 8;
        }
        --bits_left_;
        return (current_ >> bits_left_) & 1u;
    }

private:
    Rc4 rc4_;
    uint8_t current_ = 0;
    unsigned bits_left_ = 0;
};

// Test/debug stream of zero bits; exposes the bare compressor output.
class ZeroKeystream final : public KeystreamGenerator {
public:
    GeneratorKind kind() const noexcept override { return GeneratorKind::Zero; }

    uint32_t next_bits(unsigned width) override {
        if (width < 1 || width > 32)
            throw std::invalid_argument("keystream width must be in [1,32]");
        return 0;
    }

protected:
    unsigned next_bit() override { return 0; }
};

inline std::unique_ptr<KeystreamGenerator> make_generator(GeneratorKind kind, const Key& key) {
    switch (kind) {
        case GeneratorKind::Zero:
            return std::make_unique<ZeroKeystream>();
        case GeneratorKind::Lfsr32:
            return std::make_unique<Lfsr32Keystream>(key);
        case GeneratorKind::Rc4:
            return std::make_unique<Rc4Keystream>(key);
    }
    throw std::invalid_argument("unknown generator kind");
}

// Key-dependent bijection on byte values: a Fisher-Yates shuffle driven by a
// dedicated RC4 instance keyed with a domain-separation prefix, so the
// shuffle stream never overlaps the payload keystream.
inline std::array<uint8_t, 256> derive_permutation(const Key& key) {
    std::vector<uint8_t> seed;
    seed.reserve(key.bytes().size() + 1);
    seed.push_back(0x50);
    seed.insert(seed.end(), key.bytes().begin(), key.bytes().end());
    if (seed.size() > 256)
        seed.resize(256);
    Rc4 gen(seed);

    std::array<uint8_t, 256> perm{};
    std::iota(perm.begin(), perm.end(), 0);
    for (unsigned i = 255; i >= 1; --i) {
        // rejection-sampled uniform index in [0, i]
        const unsigned bound = i + 1;
        const unsigned limit = 256 - (256 % bound);
        unsigned r;
        do {
            r = gen.next_byte();
        } while (r >= limit);
        std::swap(perm[i], perm[r % bound]);
    }
    return perm;
}

inline std::array<uint8_t, 256> identity_permutation() {
    std::array<uint8_t, 256> perm{};
    std::iota(perm.begin(), perm.end(), 0);
    return perm;
}

}  // namespace ccx
