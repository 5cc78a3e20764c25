#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "ccx/bitio.hpp"
#include "ccx/errors.hpp"
#include "ccx/keystream.hpp"

namespace ccx {

// One-pass dictionary compressor whose emitted pointers are XORed with a
// keystream as they are produced. The decoder mirrors the encoder's state
// machine (dictionary, width schedule, ratio monitor) exactly, so no escape
// or clear codes exist in the stream.

inline constexpr unsigned kInitialWidth = 9;
inline constexpr uint32_t kBaseEntries = 256;

enum class ResetPolicy : uint8_t {
    RatioMonitor = 0,  // reset only when savings degrade while the table is frozen
    ResetAtLimit = 1,  // reset the moment the table fills
};

struct CodecParams {
    unsigned max_width = 12;          // pointer width cap, 10..20
    ResetPolicy reset_policy = ResetPolicy::RatioMonitor;
    uint32_t ratio_window = 4096;     // plaintext bytes per monitoring window
    uint16_t savings_threshold = 50;  // minimum savings, per mille
    bool permute_initial = false;
    GeneratorKind generator = GeneratorKind::Rc4;

    void validate() const {
        if (max_width < 10 || max_width > 20)
            throw std::invalid_argument("max_width must be in [10,20]");
        if (savings_threshold > 1000)
            throw std::invalid_argument("savings_threshold must be in [0,1000]");
        if (ratio_window == 0)
            throw std::invalid_argument("ratio_window must be positive");
    }
};

// Pointer width for the k-th phrase since the last reset: 9 bits up to
// k = 255, then one more bit each time k reaches the next power of two,
// capped at max_width (9->10 at k=256, 10->11 at 512, 11->12 at 1024, ...).
inline unsigned width_of(uint64_t k, unsigned max_width) {
    const unsigned needed = static_cast<unsigned>(std::bit_width(k)) + 1;
    return std::min(max_width, std::max(kInitialWidth, needed));
}

// Unencrypted container envelope. All multi-byte integers are big-endian.
struct ContainerHeader {
    static constexpr std::array<uint8_t, 4> kMagic{'C', 'C', 'X', '1'};
    static constexpr uint8_t kVersion = 1;
    static constexpr size_t kSize = 22;
    static constexpr size_t kPlaintextLengthOffset = 14;

    GeneratorKind generator = GeneratorKind::Rc4;
    bool permute_initial = false;
    ResetPolicy reset_policy = ResetPolicy::RatioMonitor;
    uint8_t max_width = 12;
    uint32_t ratio_window = 4096;
    uint16_t savings_threshold = 50;
    uint64_t plaintext_length = 0;

    static ContainerHeader from_params(const CodecParams& params, uint64_t plaintext_length) {
        ContainerHeader h;
        h.generator = params.generator;
        h.permute_initial = params.permute_initial;
        h.reset_policy = params.reset_policy;
        h.max_width = static_cast<uint8_t>(params.max_width);
        h.ratio_window = params.ratio_window;
        h.savings_threshold = params.savings_threshold;
        h.plaintext_length = plaintext_length;
        return h;
    }

    CodecParams params() const {
        CodecParams p;
        p.max_width = max_width;
        p.reset_policy = reset_policy;
        p.ratio_window = ratio_window;
        p.savings_threshold = savings_threshold;
        p.permute_initial = permute_initial;
        p.generator = generator;
        return p;
    }

    std::array<uint8_t, kSize> serialize() const {
        std::array<uint8_t, kSize> out{};
        size_t at = 0;
        for (uint8_t m : kMagic) out[at++] = m;
        out[at++] = kVersion;
        out[at++] = static_cast<uint8_t>(generator);
        uint8_t flags = 0;
        if (permute_initial) flags |= 0x01;
        if (reset_policy == ResetPolicy::ResetAtLimit) flags |= 0x02;
        out[at++] = flags;
        out[at++] = max_width;
        for (int s = 24; s >= 0; s -= 8) out[at++] = static_cast<uint8_t>(ratio_window >> s);
        for (int s = 8; s >= 0; s -= 8) out[at++] = static_cast<uint8_t>(savings_threshold >> s);
        for (int s = 56; s >= 0; s -= 8) out[at++] = static_cast<uint8_t>(plaintext_length >> s);
        return out;
    }

    static ContainerHeader parse(std::span<const uint8_t> bytes) {
        if (bytes.size() < kSize)
            throw FormatError("container shorter than header");
        if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
            throw FormatError("bad magic");
        if (bytes[4] != kVersion)
            throw FormatError("unsupported version");
        ContainerHeader h;
        if (bytes[5] > 2)
            throw FormatError("unknown generator kind");
        h.generator = static_cast<GeneratorKind>(bytes[5]);
        const uint8_t flags = bytes[6];
        if (flags & ~0x03)
            throw FormatError("unknown flag bits");
        h.permute_initial = (flags & 0x01) != 0;
        h.reset_policy = (flags & 0x02) ? ResetPolicy::ResetAtLimit : ResetPolicy::RatioMonitor;
        h.max_width = bytes[7];
        if (h.max_width < 10 || h.max_width > 20)
            throw FormatError("max_width out of range");
        h.ratio_window = 0;
        for (size_t i = 8; i < 12; ++i) h.ratio_window = (h.ratio_window << 8) | bytes[i];
        if (h.ratio_window == 0)
            throw FormatError("ratio_window must be positive");
        h.savings_threshold = static_cast<uint16_t>((bytes[12] << 8) | bytes[13]);
        if (h.savings_threshold > 1000)
            throw FormatError("savings_threshold out of range");
        h.plaintext_length = 0;
        for (size_t i = 14; i < 22; ++i)
            h.plaintext_length = (h.plaintext_length << 8) | bytes[i];
        return h;
    }
};

using ByteSink = std::function<void(std::span<const uint8_t>)>;

// Dictionary reset, identified by how many phrases had been emitted and how
// many plaintext bytes those phrases covered. Encoder and decoder must log
// identical sequences.
struct ResetEvent {
    uint64_t emission = 0;
    uint64_t phrase_bytes = 0;
    bool operator==(const ResetEvent&) const = default;
};

namespace codec_detail {

// Window accounting shared by both sides: integer per-mille savings of the
// current monitoring window.
inline int64_t window_savings(uint64_t window_bits, uint64_t window_bytes) {
    return 1000 - static_cast<int64_t>((1000 * window_bits) / (8 * window_bytes));
}

}  // namespace codec_detail

class Encoder {
public:
    Encoder(const Key& key, const CodecParams& params, ByteSink payload_sink)
        : params_(params), sink_(std::move(payload_sink)) {
        params_.validate();
        ks_ = make_generator(params_.generator, key);
        cap_ = uint32_t{1} << params_.max_width;
        if (params_.permute_initial) {
            perm_ = derive_permutation(key);
            for (unsigned i = 0; i < 256; ++i)
                inv_perm_[perm_[i]] = static_cast<uint8_t>(i);
        } else {
            perm_ = identity_permutation();
            inv_perm_ = perm_;
        }
        table_.reserve(std::min<uint32_t>(cap_, 1u << 16));
    }

    void feed(std::span<const uint8_t> data) {
        if (finished_)
            throw std::logic_error("Encoder: feed after finish");
        for (uint8_t b : data)
            process_byte(b);
        bytes_in_ += data.size();
        drain();
    }

    // Emits the final pending phrase, flushes the bit stream and hands the
    // tail to the sink. Returns the plaintext length.
    uint64_t finish() {
        if (finished_)
            throw std::logic_error("Encoder: finished twice");
        if (have_phrase_)
            emit_phrase(/*has_next=*/false, 0);
        finished_ = true;
        auto tail = writer_.flush();
        if (!tail.empty())
            sink_(tail);
        return bytes_in_;
    }

    uint64_t bytes_in() const noexcept { return bytes_in_; }
    uint64_t payload_bits() const noexcept { return writer_.bit_position(); }
    uint64_t emissions() const noexcept { return emissions_; }
    const std::vector<ResetEvent>& resets() const noexcept { return resets_; }

    // Walks the dictionary invariants: index bounds, prefix closure, size.
    void debug_validate() const {
        if (next_index_ < kBaseEntries || next_index_ > cap_)
            throw std::logic_error("Encoder: next_index out of bounds");
        if (table_.size() != next_index_ - kBaseEntries)
            throw std::logic_error("Encoder: table size mismatch");
        for (const auto& [key, index] : table_) {
            const uint32_t prefix = static_cast<uint32_t>(key >> 8);
            if (index < kBaseEntries || index >= next_index_)
                throw std::logic_error("Encoder: entry index out of bounds");
            if (prefix >= kBaseEntries && prefix >= index)
                throw std::logic_error("Encoder: prefix not older than entry");
        }
    }

private:
    void process_byte(uint8_t b) {
        if (!have_phrase_) {
            phrase_index_ = inv_perm_[b];
            phrase_len_ = 1;
            have_phrase_ = true;
            return;
        }
        const uint64_t key = (static_cast<uint64_t>(phrase_index_) << 8) | b;
        if (auto it = table_.find(key); it != table_.end()) {
            phrase_index_ = it->second;
            ++phrase_len_;
            return;
        }
        emit_phrase(/*has_next=*/true, b);
        phrase_index_ = inv_perm_[b];
        phrase_len_ = 1;
    }

    void emit_phrase(bool has_next, uint8_t next_byte) {
        const unsigned w = width_of(k_, params_.max_width);
        const uint32_t code = (phrase_index_ ^ ks_->next_bits(w)) & bitio_detail::width_mask(w);
        writer_.write_code(code, w);
        ++emissions_;
        phrase_bytes_ += phrase_len_;
        if (!has_next)
            return;  // final flush: no insertion, nothing follows

        // The monitor only counts phrases emitted while the table was
        // already frozen; the phrase whose insertion froze it is excluded.
        const bool was_active = monitor_active_;
        bool reset_now = false;
        if (next_index_ < cap_) {
            table_.emplace((static_cast<uint64_t>(phrase_index_) << 8) | next_byte, next_index_);
            ++next_index_;
            if (next_index_ == cap_) {
                if (params_.reset_policy == ResetPolicy::ResetAtLimit) {
                    reset_dictionary();
                    reset_now = true;
                } else {
                    monitor_active_ = true;
                    window_bits_ = 0;
                    window_bytes_ = 0;
                }
            }
        }
        if (!reset_now)
            ++k_;
        if (params_.reset_policy == ResetPolicy::RatioMonitor && was_active) {
            window_bits_ += w;
            window_bytes_ += phrase_len_;
            if (window_bytes_ >= params_.ratio_window) {
                if (codec_detail::window_savings(window_bits_, window_bytes_) <
                    static_cast<int64_t>(params_.savings_threshold)) {
                    reset_dictionary();
                } else {
                    window_bits_ = 0;
                    window_bytes_ = 0;
                }
            }
        }
    }

    void reset_dictionary() {
        resets_.push_back({emissions_, phrase_bytes_});
        table_.clear();
        next_index_ = kBaseEntries;
        k_ = 0;
        monitor_active_ = false;
        window_bits_ = 0;
        window_bytes_ = 0;
    }

    void drain() {
        if (writer_.buffered_bytes() >= kDrainChunk) {
            auto chunk = writer_.take_complete_bytes();
            sink_(chunk);
        }
    }

    static constexpr size_t kDrainChunk = 64 * 1024;

    CodecParams params_;
    ByteSink sink_;
    std::unique_ptr<KeystreamGenerator> ks_;
    std::array<uint8_t, 256> perm_{};
    std::array<uint8_t, 256> inv_perm_{};

    std::unordered_map<uint64_t, uint32_t> table_;  // (prefix_index << 8 | byte) -> index
    uint32_t cap_ = 0;
    uint32_t next_index_ = kBaseEntries;
    uint64_t k_ = 0;  // phrases emitted since reset

    bool have_phrase_ = false;
    uint32_t phrase_index_ = 0;
    uint64_t phrase_len_ = 0;

    bool monitor_active_ = false;
    uint64_t window_bits_ = 0;
    uint64_t window_bytes_ = 0;

    BitWriter writer_;
    uint64_t bytes_in_ = 0;
    uint64_t emissions_ = 0;
    uint64_t phrase_bytes_ = 0;
    std::vector<ResetEvent> resets_;
    bool finished_ = false;
};

// Streaming decoder. Replays the encoder's state machine; dictionary
// insertions lag the encoder by one decoded pointer (the pending entry),
// including the self-referential pointer that names the entry being created.
class Decoder {
public:
    explicit Decoder(std::optional<Key> key, ByteSink plaintext_sink)
        : key_(std::move(key)), sink_(std::move(plaintext_sink)) {}

    void feed(std::span<const uint8_t> data) {
        if (finished_)
            throw std::logic_error("Decoder: feed after finish");
        size_t used = 0;
        if (!header_) {
            while (used < data.size() && header_bytes_ < ContainerHeader::kSize)
                header_buf_[header_bytes_++] = data[used++];
            if (header_bytes_ == ContainerHeader::kSize)
                open_header();
            else
                return;
        }
        if (done()) {
            trailing_bytes_ += data.size() - used;
            check_trailing();
            return;
        }
        input_.insert(input_.end(), data.begin() + used, data.end());
        pump();
    }

    // Verifies the stream was complete: throws EndOfStreamError if the
    // declared plaintext length was not reached, FormatError on extra bytes.
    void finish() {
        if (finished_)
            throw std::logic_error("Decoder: finished twice");
        if (!header_)
            throw EndOfStreamError("container truncated inside header");
        if (!done())
            throw EndOfStreamError("payload truncated");
        finished_ = true;
    }

    bool done() const noexcept { return header_ && produced_ == header_->plaintext_length; }
    const std::optional<ContainerHeader>& header() const noexcept { return header_; }
    uint64_t bytes_out() const noexcept { return produced_; }
    uint64_t emissions() const noexcept { return emissions_; }
    const std::vector<ResetEvent>& resets() const noexcept { return resets_; }

    void debug_validate() const {
        if (next_index_ < kBaseEntries || (header_ && next_index_ > cap_))
            throw std::logic_error("Decoder: next_index out of bounds");
        if (prefix_.size() != next_index_ - kBaseEntries)
            throw std::logic_error("Decoder: table size mismatch");
        for (size_t i = 0; i < prefix_.size(); ++i) {
            if (prefix_[i] >= kBaseEntries + i)
                throw std::logic_error("Decoder: prefix not older than entry");
            const uint64_t prefix_len = prefix_[i] < kBaseEntries ? 1 : len_[prefix_[i] - kBaseEntries];
            if (len_[i] != prefix_len + 1)
                throw std::logic_error("Decoder: phrase length inconsistent");
        }
    }

private:
    void open_header() {
        header_ = ContainerHeader::parse(header_buf_);
        const CodecParams params = header_->params();
        const bool needs_key = params.generator != GeneratorKind::Zero || params.permute_initial;
        if (needs_key && !key_)
            throw KeyError("container requires a key");
        ks_ = key_ ? make_generator(params.generator, *key_)
                   : std::make_unique<ZeroKeystream>();
        perm_ = params.permute_initial ? derive_permutation(*key_) : identity_permutation();
        params_ = params;
        cap_ = uint32_t{1} << params.max_width;
    }

    uint64_t bits_available() const noexcept {
        return (input_.size() - input_head_) * 8 - head_bit_;
    }

    uint32_t take_bits(unsigned width) {
        uint32_t value = 0;
        unsigned need = width;
        while (need > 0) {
            const unsigned take = std::min(8 - head_bit_, need);
            const unsigned shift = 8 - head_bit_ - take;
            value = (value << take) |
                    ((input_[input_head_] >> shift) & bitio_detail::width_mask(take));
            head_bit_ += take;
            need -= take;
            if (head_bit_ == 8) {
                head_bit_ = 0;
                ++input_head_;
            }
        }
        return value;
    }

    void pump() {
        while (!done() && bits_available() >= width_of(k_, params_.max_width))
            step();
        if (done()) {
            trailing_bytes_ += input_.size() - input_head_ - (head_bit_ > 0 ? 1 : 0);
            input_.clear();
            input_head_ = 0;
            head_bit_ = 0;
            check_trailing();
        } else if (input_head_ >= kCompactThreshold) {
            input_.erase(input_.begin(), input_.begin() + static_cast<ptrdiff_t>(input_head_));
            input_head_ = 0;
        }
    }

    void step() {
        const unsigned w = width_of(k_, params_.max_width);
        const uint32_t code =
            (take_bits(w) ^ ks_->next_bits(w)) & bitio_detail::width_mask(w);
        if (code > next_index_ || (code == next_index_ && !pending_))
            throw CorruptStreamError("pointer outside dictionary (wrong key or corrupt stream)");

        // Materialize the phrase; code == next_index_ names the entry being
        // created, whose phrase is the previous phrase plus its own first byte.
        if (code == next_index_) {
            scratch_.assign(prev_phrase_.begin(), prev_phrase_.end());
            scratch_.push_back(prev_phrase_.front());
        } else if (code < kBaseEntries) {
            scratch_.assign(1, perm_[code]);
        } else {
            materialize(code);
        }
        const uint64_t plen = scratch_.size();

        // Complete the insertion the encoder performed one pointer ago. If it
        // fills the table the monitor starts here, in time to count this
        // phrase, matching the encoder's accounting.
        if (pending_) {
            insert_entry(pending_prefix_, scratch_.front());
            pending_ = false;
            if (next_index_ == cap_ && params_.reset_policy == ResetPolicy::RatioMonitor) {
                monitor_active_ = true;
                window_bits_ = 0;
                window_bytes_ = 0;
            }
        }

        ++emissions_;
        ++k_;
        phrase_bytes_ += plen;

        bool reset_now = false;
        if (params_.reset_policy == ResetPolicy::RatioMonitor && monitor_active_) {
            window_bits_ += w;
            window_bytes_ += plen;
            if (window_bytes_ >= params_.ratio_window) {
                if (codec_detail::window_savings(window_bits_, window_bytes_) <
                    static_cast<int64_t>(params_.savings_threshold)) {
                    reset_dictionary();
                    reset_now = true;
                } else {
                    window_bits_ = 0;
                    window_bytes_ = 0;
                }
            }
        }

        if (produced_ + plen > header_->plaintext_length)
            throw CorruptStreamError("phrase overruns declared plaintext length");
        produced_ += plen;
        sink_(scratch_);

        if (!reset_now) {
            if (next_index_ < cap_) {
                pending_ = true;
                pending_prefix_ = code;
                prev_phrase_.swap(scratch_);
                // A pending insertion that would fill the table resets the
                // encoder immediately under ResetAtLimit; the entry itself is
                // discarded, so apply the reset before the next pointer.
                if (params_.reset_policy == ResetPolicy::ResetAtLimit &&
                    next_index_ == cap_ - 1) {
                    reset_dictionary();
                }
            } else {
                pending_ = false;
            }
        }
    }

    void materialize(uint32_t code) {
        const uint64_t len = len_[code - kBaseEntries];
        scratch_.resize(len);
        uint64_t pos = len;
        uint32_t cur = code;
        while (cur >= kBaseEntries) {
            scratch_[--pos] = last_[cur - kBaseEntries];
            cur = prefix_[cur - kBaseEntries];
        }
        scratch_[--pos] = perm_[cur];
    }

    void insert_entry(uint32_t prefix_code, uint8_t byte) {
        prefix_.push_back(prefix_code);
        last_.push_back(byte);
        len_.push_back(prefix_code < kBaseEntries ? 2 : len_[prefix_code - kBaseEntries] + 1);
        ++next_index_;
    }

    void reset_dictionary() {
        resets_.push_back({emissions_, phrase_bytes_});
        prefix_.clear();
        last_.clear();
        len_.clear();
        next_index_ = kBaseEntries;
        k_ = 0;
        pending_ = false;
        monitor_active_ = false;
        window_bits_ = 0;
        window_bytes_ = 0;
    }

    void check_trailing() const {
        if (trailing_bytes_ > 0)
            throw FormatError("trailing data after payload");
    }

    static constexpr size_t kCompactThreshold = 64 * 1024;

    std::optional<Key> key_;
    ByteSink sink_;

    std::array<uint8_t, ContainerHeader::kSize> header_buf_{};
    size_t header_bytes_ = 0;
    std::optional<ContainerHeader> header_;
    CodecParams params_;
    std::unique_ptr<KeystreamGenerator> ks_;
    std::array<uint8_t, 256> perm_{};

    std::vector<uint8_t> input_;
    size_t input_head_ = 0;
    unsigned head_bit_ = 0;
    uint64_t trailing_bytes_ = 0;

    std::vector<uint32_t> prefix_;  // entries for indices >= 256, slot i = index 256+i
    std::vector<uint8_t> last_;
    std::vector<uint64_t> len_;
    uint32_t cap_ = 0;
    uint32_t next_index_ = kBaseEntries;
    uint64_t k_ = 0;

    bool pending_ = false;
    uint32_t pending_prefix_ = 0;
    std::vector<uint8_t> prev_phrase_;
    std::vector<uint8_t> scratch_;

    bool monitor_active_ = false;
    uint64_t window_bits_ = 0;
    uint64_t window_bytes_ = 0;

    uint64_t produced_ = 0;
    uint64_t emissions_ = 0;
    uint64_t phrase_bytes_ = 0;
    std::vector<ResetEvent> resets_;
    bool finished_ = false;
};

// Convenience one-shot forms over the streaming classes.

inline std::vector<uint8_t> encode(std::span<const uint8_t> input, const Key& key,
                                   const CodecParams& params = {}) {
    params.validate();
    std::vector<uint8_t> out(ContainerHeader::kSize);
    Encoder enc(key, params,
                [&out](std::span<const uint8_t> chunk) { out.insert(out.end(), chunk.begin(), chunk.end()); });
    enc.feed(input);
    const uint64_t length = enc.finish();
    const auto header = ContainerHeader::from_params(params, length).serialize();
    std::copy(header.begin(), header.end(), out.begin());
    return out;
}

inline std::vector<uint8_t> decode(std::span<const uint8_t> container,
                                   std::optional<Key> key = std::nullopt) {
    std::vector<uint8_t> out;
    Decoder dec(std::move(key),
                [&out](std::span<const uint8_t> chunk) { out.insert(out.end(), chunk.begin(), chunk.end()); });
    dec.feed(container);
    dec.finish();
    return out;
}

inline std::vector<uint8_t> decode(std::span<const uint8_t> container, const Key& key) {
    return decode(container, std::optional<Key>(key));
}

}  // namespace ccx
