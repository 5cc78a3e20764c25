// Acceptance gate: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <random>
#include <string>
#include <vector>

#include "ccx/ccx.hpp"
#include "test_util.hpp"

using namespace ccx;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int number, const char* name, bool ok, const std::string& detail) {
    std::printf("criterion %d (%s): %s%s%s\n", number, name, ok ? "PASS" : "FAIL",
                detail.empty() ? "" : " — ", detail.c_str());
    if (!ok)
        ++g_failures;
}

template <typename Fn>
void criterion(int number, const char* name, Fn&& fn) {
    try {
        std::string detail;
        const bool ok = fn(detail);
        report(number, name, ok, detail);
    } catch (const std::exception& e) {
        report(number, name, false, std::string("exception: ") + e.what());
    }
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// --- criterion 1 -----------------------------------------------------------

bool run_round_trip(std::string& detail) {
    const auto t0 = Clock::now();
    std::mt19937 rng(0xAC0FFEEu);
    const unsigned widths[] = {10, 11, 12};

    for (int i = 0; i < 1000; ++i) {
        CodecParams p;
        p.generator = (i % 2 == 0) ? GeneratorKind::Lfsr32 : GeneratorKind::Rc4;
        p.max_width = widths[i % 3];
        p.reset_policy = (i / 2) % 2 == 0 ? ResetPolicy::RatioMonitor : ResetPolicy::ResetAtLimit;
        p.permute_initial = (i / 4) % 2 == 0;

        std::vector<uint8_t> key_bytes(1 + rng() % 32);
        for (auto& b : key_bytes)
            b = static_cast<uint8_t>(rng());
        key_bytes[0] |= 1;  // nonzero LFSR seed
        const Key key{key_bytes};

        const size_t len = rng() % 65537;
        std::vector<uint8_t> input;
        switch (i % 4) {
            case 0: input = testutil::make_random(len, rng()); break;
            case 1: input = testutil::make_text(len, rng()); break;
            case 2: {
                const auto unit = testutil::make_random(1 + rng() % 64, rng());
                input = testutil::make_pattern(len, unit);
                break;
            }
            default: {
                // Sparse alphabet: long matches with occasional breaks.
                input.resize(len);
                for (auto& b : input)
                    b = static_cast<uint8_t>("abcd"[rng() % 4]);
                break;
            }
        }

        if (decode(encode(input, key, p), key) != input) {
            detail = "mismatch at case " + std::to_string(i);
            return false;
        }
    }

    const double secs = seconds_since(t0);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "1000 cases in %.1f s", secs);
    detail = buf;
    return secs < 60.0;
}

// --- criterion 2 -----------------------------------------------------------

std::vector<uint32_t> production_pointers(std::span<const uint8_t> container, size_t count) {
    const auto header = ContainerHeader::parse(container);
    BitReader r(container.subspan(ContainerHeader::kSize));
    std::vector<uint32_t> out;
    for (size_t k = 0; k < count; ++k)
        out.push_back(r.read_code(width_of(k, header.max_width)));
    // Everything after the last pointer must be sub-byte zero padding.
    if (r.bits_remaining() >= 8)
        throw std::runtime_error("payload longer than the pointer sequence");
    if (r.bits_remaining() > 0 && r.read_code(static_cast<unsigned>(r.bits_remaining())) != 0)
        throw std::runtime_error("nonzero pad bits");
    return out;
}

bool run_oracle_equivalence(std::string& detail) {
    const Key key(std::vector<uint8_t>{0});
    CodecParams p;
    p.generator = GeneratorKind::Zero;

    // The canonical trace first.
    const std::vector<uint8_t> ab{'a', 'b', 'a', 'b', 'a', 'b'};
    const auto ab_container = encode(ab, key, p);
    const auto ab_pointers = production_pointers(ab_container, 4);
    if (ab_pointers != std::vector<uint32_t>{97, 98, 256, 256}) {
        detail = "ababab trace mismatch";
        return false;
    }

    std::mt19937 rng(0x0AC1Eu);
    for (int i = 0; i < 200; ++i) {
        const size_t len = rng() % 4097;
        std::vector<uint8_t> input;
        switch (i % 3) {
            case 0: input = testutil::make_random(len, rng()); break;
            case 1: input = testutil::make_text(len, rng()); break;
            default: {
                const auto unit = testutil::make_random(1 + rng() % 16, rng());
                input = testutil::make_pattern(len, unit);
                break;
            }
        }
        const auto expected = testutil::reference_pointers(input, uint32_t{1} << p.max_width);
        const auto container = encode(input, key, p);
        if (production_pointers(container, expected.size()) != expected) {
            detail = "pointer mismatch at case " + std::to_string(i);
            return false;
        }
        if (decode(container) != input) {
            detail = "round trip mismatch at case " + std::to_string(i);
            return false;
        }
    }
    detail = "200 inputs + ababab trace";
    return true;
}

// --- criterion 3 -----------------------------------------------------------

bool run_width_schedule(std::string& detail) {
    for (uint64_t k = 0; k <= 1000000; ++k) {
        const unsigned expected = k <= 255 ? 9u : k <= 511 ? 10u : k <= 1023 ? 11u : 12u;
        if (width_of(k, 12) != expected) {
            detail = "width_of(" + std::to_string(k) + ",12) = " +
                     std::to_string(width_of(k, 12)) + ", expected " + std::to_string(expected);
            return false;
        }
    }
    detail = "exhaustive for k <= 10^6";
    return true;
}

// --- criterion 4 -----------------------------------------------------------

bool run_compression_effectiveness(std::string& detail) {
    const Key key = Key::from_string("effectiveness");
    CodecParams p;  // defaults: rc4, max_width 12, ratio monitor

    std::vector<uint8_t> unit(64);
    for (size_t i = 0; i < unit.size(); ++i)
        unit[i] = static_cast<uint8_t>(i * 7 + 3);
    const auto patterned = testutil::make_pattern(100 * 1024, unit);
    const auto container = encode(patterned, key, p);
    const double percent = 100.0 * static_cast<double>(container.size()) /
                           static_cast<double>(patterned.size());
    if (container.size() >= patterned.size() * 3 / 10) {
        detail = "patterned input compressed to " + std::to_string(percent) + "%";
        return false;
    }

    const std::vector<uint8_t> identical(10000, 'a');
    uint64_t emitted = 0;
    Encoder enc(key, p, [](std::span<const uint8_t>) {});
    enc.feed(identical);
    enc.finish();
    emitted = enc.emissions();
    if (emitted > 150) {
        detail = std::to_string(emitted) + " pointers for 10000 identical bytes";
        return false;
    }

    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.1f%% of input; %llu pointers", percent,
                  static_cast<unsigned long long>(emitted));
    detail = buf;
    return true;
}

// --- criterion 5 -----------------------------------------------------------

bool run_ciphertext_flatness(std::string& detail) {
    const auto t0 = Clock::now();
    const auto text = testutil::make_text(1 << 20, 0xF1A7u);

    const auto plain_chi = chi_square_uniform(text);
    if (plain_chi.statistic <= 10000.0) {
        detail = "plaintext statistic only " + std::to_string(plain_chi.statistic);
        return false;
    }

    CodecParams p;  // rc4 default
    int flat = 0;
    for (int i = 1; i <= 10; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "flatness-key-%02d", i);
        const auto container = encode(text, Key::from_string(name), p);
        const std::span<const uint8_t> payload =
            std::span<const uint8_t>(container).subspan(ContainerHeader::kSize);

        const auto h = histogram(payload);
        uint64_t lo = UINT64_MAX, hi = 0;
        for (uint64_t c : h) {
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
        const auto chi = chi_square_uniform(h);
        if (lo > 0 && static_cast<double>(hi) / static_cast<double>(lo) < 1.3 &&
            chi.p_value > 0.001)
            ++flat;
    }

    const double secs = seconds_since(t0);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%d/10 keys flat, plaintext statistic %.0f, %.1f s", flat,
                  plain_chi.statistic, secs);
    detail = buf;
    return flat >= 9 && secs < 30.0;
}

// --- criterion 6 -----------------------------------------------------------

bool run_fips_correctness(std::string& detail) {
    const auto zeros = fips_battery(std::vector<uint8_t>(2500, 0x00));
    if (zeros.monobit_pass || zeros.long_run_pass) {
        detail = "degenerate zero stream not rejected";
        return false;
    }

    const auto alt = fips_battery(std::vector<uint8_t>(2500, 0x55));
    if (!alt.monobit_pass || alt.ones != 10000) {
        detail = "alternating monobit X = " + std::to_string(alt.ones);
        return false;
    }
    // All 5000 4-bit segments equal 0101, so the statistic lands at
    // (16/5000)*5000^2 - 5000 = 75000, far above the 57.4 cutoff.
    if (alt.poker_pass || std::fabs(alt.poker_statistic - 75000.0) > 1e-6) {
        detail = "alternating poker X = " + std::to_string(alt.poker_statistic);
        return false;
    }

    int passed = 0;
    for (int i = 1; i <= 10; ++i) {
        Rc4 rc4(Key::from_string("battery-seed-" + std::to_string(i)).bytes());
        std::vector<uint8_t> stream(2500);
        for (auto& b : stream)
            b = rc4.next_byte();
        if (fips_battery(stream).overall_pass)
            ++passed;
    }
    if (passed < 9) {
        detail = "only " + std::to_string(passed) + "/10 generator streams pass";
        return false;
    }
    detail = "degenerate streams rejected; " + std::to_string(passed) + "/10 generator streams pass";
    return true;
}

// --- criterion 7 -----------------------------------------------------------

bool run_chi_square_kernel(std::string& detail) {
    Histogram256 uniform{};
    uniform.fill(100);
    const auto u = chi_square_uniform(uniform);
    if (u.statistic != 0.0 || u.p_value < 0.999999) {
        detail = "uniform histogram: statistic " + std::to_string(u.statistic);
        return false;
    }

    for (uint64_t n : {uint64_t{1280}, uint64_t{2560}, uint64_t{25600}}) {
        Histogram256 single{};
        single[42] = n;
        const auto s = chi_square_uniform(single);
        if (s.statistic != 255.0 * static_cast<double>(n)) {
            detail = "single-cell statistic for n = " + std::to_string(n);
            return false;
        }
    }

    Histogram256 constructed{};
    constructed.fill(100);
    constructed[0] = 116;
    constructed[1] = 84;
    const auto c = chi_square_uniform(constructed);
    if (std::fabs(c.statistic - 5.12) > 1e-9) {
        detail = "constructed case statistic " + std::to_string(c.statistic);
        return false;
    }
    detail = "uniform, single-cell and constructed cases exact";
    return true;
}

// --- criterion 8 -----------------------------------------------------------

bool run_reset_synchronization(std::string& detail) {
    // Compressible head (fills the dictionary with long phrases), then a
    // low-compressibility random tail that degrades the monitored savings.
    const std::vector<uint8_t> unit{'s', 'y', 'n', 'c', 'w', 'o', 'r', 'd'};
    auto input = testutil::make_pattern(64 * 1024, unit);
    const auto tail = testutil::make_random(192 * 1024, 0x5E7Au);
    input.insert(input.end(), tail.begin(), tail.end());

    const Key key = Key::from_string("reset-sync");
    CodecParams p;
    p.generator = GeneratorKind::Rc4;
    p.max_width = 10;
    p.ratio_window = 2048;
    p.savings_threshold = 50;

    std::vector<uint8_t> container(ContainerHeader::kSize);
    Encoder enc(key, p, [&container](std::span<const uint8_t> c) {
        container.insert(container.end(), c.begin(), c.end());
    });
    enc.feed(input);
    const uint64_t total = enc.finish();
    const auto hdr = ContainerHeader::from_params(p, total).serialize();
    std::copy(hdr.begin(), hdr.end(), container.begin());

    if (enc.resets().size() < 3) {
        detail = "only " + std::to_string(enc.resets().size()) + " encoder resets";
        return false;
    }

    std::vector<uint8_t> out;
    Decoder dec(key, [&out](std::span<const uint8_t> c) { out.insert(out.end(), c.begin(), c.end()); });
    dec.feed(container);
    dec.finish();

    if (out != input) {
        detail = "round trip mismatch";
        return false;
    }
    if (dec.resets() != enc.resets()) {
        detail = "reset logs differ";
        return false;
    }
    detail = std::to_string(enc.resets().size()) + " synchronized resets";
    return true;
}

}  // namespace

int main() {
    criterion(1, "round-trip identity", run_round_trip);
    criterion(2, "oracle equivalence", run_oracle_equivalence);
    criterion(3, "width schedule", run_width_schedule);
    criterion(4, "compression effectiveness", run_compression_effectiveness);
    criterion(5, "ciphertext flatness", run_ciphertext_flatness);
    criterion(6, "randomness battery correctness", run_fips_correctness);
    criterion(7, "chi-square kernel", run_chi_square_kernel);
    criterion(8, "reset synchronization", run_reset_synchronization);

    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
