#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <utility>

#include "ccx/errors.hpp"

namespace ccx {

// Statistical checks used to judge whether compressor output looks like a
// flat byte source: chi-square against the uniform distribution plus the
// classic four-test battery over the first 20000 bits of a sample.

using Histogram256 = std::array<uint64_t, 256>;

inline Histogram256 histogram(std::span<const uint8_t> data) {
    Histogram256 h{};
    for (uint8_t b : data)
        ++h[b];
    return h;
}

namespace stats_detail {

// Regularized incomplete gamma functions P(a,x) and Q(a,x) = 1 - P(a,x),
// via the standard series / continued-fraction split at x = a + 1. The
// continued fraction is evaluated with Lentz's method.
inline double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 1000; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-15)
            break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_cf(double a, double x) {
    constexpr double kTiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 1000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-15)
            break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0)
        throw std::invalid_argument("gamma_q: require a > 0 and x >= 0");
    if (x == 0.0)
        return 1.0;
    if (x < a + 1.0)
        return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

inline double gamma_p(double a, double x) { return 1.0 - gamma_q(a, x); }

}  // namespace stats_detail

struct ChiSquareResult {
    double statistic = 0.0;
    unsigned dof = 255;
    double p_value = 0.0;  // upper tail: probability of a statistic at least this large
    uint64_t total = 0;
};

// Chi-square goodness of fit of a byte histogram against the uniform
// distribution over all 256 cells. Requires at least 1280 observations
// (an expected count of 5 per cell) for the approximation to hold.
inline ChiSquareResult chi_square_uniform(const Histogram256& h) {
    ChiSquareResult r;
    for (uint64_t c : h)
        r.total += c;
    if (r.total < 1280)
        throw InsufficientDataError("chi-square needs at least 1280 bytes");
    // statistic = sum (c - T/256)^2 / (T/256) = sum (256c - T)^2 / (256 T).
    // The numerator is accumulated in exact integer arithmetic, so the
    // result is independent of cell order and exact for closed-form cases.
    unsigned __int128 numerator = 0;
    for (uint64_t c : h) {
        const __int128 d = static_cast<__int128>(c) * 256 - static_cast<__int128>(r.total);
        numerator += static_cast<unsigned __int128>(d * d);
    }
    r.statistic = static_cast<double>(numerator) / (256.0 * static_cast<double>(r.total));
    r.p_value = stats_detail::gamma_q(r.dof / 2.0, r.statistic / 2.0);
    return r;
}

inline ChiSquareResult chi_square_uniform(std::span<const uint8_t> data) {
    return chi_square_uniform(histogram(data));
}

// Battery over the first 20000 bits (2500 bytes, most significant bit
// first): monobit count, poker on 4-bit slices, run length distribution,
// and longest run. Pass bands follow the usual hardware self-test limits.
struct FipsReport {
    uint64_t ones = 0;
    bool monobit_pass = false;

    double poker_statistic = 0.0;
    bool poker_pass = false;

    // runs_* index 0..5 hold counts of runs of length 1..5 and >= 6,
    // with a pass flag per interval and symbol (12 flags in all).
    std::array<uint64_t, 6> runs_of_ones{};
    std::array<uint64_t, 6> runs_of_zeros{};
    std::array<bool, 6> runs_of_ones_pass{};
    std::array<bool, 6> runs_of_zeros_pass{};
    bool runs_pass = false;

    uint64_t longest_run = 0;
    bool long_run_pass = false;

    bool overall_pass = false;
};

inline FipsReport fips_battery(std::span<const uint8_t> data) {
    constexpr size_t kBytes = 2500;
    constexpr uint64_t kBits = 20000;
    if (data.size() < kBytes)
        throw InsufficientDataError("bit-stream battery needs at least 2500 bytes");

    FipsReport rep;

    // Monobit: 9654 < ones < 10346.
    for (size_t i = 0; i < kBytes; ++i)
        rep.ones += static_cast<unsigned>(std::popcount(data[i]));
    rep.monobit_pass = rep.ones > 9654 && rep.ones < 10346;

    // Poker: 5000 4-bit slices, X = (16/5000) * sum f_i^2 - 5000,
    // pass when 1.03 < X < 57.4.
    std::array<uint64_t, 16> nibbles{};
    for (size_t i = 0; i < kBytes; ++i) {
        ++nibbles[data[i] >> 4];
        ++nibbles[data[i] & 0x0F];
    }
    double sq = 0.0;
    for (uint64_t f : nibbles)
        sq += static_cast<double>(f) * static_cast<double>(f);
    rep.poker_statistic = (16.0 / 5000.0) * sq - 5000.0;
    rep.poker_pass = rep.poker_statistic > 1.03 && rep.poker_statistic < 57.4;

    // Runs and longest run over the same 20000 bits.
    int prev = -1;
    uint64_t run_len = 0;
    auto close_run = [&rep, &prev, &run_len]() {
        if (prev < 0)
            return;
        auto& buckets = prev ? rep.runs_of_ones : rep.runs_of_zeros;
        ++buckets[run_len >= 6 ? 5 : run_len - 1];
        rep.longest_run = std::max(rep.longest_run, run_len);
    };
    for (uint64_t bit_at = 0; bit_at < kBits; ++bit_at) {
        const int bit = (data[bit_at >> 3] >> (7 - (bit_at & 7))) & 1;
        if (bit == prev) {
            ++run_len;
        } else {
            close_run();
            prev = bit;
            run_len = 1;
        }
    }
    close_run();

    static constexpr std::array<std::pair<uint64_t, uint64_t>, 6> kRunBands{{
        {2267, 2733}, {1079, 1421}, {502, 748}, {223, 402}, {90, 223}, {90, 223}}};
    rep.runs_pass = true;
    for (size_t i = 0; i < 6; ++i) {
        const auto [lo, hi] = kRunBands[i];
        rep.runs_of_ones_pass[i] = rep.runs_of_ones[i] >= lo && rep.runs_of_ones[i] <= hi;
        rep.runs_of_zeros_pass[i] = rep.runs_of_zeros[i] >= lo && rep.runs_of_zeros[i] <= hi;
        rep.runs_pass = rep.runs_pass && rep.runs_of_ones_pass[i] && rep.runs_of_zeros_pass[i];
    }

    rep.long_run_pass = rep.longest_run < 34;
    rep.overall_pass =
        rep.monobit_pass && rep.poker_pass && rep.runs_pass && rep.long_run_pass;
    return rep;
}

// CSV dump of a byte histogram: header line then one row per byte value,
// probability printed with six decimals (0.000000 for an empty sample).
inline std::string histogram_csv(const Histogram256& h) {
    uint64_t total = 0;
    for (uint64_t c : h)
        total += c;
    std::string out = "byte,count,probability\n";
    char line[64];
    for (unsigned b = 0; b < 256; ++b) {
        const double p = total ? static_cast<double>(h[b]) / static_cast<double>(total) : 0.0;
        std::snprintf(line, sizeof(line), "%u,%llu,%.6f\n", b,
                      static_cast<unsigned long long>(h[b]), p);
        out += line;
    }
    return out;
}

}  // namespace ccx
