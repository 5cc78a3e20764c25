// ccx — growing-dictionary compressor whose emitted pointers are enciphered
// with a keystream, plus analysis of the resulting byte stream.
//
// Exit codes: 0 success, 1 usage or I/O error, 2 malformed or corrupt
// container, 3 key error, 4 insufficient data for a statistical test.

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccx/ccx.hpp"

namespace {

constexpr size_t kChunk = 64 * 1024;

struct FileHandle {
    std::FILE* f = nullptr;
    bool owned = false;
    FileHandle() = default;
    FileHandle(std::FILE* file, bool own) : f(file), owned(own) {}
    FileHandle(FileHandle&& o) noexcept : f(o.f), owned(o.owned) { o.f = nullptr; }
    FileHandle& operator=(FileHandle&& o) noexcept {
        if (this != &o) {
            if (f && owned)
                std::fclose(f);
            f = o.f;
            owned = o.owned;
            o.f = nullptr;
        }
        return *this;
    }
    FileHandle(const FileHandle&) = delete;
    FileHandle& operator=(const FileHandle&) = delete;
    ~FileHandle() {
        if (f && owned)
            std::fclose(f);
    }
};

FileHandle open_input(const std::string& path) {
    if (path.empty() || path == "-")
        return {stdin, false};
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f)
        throw std::runtime_error("cannot open input file: " + path);
    return {f, true};
}

FileHandle open_output(const std::string& path) {
    if (path.empty() || path == "-")
        return {stdout, false};
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f)
        throw std::runtime_error("cannot open output file: " + path);
    return {f, true};
}

template <typename Fn>
void for_each_chunk(std::FILE* in, Fn&& fn) {
    std::vector<uint8_t> buf(kChunk);
    for (;;) {
        const size_t n = std::fread(buf.data(), 1, buf.size(), in);
        if (n > 0)
            fn(std::span<const uint8_t>(buf.data(), n));
        if (n < buf.size()) {
            if (std::ferror(in))
                throw std::runtime_error("read error on input");
            break;
        }
    }
}

void write_all(std::FILE* out, std::span<const uint8_t> data) {
    if (data.empty())
        return;
    if (std::fwrite(data.data(), 1, data.size(), out) != data.size())
        throw std::runtime_error("write error on output");
}

struct KeyOpts {
    std::string literal;
    std::string file;
    std::string env;
};

void add_key_options(CLI::App* cmd, KeyOpts& opts) {
    cmd->add_option("-k,--key", opts.literal, "key as a literal string");
    cmd->add_option("--key-file", opts.file, "read the key from a file (one trailing newline stripped)");
    cmd->add_option("--key-env", opts.env, "read the key from this environment variable");
}

std::optional<ccx::Key> resolve_key(const KeyOpts& opts) {
    const int given = !opts.literal.empty() + !opts.file.empty() + !opts.env.empty();
    if (given > 1)
        throw std::invalid_argument("give at most one of --key, --key-file, --key-env");
    if (!opts.literal.empty())
        return ccx::Key::from_string(opts.literal);
    if (!opts.file.empty()) {
        std::FILE* f = std::fopen(opts.file.c_str(), "rb");
        if (!f)
            throw ccx::KeyError("cannot read key file: " + opts.file);
        std::vector<uint8_t> bytes;
        for (int c; (c = std::fgetc(f)) != EOF;)
            bytes.push_back(static_cast<uint8_t>(c));
        std::fclose(f);
        if (!bytes.empty() && bytes.back() == '\n') {
            bytes.pop_back();
            if (!bytes.empty() && bytes.back() == '\r')
                bytes.pop_back();
        }
        return ccx::Key(std::move(bytes));
    }
    if (!opts.env.empty()) {
        const char* value = std::getenv(opts.env.c_str());
        if (!value)
            throw ccx::KeyError("environment variable not set: " + opts.env);
        return ccx::Key::from_string(value);
    }
    return std::nullopt;
}

struct EncodeOpts {
    std::string input;
    std::string output = "-";
    KeyOpts key;
    ccx::GeneratorKind prbs = ccx::GeneratorKind::Rc4;
    unsigned max_width = 12;
    ccx::ResetPolicy policy = ccx::ResetPolicy::RatioMonitor;
    uint32_t window = 4096;
    unsigned threshold = 50;
    bool permute = false;
    bool insecure = false;
};

int cmd_encode(const EncodeOpts& o) {
    if (o.prbs == ccx::GeneratorKind::Zero && !o.insecure)
        throw std::invalid_argument("--prbs zero leaves the stream unenciphered; pass --insecure to confirm");

    ccx::CodecParams params;
    params.max_width = o.max_width;
    params.reset_policy = o.policy;
    params.ratio_window = o.window;
    params.savings_threshold = static_cast<uint16_t>(o.threshold);
    params.permute_initial = o.permute;
    params.generator = o.prbs;
    params.validate();

    const std::optional<ccx::Key> key = resolve_key(o.key);
    const bool needs_key = o.prbs != ccx::GeneratorKind::Zero || o.permute;
    if (needs_key && !key)
        throw std::invalid_argument("a key is required: give --key, --key-file or --key-env");
    // With the zero generator and no permutation the key is never consulted.
    const ccx::Key effective = key ? *key : ccx::Key(std::vector<uint8_t>{0});

    FileHandle in = open_input(o.input);
    FileHandle out = open_output(o.output);

    // The header carries the plaintext length, known only at the end. On a
    // seekable output we back-patch in place; otherwise the payload is
    // spooled to a temporary file and copied after the header.
    const int fd_flags = fcntl(fileno(out.f), F_GETFL);
    const bool appending = fd_flags != -1 && (fd_flags & O_APPEND);
    const bool seekable = !appending && lseek(fileno(out.f), 0, SEEK_CUR) != -1;
    FileHandle spool;
    std::FILE* payload_dst = out.f;
    if (seekable) {
        const auto placeholder = ccx::ContainerHeader::from_params(params, 0).serialize();
        write_all(out.f, placeholder);
    } else {
        std::FILE* tmp = std::tmpfile();
        if (!tmp)
            throw std::runtime_error("cannot create spool file");
        spool = {tmp, true};
        payload_dst = tmp;
    }

    const auto t0 = std::chrono::steady_clock::now();
    ccx::Encoder enc(effective, params,
                     [payload_dst](std::span<const uint8_t> chunk) { write_all(payload_dst, chunk); });
    for_each_chunk(in.f, [&enc](std::span<const uint8_t> chunk) { enc.feed(chunk); });
    const uint64_t total = enc.finish();
    const auto header = ccx::ContainerHeader::from_params(params, total).serialize();

    if (seekable) {
        if (std::fflush(out.f) != 0 || std::fseek(out.f, 0, SEEK_SET) != 0)
            throw std::runtime_error("cannot seek output to patch header");
        write_all(out.f, header);
    } else {
        write_all(out.f, header);
        std::rewind(spool.f);
        for_each_chunk(spool.f, [&out](std::span<const uint8_t> chunk) { write_all(out.f, chunk); });
    }
    if (std::fflush(out.f) != 0)
        throw std::runtime_error("write error on output");

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const uint64_t bits = enc.payload_bits();
    const int64_t savings = total ? 1000 - static_cast<int64_t>((1000 * bits) / (8 * total)) : 0;
    std::fprintf(stderr, "bytes in: %llu\n", static_cast<unsigned long long>(total));
    std::fprintf(stderr, "payload bits: %llu\n", static_cast<unsigned long long>(bits));
    std::fprintf(stderr, "savings: %lld per mille\n", static_cast<long long>(savings));
    std::fprintf(stderr, "dictionary resets: %zu\n", enc.resets().size());
    std::fprintf(stderr, "throughput: %.2f MiB/s\n",
                 secs > 0 ? static_cast<double>(total) / (1024.0 * 1024.0) / secs : 0.0);
    return 0;
}

struct DecodeOpts {
    std::string input;
    std::string output = "-";
    KeyOpts key;
};

int cmd_decode(const DecodeOpts& o) {
    const std::optional<ccx::Key> key = resolve_key(o.key);
    FileHandle in = open_input(o.input);
    FileHandle out = open_output(o.output);

    const auto t0 = std::chrono::steady_clock::now();
    ccx::Decoder dec(key, [&out](std::span<const uint8_t> chunk) { write_all(out.f, chunk); });
    for_each_chunk(in.f, [&dec](std::span<const uint8_t> chunk) { dec.feed(chunk); });
    dec.finish();
    if (std::fflush(out.f) != 0)
        throw std::runtime_error("write error on output");

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "bytes out: %llu\n", static_cast<unsigned long long>(dec.bytes_out()));
    std::fprintf(stderr, "throughput: %.2f MiB/s\n",
                 secs > 0 ? static_cast<double>(dec.bytes_out()) / (1024.0 * 1024.0) / secs : 0.0);
    return 0;
}

struct SampleOpts {
    std::string input;
    std::string output = "-";
    bool raw = false;
};

// Streams the analysis subject — container payload by default, the whole
// file under --raw — accumulating the full histogram and the first 2500
// bytes for the bit-stream battery.
void collect_sample(const SampleOpts& o, ccx::Histogram256& hist,
                    std::vector<uint8_t>& head, uint64_t& total) {
    FileHandle in = open_input(o.input);
    size_t header_skip = o.raw ? 0 : ccx::ContainerHeader::kSize;
    std::array<uint8_t, ccx::ContainerHeader::kSize> header_buf{};
    size_t header_got = 0;

    for_each_chunk(in.f, [&](std::span<const uint8_t> chunk) {
        size_t at = 0;
        while (header_got < header_skip && at < chunk.size())
            header_buf[header_got++] = chunk[at++];
        if (header_got == header_skip && header_skip > 0) {
            ccx::ContainerHeader::parse(header_buf);  // validate once
            header_skip = 0;
            header_got = 0;
        }
        for (; at < chunk.size(); ++at) {
            ++hist[chunk[at]];
            if (head.size() < 2500)
                head.push_back(chunk[at]);
            ++total;
        }
    });
    if (!o.raw && header_skip > 0 && header_got < ccx::ContainerHeader::kSize)
        throw ccx::FormatError("container shorter than header");
}

int cmd_analyze(const SampleOpts& o) {
    ccx::Histogram256 hist{};
    std::vector<uint8_t> head;
    uint64_t total = 0;
    collect_sample(o, hist, head, total);

    const ccx::ChiSquareResult chi = ccx::chi_square_uniform(hist);
    const ccx::FipsReport fips = ccx::fips_battery(head);

    uint64_t min_count = UINT64_MAX, max_count = 0;
    for (uint64_t c : hist) {
        min_count = std::min(min_count, c);
        max_count = std::max(max_count, c);
    }

    std::printf("source: %s (%llu bytes)\n", o.raw ? "raw file" : "container payload",
                static_cast<unsigned long long>(total));
    std::printf("chi-square statistic: %.6f\n", chi.statistic);
    std::printf("degrees of freedom: %u\n", chi.dof);
    std::printf("chi-square p-value: %.6g\n", chi.p_value);
    if (min_count > 0)
        std::printf("histogram max/min ratio: %.4f\n",
                    static_cast<double>(max_count) / static_cast<double>(min_count));
    else
        std::printf("histogram max/min ratio: undefined (empty cell)\n");
    std::printf("monobit: %s (ones = %llu)\n", fips.monobit_pass ? "PASS" : "FAIL",
                static_cast<unsigned long long>(fips.ones));
    std::printf("poker: %s (statistic = %.3f)\n", fips.poker_pass ? "PASS" : "FAIL",
                fips.poker_statistic);
    std::printf("runs: %s\n", fips.runs_pass ? "PASS" : "FAIL");
    std::printf("long run: %s (longest = %llu)\n", fips.long_run_pass ? "PASS" : "FAIL",
                static_cast<unsigned long long>(fips.longest_run));
    std::printf("fips overall: %s\n", fips.overall_pass ? "PASS" : "FAIL");
    return 0;
}

int cmd_hist(const SampleOpts& o) {
    ccx::Histogram256 hist{};
    std::vector<uint8_t> head;
    uint64_t total = 0;
    collect_sample(o, hist, head, total);

    FileHandle out = open_output(o.output);
    const std::string csv = ccx::histogram_csv(hist);
    write_all(out.f, std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(csv.data()), csv.size()));
    if (std::fflush(out.f) != 0)
        throw std::runtime_error("write error on output");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dictionary compressor with keystream-enciphered pointers"};
    app.require_subcommand(1);

    const std::map<std::string, ccx::GeneratorKind> kPrbsNames{
        {"lfsr32", ccx::GeneratorKind::Lfsr32},
        {"rc4", ccx::GeneratorKind::Rc4},
        {"zero", ccx::GeneratorKind::Zero}};
    const std::map<std::string, ccx::ResetPolicy> kPolicyNames{
        {"ratio", ccx::ResetPolicy::RatioMonitor},
        {"at-limit", ccx::ResetPolicy::ResetAtLimit}};

    EncodeOpts enc;
    CLI::App* enc_cmd = app.add_subcommand("encode", "compress and encipher a byte stream");
    enc_cmd->add_option("input", enc.input, "input file ('-' or omitted for stdin)");
    enc_cmd->add_option("-o,--output", enc.output, "output file ('-' for stdout)");
    add_key_options(enc_cmd, enc.key);
    enc_cmd->add_option("--prbs", enc.prbs, "keystream generator")
        ->transform(CLI::CheckedTransformer(kPrbsNames, CLI::ignore_case));
    enc_cmd->add_option("--max-width", enc.max_width, "pointer width cap in bits")
        ->check(CLI::Range(10u, 20u));
    enc_cmd->add_option("--reset-policy", enc.policy, "dictionary reset policy")
        ->transform(CLI::CheckedTransformer(kPolicyNames, CLI::ignore_case));
    enc_cmd->add_option("--window", enc.window, "ratio monitor window in plaintext bytes")
        ->check(CLI::Range(1u, 4294967295u));
    enc_cmd->add_option("--threshold", enc.threshold, "minimum savings in per mille")
        ->check(CLI::Range(0u, 1000u));
    enc_cmd->add_flag("--permute", enc.permute, "permute the initial dictionary from the key");
    enc_cmd->add_flag("--insecure", enc.insecure, "allow the zero keystream (output is not enciphered)");

    DecodeOpts dec;
    CLI::App* dec_cmd = app.add_subcommand("decode", "decipher and decompress a container");
    dec_cmd->add_option("input", dec.input, "input container ('-' or omitted for stdin)");
    dec_cmd->add_option("-o,--output", dec.output, "output file ('-' for stdout)");
    add_key_options(dec_cmd, dec.key);

    SampleOpts ana;
    CLI::App* ana_cmd = app.add_subcommand("analyze", "randomness report for a container payload");
    ana_cmd->add_option("input", ana.input, "input file ('-' or omitted for stdin)");
    ana_cmd->add_flag("--raw", ana.raw, "treat the input as raw bytes, not a container");

    SampleOpts hst;
    CLI::App* hst_cmd = app.add_subcommand("hist", "byte-frequency CSV for a container payload");
    hst_cmd->add_option("input", hst.input, "input file ('-' or omitted for stdin)");
    hst_cmd->add_option("-o,--output", hst.output, "output file ('-' for stdout)");
    hst_cmd->add_flag("--raw", hst.raw, "treat the input as raw bytes, not a container");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (enc_cmd->parsed())
            return cmd_encode(enc);
        if (dec_cmd->parsed())
            return cmd_decode(dec);
        if (ana_cmd->parsed())
            return cmd_analyze(ana);
        return cmd_hist(hst);
    } catch (const ccx::KeyError& e) {
        std::fprintf(stderr, "key error: %s\n", e.what());
        return 3;
    } catch (const ccx::InsufficientDataError& e) {
        std::fprintf(stderr, "insufficient data: %s\n", e.what());
        return 4;
    } catch (const ccx::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
