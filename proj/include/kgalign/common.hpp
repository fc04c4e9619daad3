#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kgalign {

// Error kinds. The CLI maps each to a structured error record.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};
struct ParseError : Error {
    using Error::Error;
    const char* kind() const noexcept override { return "parse_error"; }
};
struct FormatError : Error {
    using Error::Error;
    const char* kind() const noexcept override { return "format_error"; }
};
struct LookupError : Error {
    using Error::Error;
    const char* kind() const noexcept override { return "lookup_error"; }
};
struct ContractError : Error {
    using Error::Error;
    const char* kind() const noexcept override { return "contract_error"; }
};
struct ConfigError : Error {
    using Error::Error;
    const char* kind() const noexcept override { return "config_error"; }
};
struct DegenerateInputError : Error {
    using Error::Error;
    const char* kind() const noexcept override { return "degenerate_input"; }
};
// An upstream artifact is absent; the message names the command producing it.
struct MissingArtifactError : Error {
    using Error::Error;
    const char* kind() const noexcept override { return "missing_artifact"; }
};

// splitmix64 + xoshiro256**. Hand-rolled so streams are identical across
// standard libraries (std distributions are implementation-defined).
class Rng {
public:
    explicit Rng(uint64_t seed = 0);

    uint64_t next_u64();
    // uniform in [0, 1) with 53 random bits
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // uniform integer in [0, n)
    uint64_t below(uint64_t n);
    // inclusive range
    int64_t range(int64_t lo, int64_t hi) { return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1))); }
    double normal();
    bool coin() { return (next_u64() >> 63) != 0; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    uint64_t s_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Derive an independent stream seed from a parent seed and a purpose tag.
uint64_t derive_seed(uint64_t parent, std::string_view tag);

// 64-bit FNV-1a, used for content hashes in manifests and freeze audits.
uint64_t fnv1a(std::string_view bytes, uint64_t h = 0xcbf29ce484222325ull);
uint64_t fnv1a(const double* data, size_t n, uint64_t h = 0xcbf29ce484222325ull);
std::string hex64(uint64_t v);

// Lossless text encoding of doubles (C99 hex-float).
std::string hexfloat(double v);
double parse_hexfloat(std::string_view s);  // throws FormatError, rejects non-finite

std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_ws(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace kgalign
