#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ddosgan {

/// Bad input, bad configuration, or a violated precondition. CLI exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure while executing an otherwise valid request. CLI exit code 2.
class RuntimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Per-module seed offsets; a single global seed fans out to every module.
namespace seed_offset {
inline constexpr std::uint64_t split = 0;
inline constexpr std::uint64_t shapley = 1000;
inline constexpr std::uint64_t forest = 2000;
inline constexpr std::uint64_t gmm = 3000;
inline constexpr std::uint64_t gan = 4000;
inline constexpr std::uint64_t synth = 5000;
inline constexpr std::uint64_t stream = 6000;
}  // namespace seed_offset

inline std::uint64_t derive_seed(std::uint64_t global, std::uint64_t offset) { return global + offset; }

/// Writes `contents` to a sibling temp file and renames it over `path`, so
/// readers never observe a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// FNV-1a 64-bit digest, hex encoded. Used for artifact checksums.
std::string checksum_hex(std::string_view bytes);

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware
/// concurrency). Callers write results into index-addressed slots, so output
/// order never depends on scheduling.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

std::string trim(std::string_view s);

}  // namespace ddosgan
