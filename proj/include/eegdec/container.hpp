#pragma once

#include "eegdec/errors.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace eegdec {

// Binary container used by encoder checkpoints, the toy-backend checkpoint
// and target caches:
//   magic (4 bytes) | u32 version | u32 header_len | header JSON (UTF-8)
//   | u64 payload_count | payload_count little-endian float32
//   | 64-byte hex SHA-256 of everything before the trailer.
// The hash trailer makes silent truncation or bit rot a hard load error.
struct Container {
    std::string magic;  // exactly 4 chars
    uint32_t version = 1;
    std::string header_json;
    std::vector<float> payload;
};

void write_container(const std::string& path, const Container& c);

// Reads and verifies. expected_magic must match; a newer version throws
// VersionError; a hash mismatch throws ParseError.
Container read_container(const std::string& path, const std::string& expected_magic,
                         uint32_t max_version);

// Content hash of a container as written (matches the stored trailer).
std::string container_hash(const Container& c);

} // namespace eegdec
