#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace eegdec {

// Incremental SHA-256. Used for content hashes of configs, checkpoints and
// caches.
class Sha256 {
  public:
    Sha256() { reset(); }

    void reset();
    void update(const void* data, size_t len);
    void update(const std::string& s) { update(s.data(), s.size()); }

    // Finalizes and returns the 64-char lowercase hex digest.
    std::string hex_digest();

  private:
    void process_block(const uint8_t* p);

    uint32_t state_[8];
    uint64_t bit_count_ = 0;
    uint8_t buf_[64];
    size_t buf_len_ = 0;
};

std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);

} // namespace eegdec
