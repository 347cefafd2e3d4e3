#include "eegdec/container.hpp"

#include "eegdec/sha256.hpp"

#include <cstring>
#include <fstream>

namespace eegdec {

namespace {

void put_u32le(std::string& out, uint32_t v) {
    char b[4] = {char(v), char(v >> 8), char(v >> 16), char(v >> 24)};
    out.append(b, 4);
}

void put_u64le(std::string& out, uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char(v >> (8 * i));
    out.append(b, 8);
}

uint32_t get_u32le(const char* p) {
    return uint32_t(uint8_t(p[0])) | (uint32_t(uint8_t(p[1])) << 8) |
           (uint32_t(uint8_t(p[2])) << 16) | (uint32_t(uint8_t(p[3])) << 24);
}

uint64_t get_u64le(const char* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(p[i])) << (8 * i);
    return v;
}

std::string serialize_body(const Container& c) {
    if (c.magic.size() != 4) throw ValidationError("container: magic must be 4 chars");
    std::string body = c.magic;
    put_u32le(body, c.version);
    put_u32le(body, uint32_t(c.header_json.size()));
    body += c.header_json;
    put_u64le(body, c.payload.size());
    size_t base = body.size();
    body.resize(base + c.payload.size() * 4);
    for (size_t i = 0; i < c.payload.size(); ++i) {
        uint32_t u;
        std::memcpy(&u, &c.payload[i], 4);
        body[base + 4 * i] = char(u);
        body[base + 4 * i + 1] = char(u >> 8);
        body[base + 4 * i + 2] = char(u >> 16);
        body[base + 4 * i + 3] = char(u >> 24);
    }
    return body;
}

} // namespace

std::string container_hash(const Container& c) { return sha256_hex(serialize_body(c)); }

void write_container(const std::string& path, const Container& c) {
    std::string body = serialize_body(c);
    std::string hash = sha256_hex(body);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write container: " + path);
    f.write(body.data(), std::streamsize(body.size()));
    f.write(hash.data(), 64);
    if (!f) throw IoError("short write: " + path);
}

Container read_container(const std::string& path, const std::string& expected_magic,
                         uint32_t max_version) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open container: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 4 + 4 + 4 + 8 + 64)
        throw ParseError(path + ": truncated container");
    std::string body = bytes.substr(0, bytes.size() - 64);
    std::string stored_hash = bytes.substr(bytes.size() - 64);
    if (sha256_hex(body) != stored_hash)
        throw ParseError(path + ": content hash mismatch (file corrupt or truncated)");

    Container c;
    c.magic = body.substr(0, 4);
    if (c.magic != expected_magic)
        throw ParseError(path + ": expected magic '" + expected_magic + "', found '" + c.magic + "'");
    c.version = get_u32le(body.data() + 4);
    if (c.version > max_version)
        throw VersionError(path + ": container version " + std::to_string(c.version) +
                           " is newer than supported version " + std::to_string(max_version));
    uint32_t hlen = get_u32le(body.data() + 8);
    if (12 + size_t(hlen) + 8 > body.size()) throw ParseError(path + ": truncated header");
    c.header_json = body.substr(12, hlen);
    uint64_t count = get_u64le(body.data() + 12 + hlen);
    size_t payload_off = 12 + size_t(hlen) + 8;
    if (payload_off + count * 4 != body.size())
        throw ParseError(path + ": payload size mismatch");
    c.payload.resize(count);
    for (size_t i = 0; i < count; ++i) {
        uint32_t u = get_u32le(body.data() + payload_off + 4 * i);
        std::memcpy(&c.payload[i], &u, 4);
    }
    return c;
}

} // namespace eegdec
