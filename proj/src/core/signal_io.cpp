#include "eegdec/signal_io.hpp"

#include "eegdec/errors.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace eegdec {

namespace {

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 24));
}

uint32_t get_u32le(const uint8_t* p) {
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

} // namespace

void write_signal(const std::string& path, const MatF& signal) {
    if (signal.rows < 1 || signal.cols < 1)
        throw ValidationError("write_signal: signal must have at least one channel and timestep");
    std::vector<uint8_t> bytes;
    bytes.reserve(16 + signal.size() * 4);
    bytes.insert(bytes.end(), {'E', 'E', 'G', 'R'});
    put_u32le(bytes, kSignalSchemaVersion);
    put_u32le(bytes, uint32_t(signal.rows));
    put_u32le(bytes, uint32_t(signal.cols));
    for (float f : signal.v) {
        uint32_t u;
        std::memcpy(&u, &f, 4);
        put_u32le(bytes, u);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write signal file: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw IoError("short write: " + path);
}

MatF read_signal(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open signal file: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 16 || std::memcmp(bytes.data(), "EEGR", 4) != 0)
        throw ParseError(path + ": not a signal file (bad magic)");
    uint32_t version = get_u32le(bytes.data() + 4);
    if (version > kSignalSchemaVersion)
        throw VersionError(path + ": signal schema version " + std::to_string(version) +
                           " is newer than supported version " + std::to_string(kSignalSchemaVersion));
    uint32_t rows = get_u32le(bytes.data() + 8);
    uint32_t cols = get_u32le(bytes.data() + 12);
    size_t expected = 16 + size_t(rows) * cols * 4;
    if (rows < 1 || cols < 1 || bytes.size() != expected)
        throw ParseError(path + ": truncated or inconsistent signal file");
    MatF m(rows, cols);
    for (size_t i = 0; i < m.size(); ++i) {
        uint32_t u = get_u32le(bytes.data() + 16 + 4 * i);
        std::memcpy(&m.v[i], &u, 4);
    }
    return m;
}

} // namespace eegdec
