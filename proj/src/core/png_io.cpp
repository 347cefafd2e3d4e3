#include "eegdec/png_io.hpp"

#include "eegdec/errors.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace eegdec {

namespace {

uint32_t crc32_of(const uint8_t* data, size_t len, uint32_t seed = 0) {
    return static_cast<uint32_t>(::crc32(seed, data, static_cast<uInt>(len)));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

uint32_t get_u32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void append_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& body) {
    put_u32(out, static_cast<uint32_t>(body.size()));
    size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), body.begin(), body.end());
    uint32_t crc = crc32_of(out.data() + crc_start, out.size() - crc_start);
    put_u32(out, crc);
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

} // namespace

std::vector<uint8_t> encode_png(const Image& img) {
    if (img.height < 1 || img.width < 1)
        throw ValidationError("encode_png: empty image");
    const size_t stride = size_t(img.width) * 3;

    // Filter 0 on every scanline; zlib does the rest.
    std::vector<uint8_t> raw((stride + 1) * img.height);
    size_t pos = 0;
    for (int y = 0; y < img.height; ++y) {
        raw[pos++] = 0;
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) raw[pos++] = float_to_u8(img.at(y, x, c));
    }

    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw Error("encode_png: deflate failed");
    compressed.resize(bound);

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<uint8_t> ihdr;
    put_u32(ihdr, uint32_t(img.width));
    put_u32(ihdr, uint32_t(img.height));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(2); // color type RGB
    ihdr.push_back(0); // compression
    ihdr.push_back(0); // filter
    ihdr.push_back(0); // interlace
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", compressed);
    append_chunk(out, "IEND", {});
    return out;
}

void write_png(const std::string& path, const Image& img) {
    std::vector<uint8_t> bytes = encode_png(img);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write png: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw IoError("short write: " + path);
}

Image decode_png(const std::vector<uint8_t>& bytes) {
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
        throw ParseError("decode_png: not a PNG file");

    uint32_t width = 0, height = 0;
    int bit_depth = 0, color_type = 0;
    std::vector<uint8_t> idat;
    size_t off = 8;
    bool saw_ihdr = false, saw_iend = false;
    while (off + 8 <= bytes.size()) {
        uint32_t len = get_u32(bytes.data() + off);
        if (off + 12 + len > bytes.size())
            throw ParseError("decode_png: truncated chunk");
        const char* type = reinterpret_cast<const char*>(bytes.data() + off + 4);
        const uint8_t* body = bytes.data() + off + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw ParseError("decode_png: bad IHDR");
            width = get_u32(body);
            height = get_u32(body + 4);
            bit_depth = body[8];
            color_type = body[9];
            if (body[12] != 0) throw ParseError("decode_png: interlaced PNG not supported");
            saw_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), body, body + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_iend = true;
            break;
        }
        off += 12 + len;
    }
    if (!saw_ihdr || !saw_iend) throw ParseError("decode_png: missing IHDR or IEND");
    if (width < 1 || height < 1) throw ParseError("decode_png: empty image");
    if (bit_depth != 8) throw ParseError("decode_png: only 8-bit PNGs supported");

    int channels;
    switch (color_type) {
        case 0: channels = 1; break; // gray
        case 2: channels = 3; break; // rgb
        case 6: channels = 4; break; // rgba
        default:
            throw ParseError("decode_png: unsupported color type " + std::to_string(color_type) +
                             " (stimulus images are 8-bit RGB)");
    }

    const size_t stride = size_t(width) * channels;
    std::vector<uint8_t> raw((stride + 1) * height);
    uLongf raw_len = static_cast<uLongf>(raw.size());
    int zrc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
    if (zrc != Z_OK || raw_len != raw.size())
        throw ParseError("decode_png: inflate failed");

    // Undo scanline filters in place.
    std::vector<uint8_t> prev(stride, 0);
    Image img{static_cast<int>(height), static_cast<int>(width)};
    for (uint32_t y = 0; y < height; ++y) {
        uint8_t filter = raw[y * (stride + 1)];
        uint8_t* line = raw.data() + y * (stride + 1) + 1;
        for (size_t i = 0; i < stride; ++i) {
            int a = i >= size_t(channels) ? line[i - channels] : 0;
            int b = prev[i];
            int c = i >= size_t(channels) ? prev[i - channels] : 0;
            int x = line[i];
            switch (filter) {
                case 0: break;
                case 1: x += a; break;
                case 2: x += b; break;
                case 3: x += (a + b) / 2; break;
                case 4: x += paeth(a, b, c); break;
                default: throw ParseError("decode_png: unknown filter " + std::to_string(filter));
            }
            line[i] = uint8_t(x);
        }
        std::memcpy(prev.data(), line, stride);
        for (uint32_t x = 0; x < width; ++x) {
            if (channels == 1) {
                float g = u8_to_float(line[x]);
                img.at(int(y), int(x), 0) = g;
                img.at(int(y), int(x), 1) = g;
                img.at(int(y), int(x), 2) = g;
            } else {
                for (int ch = 0; ch < 3; ++ch)
                    img.at(int(y), int(x), ch) = u8_to_float(line[x * channels + ch]);
            }
        }
    }
    return img;
}

Image read_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open png: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    try {
        return decode_png(bytes);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

} // namespace eegdec
