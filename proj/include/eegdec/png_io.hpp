#pragma once

#include "eegdec/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace eegdec {

// 8-bit RGB PNG codec. Chunk layout, filtering and CRC are implemented here;
// the IDAT byte stream goes through zlib. Output bytes are deterministic for
// a given image.
void write_png(const std::string& path, const Image& img);
std::vector<uint8_t> encode_png(const Image& img);

// Reads an 8-bit PNG. Accepts RGB, RGBA (alpha dropped) and grayscale
// (expanded); rejects palette and 16-bit images, which the stimulus store
// never contains.
Image read_png(const std::string& path);
Image decode_png(const std::vector<uint8_t>& bytes);

inline uint8_t float_to_u8(float v) {
    float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    return static_cast<uint8_t>(c * 255.0f + 0.5f);
}

inline float u8_to_float(uint8_t v) { return static_cast<float>(v) / 255.0f; }

// Snaps pixels onto the 8-bit grid, exactly as a PNG round trip would.
inline void quantize_to_u8(Image& img) {
    for (float& v : img.rgb) v = u8_to_float(float_to_u8(v));
}

} // namespace eegdec
