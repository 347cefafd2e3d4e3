#pragma once

#include "eegdec/mat.hpp"

#include <string>

namespace eegdec {

// Signal file format, one file per recording:
//   bytes 0..3   magic "EEGR"
//   bytes 4..7   u32 schema version (little-endian), currently 1
//   bytes 8..11  u32 n_channels
//   bytes 12..15 u32 n_timesteps
//   then n_channels * n_timesteps little-endian float32, row-major
//   (channel 0 all timesteps, channel 1 all timesteps, ...).
// Round-trip is bit-exact.
constexpr uint32_t kSignalSchemaVersion = 1;

void write_signal(const std::string& path, const MatF& signal);
MatF read_signal(const std::string& path);

} // namespace eegdec
