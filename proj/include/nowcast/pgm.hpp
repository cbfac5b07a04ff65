#pragma once

#include <cstdint>
#include <string>
#include <utility>

namespace nowcast {

// Writes an 8-bit binary PGM (P5), min-max scaled per panel, plus a
// "<path>.scale.txt" sidecar recording the scale. Returns (min, max).
std::pair<float, float> write_pgm(const std::string& path, std::int64_t height,
                                  std::int64_t width, const float* values);

}  // namespace nowcast
